"""Rate-distortion of a fair coin squeezed between two cover counts.

The block rate R(eps) sits between average-ball entropy at 4 L eps and
the Bowen-type count at eps.  On a fair coin both sides are exact and the
rate equals log 2 - H(eps) for the Hamming distortion.
"""

import math

from mdimkit import ProductMeasure, blahut_arimoto, make_shift_system, sandwich_check
from mdimkit.dynsys import bernoulli_atoms, discrete_base

hamming = [[0.0, 1.0], [1.0, 0.0]]
for D in (0.05, 0.1, 0.2, 0.3):
    pt = blahut_arimoto([0.5, 0.5], hamming, D)
    closed = math.log(2) + D * math.log(D) + (1 - D) * math.log(1 - D)
    print(f"D={D:.2f}  R={pt.rate:.6f}  closed form {closed:.6f}")

sys = make_shift_system(discrete_base(2), 0, 8)
rep = sandwich_check(sys, ProductMeasure(bernoulli_atoms(0.5), 0), 0.1, 2, range(1, 9))
print(f"\nsandwich at eps=0.1, L=2: {rep.lower:.4f} <= {rep.rate:.4f} <= {rep.upper:.4f}")
print("flagged" if rep.flagged else "inequalities hold within tolerance")
