"""An interval map whose dimension-like growth keeps climbing with scale.

Blocks of length ~1/k^2 each carry a sawtooth with k^k laps.  At the scale
resolving block k, separated sets grow like (k^k + 1)^n, so the ratio of
log-growth to |log eps| climbs towards one.
"""

from mdimkit import BlockSpec, build_max_mdim_map, predicted_mdim, symbolic_separated_count

spec = BlockSpec.inverse_square(6)
f, sys = build_max_mdim_map(spec)
print(f"map with {len(f)} affine pieces; f(0.1) = {float(f(0.1)):.6f}")

print(" k   laps  eps_k        count(m=2)   predicted ratio")
for k, ratio in predicted_mdim(spec).rows:
    count = symbolic_separated_count(f, k, 2) if k <= 4 else None
    print(f"{k:2d} {spec.laps(k):6d}  {spec.eps(k):.3e}  {count!s:>11}   {ratio:.3f}")
