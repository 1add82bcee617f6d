import itertools
import math

import numpy as np
import pytest

from mdimkit.dynsys import (FiniteMeasure, ProductMeasure, bernoulli_atoms, discrete_base,
                            doubling_map, make_product_measure, make_shift_system)
from mdimkit.errors import ConfigError
from mdimkit.infotheory import (ApproximationMap, JointDistribution, RDCurve, blahut_arimoto,
                                block_rate_distortion, lloyd_codebook, mutual_information,
                                orbit_code, random_approximation, sandwich_check,
                                shannon_entropy)

HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])


def H2(q):
    return -q * math.log(q) - (1 - q) * math.log(1 - q)


def test_entropy_examples():
    assert shannon_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
    assert shannon_entropy([1, 0, 0]) == 0.0
    assert shannon_entropy([0.2, 0.8]) == pytest.approx(0.500402, abs=1e-6)


def test_mutual_information_examples():
    assert mutual_information(np.outer([0.3, 0.7], [0.6, 0.4])) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information([[0.5, 0.0], [0.0, 0.5]]) == pytest.approx(math.log(2))
    assert mutual_information([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(0.192745, abs=1e-6)
    with pytest.raises(ConfigError):
        JointDistribution(np.array([[0.5, 0.6]]))


def test_mutual_information_bounds_on_random_joints():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        shape = tuple(rng.integers(1, 6, 2))
        m = rng.random(shape) ** 3
        m /= m.sum()
        i = mutual_information(m)
        hx, hy = shannon_entropy(m.sum(1)), shannon_entropy(m.sum(0))
        assert 0 <= i <= min(hx, hy) + 1e-12


def test_ba_binary_closed_form():
    pt = blahut_arimoto([0.5, 0.5], HAMMING, 0.1)
    assert pt.rate == pytest.approx(0.368064, abs=1e-6)
    assert pt.distortion <= 0.1 + 1e-9
    np.testing.assert_allclose(pt.kernel.sum(axis=1), 1.0)


def test_ba_lossless_and_zero_rate():
    assert blahut_arimoto([0.3, 0.7], HAMMING, 0.0).rate == pytest.approx(H2(0.3))
    for D in (0.3, 0.45):
        assert blahut_arimoto([0.3, 0.7], HAMMING, D).rate == pytest.approx(0.0, abs=1e-12)


def test_ba_slope_mode_and_errors():
    pt = blahut_arimoto([0.5, 0.5], HAMMING, slope=math.log(9))
    assert pt.distortion == pytest.approx(0.1, abs=1e-6)
    with pytest.raises(ConfigError):
        blahut_arimoto([0.5, 0.5], HAMMING)
    with pytest.raises(ConfigError):
        blahut_arimoto([0.5, 0.5], -HAMMING, 0.1)


def test_ba_monotone_along_sweep():
    rng = np.random.default_rng(1)
    p = rng.random(4)
    p /= p.sum()
    d = rng.random((4, 5))
    lo, hi = float(p @ d.min(axis=1)), float((p @ d).min())
    rates = [blahut_arimoto(p, d, D).rate for D in np.linspace(lo, hi, 12)]
    assert all(b <= a + 1e-7 for a, b in zip(rates, rates[1:]))


def test_ba_meets_target_with_erasure_symbol():
    p = np.array([0.5, 0.5])
    d = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.5]])
    pt = blahut_arimoto(p, d, 0.3)
    assert pt.distortion == pytest.approx(0.3, abs=1e-6)


def _shift(n):
    return make_shift_system(discrete_base(2), 0, n)


def test_block_rd_n1_equals_single_letter():
    mu = ProductMeasure(bernoulli_atoms(0.3), 0)
    block = block_rate_distortion(mu, _shift(1), 1, [0.1]).points[0].rate
    assert block == pytest.approx(blahut_arimoto([0.7, 0.3], HAMMING, 0.1).rate, abs=1e-9)


def test_block_rd_memoryless_source():
    curve = block_rate_distortion(ProductMeasure(bernoulli_atoms(0.5), 0), _shift(4), 4,
                                  [0.1, 1.0])
    rates = {pt.eps: pt.rate for pt in curve}
    assert abs(rates[0.1] - 0.368064) < 0.02
    assert rates[1.0] == pytest.approx(0.0, abs=1e-12)
    assert all(pt.grid_mesh == 0.0 for pt in curve)


def test_rd_curve_roundtrip(tmp_path):
    curve = block_rate_distortion(ProductMeasure(bernoulli_atoms(0.5), 0), _shift(2), 2,
                                  [0.2, 0.1])
    curve.to_csv(tmp_path / "rd.csv")
    back = RDCurve.read_csv(tmp_path / "rd.csv")
    assert [(p.n, p.eps, p.rate, p.distortion) for p in back] == \
        [(p.n, p.eps, p.rate, p.distortion) for p in curve]


def _blocks(n, p=0.5):
    mu = make_product_measure(bernoulli_atoms(p), n - 1, 0)
    return FiniteMeasure(mu.points, mu.weights)


def _exhaustive(blocks, size):
    x, w = blocks.points, blocks.weights
    n = x.shape[1]
    cands = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
    best = math.inf
    for code in itertools.combinations(range(len(cands)), size):
        d = (x[:, None, :] != cands[list(code)][None, :, :]).mean(axis=2).min(axis=1)
        best = min(best, float(w @ d))
    return best


def test_lloyd_examples():
    one = lloyd_codebook(_blocks(1), 0.0)
    assert one.distortion == pytest.approx(0.5)
    full = lloyd_codebook(_blocks(2), math.log(4) / 2)
    assert full.distortion == 0.0
    b3 = _blocks(3)
    pt = lloyd_codebook(b3, math.log(2) / 3, restarts=16)
    assert pt.distortion == pytest.approx(_exhaustive(b3, 2))


def test_lloyd_upper_bounds_exhaustive_and_is_monotone():
    rng = np.random.default_rng(4)
    for trial in range(20):
        n = int(rng.integers(1, 4))
        p = float(rng.uniform(0.1, 0.9))
        blocks = _blocks(n, p)
        size = int(rng.integers(1, 4))
        if size >= len(blocks):
            continue
        pt = lloyd_codebook(blocks, math.log(size) / n + 1e-12, seed=trial, restarts=3)
        h = pt.meta["history"]
        assert all(b <= a + 1e-15 for a, b in zip(h, h[1:]))
        assert pt.distortion >= _exhaustive(blocks, size) - 1e-12


def _circle_measure(seed, m=12):
    rng = np.random.default_rng(seed)
    return FiniteMeasure.uniform(np.sort(rng.random(m)))


def test_orbit_code_fixed_point_on_orbit_coded_input():
    sys = doubling_map()
    mu = _circle_measure(0)
    z = orbit_code(sys, mu, random_approximation(sys, mu, 4, 3, seed=0))
    again = orbit_code(sys, mu, z)
    np.testing.assert_array_equal(again.reps, z.reps)
    assert again.distortion(sys, mu) == z.distortion(sys, mu)


def test_orbit_code_picks_argmin_atom():
    sys = doubling_map()
    mu = FiniteMeasure(np.array([0.1, 0.3]), np.array([0.5, 0.5]))
    rep = np.array([0.29, 0.6])  # close to the orbit of 0.3 = (0.3, 0.6)
    out = orbit_code(sys, mu, ApproximationMap([np.array([0, 1])], rep[None], 2))
    np.testing.assert_allclose(out.reps[0], [0.3, 0.6])


def test_orbit_code_precondition_and_bound():
    sys = doubling_map()
    for seed in range(30):
        mu = _circle_measure(seed)
        z = random_approximation(sys, mu, 5, 4, seed=seed, jitter=0.1)
        eps = z.distortion(sys, mu)
        with pytest.raises(ConfigError):
            orbit_code(sys, mu, z, eps=eps / 2)
        out = orbit_code(sys, mu, z, eps=eps)
        assert all(np.array_equal(a, b) for a, b in zip(z.cells, out.cells))
        assert out.distortion(sys, mu) <= 2 * eps + 1e-12


def test_approximation_map_partition_checks():
    with pytest.raises(ConfigError):
        ApproximationMap([np.array([0])], np.zeros((2, 3)), 3)
    z = ApproximationMap([np.array([0]), np.array([0])], np.zeros((2, 3)), 3)
    with pytest.raises(ConfigError):
        z.check_partition(2)


def test_sandwich_examples():
    sys = _shift(8)
    rep = sandwich_check(sys, ProductMeasure(bernoulli_atoms(0.5), 0), 0.1, 2, range(1, 9))
    assert rep.lower_margin >= -0.05 and rep.upper_margin >= -0.05 and not rep.flagged
    point = FiniteMeasure.point_mass(np.zeros(9))
    rep = sandwich_check(sys, point, 0.1, 2, range(1, 9))
    assert rep.lower == rep.rate == rep.upper == 0.0
    big = sandwich_check(sys, ProductMeasure(bernoulli_atoms(0.5), 0), 1.0, 2, range(1, 5))
    assert big.rate == 0.0 and big.lower == pytest.approx(0.0, abs=1e-12)
