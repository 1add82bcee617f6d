import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdimkit.dynsys import (FiniteMeasure, ProductMeasure, TOL, average_distance,
                            bernoulli_atoms, bowen_distance, cantor_points, circle_metric,
                            discrete_base, doubling_map, finite_base, identity_map, interval_base,
                            interval_grid, make_product_measure, make_shift_system,
                            one_point_base, orbit, parse_system_config, point_system,
                            product_system, rotation, sample_space, tent_map, trajectories)
from mdimkit.errors import BudgetExceeded, ConfigError, PrecisionRefusal


def test_doubling_orbit():
    np.testing.assert_allclose(orbit(doubling_map(), 0.1, 3), [0.1, 0.2, 0.4])


@pytest.mark.parametrize("sys", [doubling_map(), tent_map(), rotation(0.3)])
def test_orbit_of_length_one_is_the_point(sys):
    np.testing.assert_array_equal(orbit(sys, 0.37, 1), [0.37])


def test_shift_orbit_moves_symbol_left():
    sys = make_shift_system(discrete_base(2), 1, 2)
    x = np.zeros(sys.window_length())
    x[1] = 1.0  # coordinate 0 (window starts at index -1)
    o = orbit(sys, x, 2)
    np.testing.assert_array_equal(o[0], x)
    assert o[1][0] == 1.0 and o[1].sum() == 1.0  # the 1 now sits at index -1


def test_bowen_and_average_on_doubling_example():
    sys = doubling_map()
    assert bowen_distance(sys, 0.1, 0.12, 3) == pytest.approx(0.08)
    assert average_distance(sys, 0.1, 0.12, 3) == pytest.approx(0.14 / 3)
    assert bowen_distance(sys, 0.1, 0.12, 1) == pytest.approx(0.02)
    assert average_distance(sys, 0.3, 0.3, 5) == 0.0


def test_circle_metric_wraps():
    assert circle_metric(0.05, 0.95) == pytest.approx(0.1)
    assert circle_metric(0.0, 0.5) == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(0, 1, exclude_max=True), st.integers(1, 12))
def test_metric_chain_and_triangle(x, y, z, n):
    sys = doubling_map()
    assert average_distance(sys, x, y, n) <= bowen_distance(sys, x, y, n) + 1e-15
    assert bowen_distance(sys, x, y, n) <= bowen_distance(sys, x, y, n + 1) + 1e-15
    for dist in (bowen_distance, average_distance):
        assert dist(sys, x, z, n) <= dist(sys, x, y, n) + dist(sys, y, z, n) + 1e-12


def test_interval_sample_is_stratified_and_deterministic():
    s = sample_space(identity_map(), 5, seed=0)
    assert np.array_equal(np.floor(s / 0.2), np.arange(5))
    np.testing.assert_array_equal(s, sample_space(identity_map(), 5, seed=0))
    with pytest.raises(ConfigError):
        sample_space(identity_map(), 0)


def test_shift_sample_distinct_windows():
    sys = make_shift_system(discrete_base(2), 3, 4)
    s = sample_space(sys, 8, seed=1)
    assert s.shape == (8, 11)
    assert len({row.tobytes() for row in s}) == 8


def test_one_point_base_gives_zero_distances():
    sys = make_shift_system(one_point_base(), 2, 3)
    x = np.zeros(sys.window_length())
    assert bowen_distance(sys, x, x, 3) == 0.0
    assert sys.diameter == 0.0


def test_discrete_shift_zero_coordinate_dominates():
    sys = make_shift_system(discrete_base(2), 4, 2)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.integers(0, 2, sys.window_length()).astype(float)
        y = x.copy()
        y[4] = 1 - y[4]  # coordinate 0 sits at offset l
        assert bowen_distance(sys, x, y, 1) >= 1.0


def test_discrete_shift_l0_detects_differences_exactly():
    sys = make_shift_system(discrete_base(2), 0, 6)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = rng.integers(0, 2, 7).astype(float)
        y = rng.integers(0, 2, 7).astype(float)
        n = int(rng.integers(1, 7))
        differs = bool(np.any(x[:n] != y[:n]))
        assert (bowen_distance(sys, x, y, n) >= 1) == differs


def test_truncation_bound_and_refusal():
    sys = make_shift_system(interval_base(), 4, 2)
    assert sys.truncation_bound == pytest.approx(0.25)
    x = np.zeros(sys.window_length())
    with pytest.raises(PrecisionRefusal):
        bowen_distance(sys, x, x, 1, precision=0.1)
    assert bowen_distance(sys, x, x, 1, precision=0.5) == 0.0


def test_shift_rejects_unknown_diameter():
    from mdimkit.dynsys import BaseSpace
    base = BaseSpace("R", lambda a, b: np.abs(a - b), math.inf)
    with pytest.raises(ConfigError):
        make_shift_system(base, 0, 1)


def test_product_measure_examples():
    mu = make_product_measure((interval_grid(2), np.full(2, 0.5)), 2, 0)
    assert len(mu) == 8 and np.allclose(mu.weights, 1 / 8)
    single = make_product_measure([(0.3, 1.0)], 3, 1)
    assert len(single) == 1 and single.weights[0] == 1.0
    skew = make_product_measure([(0.25, 0.25), (0.75, 0.75)], 1, 0)
    i = int(np.flatnonzero((skew.points == 0.25).all(axis=1))[0])
    assert skew.weights[i] == pytest.approx(0.0625)
    with pytest.raises(BudgetExceeded):
        make_product_measure(bernoulli_atoms(0.5), 30, 0, budget=1000)


def test_product_measure_family_caches():
    fam = ProductMeasure(bernoulli_atoms(0.3), 0)
    assert fam.at(3) is fam.at(3)
    assert len(fam.at(3)) == 16


def test_finite_measure_validation():
    with pytest.raises(ConfigError):
        FiniteMeasure(np.array([0.1, 0.1]), np.array([0.5, 0.5]))
    with pytest.raises(ConfigError):
        FiniteMeasure(np.array([0.1, 0.2]), np.array([0.5, 0.6]))
    assert len(FiniteMeasure.uniform([0.1, 0.2, 0.3])) == 3


def test_bases_and_products():
    assert np.allclose(interval_grid(2), [0.25, 0.75])
    c = cantor_points(3)
    assert c.size == 8 and c.min() == 0.0
    sys = product_system(doubling_map(), rotation(0.5))
    o = orbit(sys, np.array([0.1, 0.2]), 2)
    np.testing.assert_allclose(o[1], [0.2, 0.7])
    assert point_system().diameter == 0.0
    fb = finite_base([0.0, 0.5])
    assert fb.diameter == pytest.approx(0.5)


def test_trajectories_shape_for_shift():
    sys = make_shift_system(discrete_base(2), 1, 3)
    pts = np.zeros((4, sys.window_length()))
    assert trajectories(sys, pts, 3).shape[0] == 4


def test_parse_system_config():
    sys, params = parse_system_config("system = shift\nbase = discrete:3\nwindow_radius = 2\n"
                                      "horizon = 4\nseed = 7\nextra = x\n")
    assert sys.is_shift and sys.window_radius == 2
    assert params == {"seed": 7, "extra": "x"}
    sys, _ = parse_system_config("system = rotation\nalpha = 0.25")
    assert sys.map(0.5) == pytest.approx(0.75)
    with pytest.raises(ConfigError):
        parse_system_config("system = lorenz")
