import json
import math

import numpy as np
import pytest

from mdimkit.covercount import CountCurve
from mdimkit.dynsys import (FiniteMeasure, ProductMeasure, bernoulli_atoms, cantor_points,
                            discrete_base, doubling_map, interval_grid, make_shift_system,
                            point_system, sample_space)
from mdimkit.errors import ConfigError
from mdimkit.estimators import (EntropyTable, EpsLadder, EstimateReport, box_dimension,
                                cover_counts, entropy_curve, growth_rate, katok_entropy, mdim_estimate,
                                measure_mdim)


def test_growth_exact_powers():
    r = growth_rate([(n, 2 ** n) for n in range(1, 7)])
    assert r.slope == pytest.approx(math.log(2)) and r.rms_residual < 1e-12
    assert growth_rate([(n, 5) for n in range(1, 6)]).slope == pytest.approx(0.0)


def test_growth_floored_sequence():
    pairs = [(n, math.floor(0.9 * 2 ** n) + 1) for n in range(2, 9)]
    assert abs(growth_rate(pairs).slope - math.log(2)) < 0.02


def test_growth_rejects_single_n_and_conflicts():
    with pytest.raises(ConfigError):
        growth_rate([(3, 8), (3, 8)])
    with pytest.raises(ConfigError):
        growth_rate([(1, 2), (2, 4), (2, 5), (3, 8)])


def test_growth_invariant_under_duplicate_rows():
    pairs = [(1, 2), (2, 5), (3, 9), (4, 20)]
    assert growth_rate(pairs).slope == growth_rate(pairs + [(2, 5)]).slope


def test_upper_and_lower_modes_bracket():
    pairs = [(1, 2), (2, 3), (3, 7), (4, 9), (5, 30), (6, 40)]
    up, lo = growth_rate(pairs, "upper"), growth_rate(pairs, "lower")
    assert lo.slope <= growth_rate(pairs, min_window=None).slope <= up.slope


def test_ladder():
    lad = EpsLadder(0.5, 0.5, 4)
    np.testing.assert_allclose(lad.radii, [0.5, 0.25, 0.125, 0.0625])
    with pytest.raises(ConfigError):
        EpsLadder(0.5, 1.5, 3)


def test_report_json_roundtrip(tmp_path):
    r = EstimateReport(1.25, -0.5, 0.01, (1.0, 4.0), "upper", "S", "abc")
    path = tmp_path / "r.json"
    r.to_json(path)
    assert EstimateReport.from_json(path) == r
    assert set(json.loads(path.read_text())) == {"quantity", "slope", "intercept", "residual",
                                                 "window", "mode", "inputs_digest"}


def test_mdim_synthetic():
    eps = [2.0 ** -k for k in range(1, 7)]
    assert mdim_estimate([(e, abs(math.log(e))) for e in eps]).slope == pytest.approx(1.0)
    assert mdim_estimate([(e, 0.7) for e in eps]).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        mdim_estimate([(0.1, 1.0), (0.01, 2.0)])


def test_mdim_scales_linearly():
    eps = [2.0 ** -k for k in range(1, 7)]
    rows = [(e, EstimateReport(abs(math.log(e)) ** 0.8, 0, 0, (1, 2))) for e in eps]
    t = EntropyTable(rows)
    assert mdim_estimate(t.scaled(2.5)).slope == pytest.approx(2.5 * mdim_estimate(t).slope)


def test_entropy_curve_bernoulli_covers(tmp_path):
    sys = make_shift_system(discrete_base(2), 0, 10)
    mu = ProductMeasure(bernoulli_atoms(0.5), 0)
    table = entropy_curve(sys, mu, [0.4], range(1, 11), delta=0.1, min_window=None,
                          cache=tmp_path / "c.csv")
    counts = [e.count for e in table.curve]
    assert counts == [math.floor(0.9 * 2 ** n) + 1 for n in range(1, 11)]
    assert abs(table.rows[0][1].slope / math.log(2) - 1) < 0.05
    assert len(CountCurve.read_csv(tmp_path / "c.csv")) == 10


def test_entropy_curve_point_system_zero():
    sys = point_system()
    table = entropy_curve(sys, np.zeros(3), EpsLadder(0.5, 0.5, 3), range(1, 5))
    assert all(r.slope == 0 for _, r in table.rows)


def test_entropy_curve_doubling_separated():
    sys = doubling_map()
    # jittered, not dyadic: dyadic points collapse onto 0 under doubling
    sample = sample_space(sys, 2 ** 17, seed=0)
    table = entropy_curve(sys, sample, [0.01], range(2, 9), min_window=None)
    assert abs(table.rows[0][1].slope / math.log(2) - 1) < 0.10


def test_entropy_curve_needs_delta_for_measures():
    with pytest.raises(ConfigError):
        entropy_curve(doubling_map(), FiniteMeasure.point_mass(0.0), [0.1, 0.05], range(1, 4))


def test_katok_examples():
    sys = make_shift_system(discrete_base(2), 0, 12)
    est = katok_entropy(sys, ProductMeasure(bernoulli_atoms(0.5), 0), 0.4, 0.1, range(1, 11))
    assert abs(est.slope / math.log(2) - 1) < 0.05
    h = -0.2 * math.log(0.2) - 0.8 * math.log(0.8)
    est = katok_entropy(sys, ProductMeasure(bernoulli_atoms(0.2), 0), 0.4, 0.1, range(1, 13))
    assert abs(est.slope / h - 1) < 0.15
    fixed = katok_entropy(doubling_map(), FiniteMeasure.point_mass(0.0), 0.1, 0.1, range(1, 6))
    assert fixed.slope == 0.0


def test_measure_covers_not_above_separated_counts():
    sys = doubling_map()
    pts = (np.arange(200) + 0.5) / 200
    covers = cover_counts(sys, FiniteMeasure.uniform(pts), 0.05, 0.2, range(1, 6))
    separated = entropy_curve(sys, pts, [0.05], range(1, 6), min_window=None).curve
    for c, s in zip(covers, separated):
        assert c.n == s.n and c.count <= s.count


def test_box_dimension_examples():
    assert abs(box_dimension(interval_grid(2 ** 14), 2.0 ** -np.arange(2, 11)).slope - 1) < 0.05
    cantor = box_dimension(cantor_points(10), 3.0 ** -np.arange(2, 9))
    assert abs(cantor.slope - math.log(2) / math.log(3)) < 0.05
    finite = box_dimension(np.array([0.0, 0.5, 1.0]), [0.3, 0.2, 0.1, 0.05])
    assert finite.slope == pytest.approx(0.0, abs=1e-12)


def test_measure_mdim_point_mass_and_grid_family():
    sys = make_shift_system(discrete_base(2), 0, 6)
    rep = measure_mdim(sys, FiniteMeasure.point_mass(np.zeros(7)), [0.5, 0.3, 0.2],
                       [0.1, 0.2], range(1, 5))
    assert all(abs(r.slope) < 1e-12 for r in rep.per_delta)


def test_measure_mdim_grid_family_reaches_high_ratio():
    from mdimkit.dynsys import interval_base

    def family(eps):
        k = int(1 / (3 * eps))
        return [ProductMeasure((interval_grid(k), np.full(k, 1 / k)), 0, budget=200_000)]

    sys = make_shift_system(interval_base(), 0, 4)
    radii = [1 / 6, 1 / 12, 1 / 24]
    rep = measure_mdim(sys, family, radii, [0.1], range(1, 5), growth_window=None)
    assert rep.per_delta[0].slope >= 0.8
    assert rep.sup_inside.slope >= 0.8
    assert rep.limit_outside == rep.per_delta[0].slope
