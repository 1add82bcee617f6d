"""Growth rates, entropies, metric mean dimension and box dimension from counts.

All limits are replaced by least-squares fits over finite windows.  With
``mode="upper"`` the report keeps the largest slope over the trailing
windows (suffixes of the abscissa of length >= ``min_window``), a proxy for
a limsup; ``mode="lower"`` keeps the smallest.  ``min_window=None`` fits the
whole range once.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .covercount import (BOWEN, BallKind, CountCurve, CountEntry, greedy_measure_cover,
                         greedy_separated)
from .dynsys import DynSystem, FiniteMeasure, ProductMeasure, identity_map
from .errors import ConfigError


@dataclass(frozen=True)
class EstimateReport:
    slope: float
    intercept: float
    rms_residual: float
    window: tuple[float, float]
    mode: str = "upper"
    quantity: str = ""
    inputs_digest: str = ""

    def __post_init__(self):
        if not self.window[0] <= self.window[1]:
            raise ConfigError("empty regression window")
        if self.rms_residual < 0:
            raise ConfigError("negative residual")

    def to_dict(self) -> dict:
        return {"quantity": self.quantity, "slope": self.slope, "intercept": self.intercept,
                "residual": self.rms_residual, "window": list(self.window), "mode": self.mode,
                "inputs_digest": self.inputs_digest}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> EstimateReport:
        return cls(float(d["slope"]), float(d["intercept"]), float(d["residual"]),
                   tuple(float(v) for v in d["window"]), d["mode"], d.get("quantity", ""),
                   d.get("inputs_digest", ""))

    @classmethod
    def from_json(cls, path) -> EstimateReport:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class EpsLadder:
    """Radii ``eps0 * ratio**i`` for ``i < steps``."""

    eps0: float
    ratio: float
    steps: int

    def __post_init__(self):
        if not self.eps0 > 0 or not 0 < self.ratio < 1 or self.steps < 1:
            raise ConfigError("ladder needs eps0 > 0, 0 < ratio < 1, steps >= 1")

    @property
    def radii(self) -> np.ndarray:
        return self.eps0 * self.ratio ** np.arange(self.steps)


def _radii(ladder) -> np.ndarray:
    r = ladder.radii if isinstance(ladder, EpsLadder) else np.asarray(ladder, dtype=float)
    if r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise ConfigError("radii must be positive and strictly decreasing")
    return r


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ----------------------------------------------------------------- fitting


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    if np.ptp(x) == 0:
        raise ConfigError("regression abscissa is constant")
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), rms


def windowed_fit(x, y, mode: str = "upper", min_window: int | None = 3,
                 quantity: str = "") -> EstimateReport:
    """Slope of ``y`` against ``x`` over trailing windows of the sorted abscissa."""
    if mode not in ("upper", "lower"):
        raise ConfigError(f"mode must be 'upper' or 'lower', got {mode!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    if x.size < 3:
        raise ConfigError("need at least 3 distinct abscissae")
    w_min = x.size if min_window is None else max(3, min(min_window, x.size))
    fits = []
    for w in range(w_min, x.size + 1):
        xs, ys = x[-w:], y[-w:]
        fits.append((*_ols(xs, ys), (float(xs[0]), float(xs[-1]))))
    pick = max if mode == "upper" else min
    slope, intercept, rms, window = pick(fits, key=lambda f: f[0])
    return EstimateReport(slope, intercept, rms, window, mode, quantity,
                          digest({"x": x.tolist(), "y": y.tolist(), "mode": mode,
                                  "min_window": min_window}))


def _series(curve) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(curve, CountCurve):
        ns, counts = curve.series()
    else:
        pairs = list(curve)
        ns = np.array([p[0] for p in pairs], dtype=float)
        counts = np.array([p[1] for p in pairs], dtype=float)
    table: dict[float, float] = {}
    for n, c in zip(ns, counts):
        if n in table and table[n] != c:
            raise ConfigError(f"conflicting counts at n={n}")
        table[n] = c
    if len(table) < 3:
        raise ConfigError("growth rate needs at least 3 distinct n values")
    ns = np.array(sorted(table))
    counts = np.array([table[n] for n in ns])
    if np.any(counts < 1):
        raise ConfigError("counts must be >= 1")
    return ns, counts


def growth_rate(curve, mode: str = "upper", min_window: int | None = 3,
                quantity: str = "growth") -> EstimateReport:
    """Exponential growth rate of counts in ``n``: slope of ``log N(n)``.

    ``curve`` is a single-eps :class:`CountCurve` or an iterable of
    ``(n, count)`` pairs; repeated identical rows are ignored.
    """
    ns, counts = _series(curve)
    return windowed_fit(ns, np.log(counts), mode, min_window, quantity)


# ------------------------------------------------------------ entropy tables


@dataclass
class EntropyTable:
    """One growth estimate per radius plus the counts behind them."""

    rows: list[tuple[float, EstimateReport]]
    curve: CountCurve = field(default_factory=CountCurve)
    quantity: str = "S"

    def scaled(self, c: float) -> EntropyTable:
        rows = [(e, EstimateReport(r.slope * c, r.intercept * c, r.rms_residual * abs(c),
                                   r.window, r.mode, r.quantity)) for e, r in self.rows]
        return EntropyTable(rows, self.curve, self.quantity)

    def values(self) -> tuple[np.ndarray, np.ndarray]:
        eps = np.array([e for e, _ in self.rows])
        s = np.array([r.slope for _, r in self.rows])
        return eps, s


def _measure_at(source, n: int) -> FiniteMeasure:
    if isinstance(source, FiniteMeasure):
        return source
    if isinstance(source, ProductMeasure):
        return source.at(n)
    raise ConfigError(f"not a measure source: {type(source).__name__}")


def cover_counts(sys: DynSystem, source, eps: float, delta: float, n_range: Iterable[int],
                 ball: BallKind | str = BOWEN, **kw) -> CountCurve:
    """Greedy measure-cover counts for each ``n`` at one radius."""
    ball = BallKind.parse(ball)
    curve = CountCurve()
    for n in n_range:
        res = greedy_measure_cover(_measure_at(source, n), sys, n, eps, delta, ball, **kw)
        curve.add(CountEntry(n, float(eps), res.count, "greedy", ball, float(delta),
                             res.covered_mass))
    return curve


def separated_counts(sys: DynSystem, sample, eps: float, n_range: Iterable[int], **kw) -> CountCurve:
    curve = CountCurve()
    for n in n_range:
        count, _ = greedy_separated(sample, sys, n, eps, **kw)
        curve.add(CountEntry(n, float(eps), count, "greedy", BOWEN, None, None))
    return curve


def entropy_curve(sys: DynSystem, source, ladder, n_range: Sequence[int],
                  ball: BallKind | str = BOWEN, delta: float | None = None,
                  mode: str = "upper", min_window: int | None = 3, cache=None,
                  **kw) -> EntropyTable:
    """Growth estimate at each ladder radius.

    ``source`` is a point sample (separated-set counting, ``S(eps)``) or a
    measure (cover counting, ``h_mu(eps, T, delta)``, ``delta`` required).
    ``cache`` names a CSV file that receives the raw counts.
    """
    radii = _radii(ladder)
    n_range = list(n_range)
    if sys.is_shift and np.any(radii <= sys.truncation_bound) and kw.get("certify"):
        raise ConfigError("ladder radii must exceed the shift truncation bound")
    measure = isinstance(source, (FiniteMeasure, ProductMeasure))
    if measure and delta is None:
        raise ConfigError("measure covers need delta")
    table = EntropyTable([], CountCurve(), "h_mu" if measure else "S")
    for eps in radii:
        if measure:
            c = cover_counts(sys, source, eps, delta, n_range, ball, **kw)
        else:
            c = separated_counts(sys, source, eps, n_range, **kw)
        table.curve.extend(c)
        table.rows.append((float(eps), growth_rate(c, mode, min_window, table.quantity)))
    if cache is not None:
        table.curve.to_csv(cache)
    return table


def mdim_estimate(table, mode: str = "upper", min_window: int | None = 3) -> EstimateReport:
    """Slope of the entropy ``S(eps)`` against ``|log eps|``.

    ``table`` is an :class:`EntropyTable` or pairs ``(eps, S)`` where ``S``
    is a number or an :class:`EstimateReport`.
    """
    rows = table.rows if isinstance(table, EntropyTable) else list(table)
    if len(rows) < 3:
        raise ConfigError("mdim estimate needs at least 3 radii")
    eps = np.array([e for e, _ in rows], dtype=float)
    s = np.array([v.slope if isinstance(v, EstimateReport) else v for _, v in rows], dtype=float)
    return windowed_fit(np.abs(np.log(eps)), s, mode, min_window, "mdim")


def katok_entropy(sys: DynSystem, mu, eps: float, delta: float, n_range: Sequence[int],
                  ball: BallKind | str = BOWEN, min_window: int | None = None,
                  mode: str = "upper", **kw) -> EstimateReport:
    """Growth rate of ``N_mu(n, eps, delta)`` at fixed ``(eps, delta)``.

    This approximates ``h_mu(T)`` only as ``eps -> 0``.  The default fits the
    whole ``n`` range at once: shorter windows carry the upward
    finite-``n`` bias of the typical-set correction.
    """
    curve = cover_counts(sys, mu, eps, delta, n_range, ball, **kw)
    return growth_rate(curve, mode, min_window, "h_mu")


# ------------------------------------------------------------ box dimension


def box_counts(sample, radii, sys: DynSystem | None = None) -> np.ndarray:
    """Maximal (greedy) ``eps``-separated cardinalities of a point set."""
    sys = sys or identity_map()
    return np.array([greedy_separated(sample, sys, 1, float(e))[0] for e in radii])


def box_dimension(sample, ladder, sys: DynSystem | None = None, mode: str = "upper",
                  min_window: int | None = 3) -> EstimateReport:
    """Slope of ``log N(eps)`` against ``|log eps|``, ``N`` the separated count.

    ``sys`` only supplies the metric (the identity on ``[0,1]`` by default).
    """
    radii = _radii(ladder)
    counts = box_counts(sample, radii, sys)
    return windowed_fit(np.abs(np.log(radii)), np.log(counts), mode, min_window, "box_dim")


# ---------------------------------------------------------- measure mdim


@dataclass
class MeasureMdimReport:
    """Per-delta mdim estimates and the two limit orderings."""

    deltas: list[float]
    per_delta: list[EstimateReport]
    tables: list[EntropyTable]
    limit_outside: float
    sup_inside: EstimateReport

    def to_dict(self) -> dict:
        return {"deltas": self.deltas,
                "per_delta": [r.to_dict() for r in self.per_delta],
                "limit_outside": self.limit_outside,
                "sup_inside": self.sup_inside.to_dict()}


def measure_mdim(sys: DynSystem, measures, ladder, deltas: Sequence[float],
                 n_range: Sequence[int], ball: BallKind | str = BOWEN,
                 mode: str = "upper", min_window: int | None = 3,
                 growth_window: int | None = None, **kw) -> MeasureMdimReport:
    """Metric mean dimension of a measure (or the sup over a family).

    ``measures`` is one measure source, or a callable ``eps -> list`` of
    sources; at each radius the largest entropy estimate is kept.  Per-delta
    estimates are always reported; ``limit_outside`` is the value at the
    smallest delta and ``sup_inside`` takes the sup over delta before the
    eps-fit.
    """
    radii = _radii(ladder)
    deltas = sorted(float(d) for d in deltas)
    family: Callable = measures if callable(measures) else (lambda eps: [measures])
    hs = np.zeros((len(deltas), radii.size))
    tables = []
    for i, delta in enumerate(deltas):
        rows = []
        curve = CountCurve()
        for j, eps in enumerate(radii):
            best = None
            for src in family(float(eps)):
                c = cover_counts(sys, src, eps, delta, n_range, ball, **kw)
                rep = growth_rate(c, "upper", growth_window, "h_mu")
                if best is None or rep.slope > best[0].slope:
                    best = (rep, c)
            rows.append((float(eps), best[0]))
            for e in best[1]:
                if not any((x.n, x.eps, x.delta) == (e.n, e.eps, e.delta) for x in curve):
                    curve.add(e)
            hs[i, j] = best[0].slope
        tables.append(EntropyTable(rows, curve, "h_mu"))
    per_delta = [mdim_estimate(t, mode, min_window) for t in tables]
    sup_inside = mdim_estimate(list(zip(radii.tolist(), hs.max(axis=0).tolist())), mode, min_window)
    return MeasureMdimReport(deltas, per_delta, tables, per_delta[0].slope, sup_inside)


def ladder_ratio(entropy: float, eps: float) -> float:
    """``S(eps) / |log eps|``, the quantity whose limsup is the mdim."""
    return entropy / abs(math.log(eps))
