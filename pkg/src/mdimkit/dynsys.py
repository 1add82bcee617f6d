"""Dynamical systems, their base metrics, and the Bowen / average dynamical metrics.

Points are numpy values.  Interval and circle systems use scalars, product
systems use 1-d coordinate vectors, and shift systems use finite windows: a
1-d array holding coordinates ``x_{-l}, ..., x_{n+l}`` (two-sided) or
``x_0, ..., x_{n+l}`` (one-sided).  The shift metric is the weighted product
metric truncated to ``|j| <= l``; the neglected tail is reported as
``DynSystem.truncation_bound``.
"""

from __future__ import annotations

import configparser
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BudgetExceeded, ConfigError, PrecisionRefusal

TOL = 1e-12

SPACE_KINDS = ("interval", "circle", "shift", "product")


# ---------------------------------------------------------------- base spaces


@dataclass(frozen=True, eq=False)
class BaseSpace:
    """Metric space used as the alphabet of a shift or as a compact set Y."""

    name: str
    metric: Callable[[np.ndarray, np.ndarray], np.ndarray]
    diameter: float
    support: np.ndarray | None = None


def _abs_metric(a, b):
    return np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def _discrete_metric(a, b):
    return (np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) > TOL).astype(float)


def circle_metric(a, b):
    r = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    return np.minimum(r, 1.0 - r)


def discrete_base(k: int = 2) -> BaseSpace:
    """Symbols ``0, ..., k-1`` with the discrete (0/1) metric."""
    if k < 1:
        raise ConfigError("alphabet size must be >= 1")
    return BaseSpace(f"discrete:{k}", _discrete_metric, 1.0 if k > 1 else 0.0,
                     np.arange(k, dtype=float))


def interval_base() -> BaseSpace:
    return BaseSpace("interval", _abs_metric, 1.0, None)


def finite_base(points: Sequence[float], name: str = "points") -> BaseSpace:
    pts = np.unique(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ConfigError("finite base needs at least one point")
    return BaseSpace(name, _abs_metric, float(pts[-1] - pts[0]), pts)


def one_point_base() -> BaseSpace:
    return finite_base([0.0], name="point")


def interval_grid(m: int) -> np.ndarray:
    """``m`` equally spaced points ``(2i-1)/(2m)``, the midpoints of ``[0,1]/m``."""
    return (2.0 * np.arange(1, m + 1) - 1.0) / (2.0 * m)


def cantor_points(depth: int) -> np.ndarray:
    """Left endpoints of the ``2**depth`` middle-thirds intervals at ``depth``."""
    pts = np.zeros(1)
    for j in range(1, depth + 1):
        pts = np.concatenate([pts, pts + 2.0 * 3.0 ** (-j)])
    return np.sort(pts)


# ------------------------------------------------------------------ systems


@dataclass(frozen=True, eq=False)
class DynSystem:
    """A compact metric space with a forward map.

    ``metric`` and ``map`` are vectorised over leading axes.  For shift
    systems ``metric`` is the truncated weighted product metric on windows
    and ``diameter`` is the diameter of that truncated metric.
    """

    name: str
    space_kind: str
    metric: Callable[[np.ndarray, np.ndarray], np.ndarray]
    map: Callable[[np.ndarray], np.ndarray]
    diameter: float
    window_radius: int = 0
    horizon: int | None = None
    truncation_bound: float = 0.0
    base: BaseSpace | None = None
    two_sided: bool = True
    fill_value: float = 0.0
    factors: tuple = ()
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.space_kind not in SPACE_KINDS:
            raise ConfigError(f"unknown space kind {self.space_kind!r}")
        if not math.isfinite(self.diameter) or self.diameter < 0:
            raise ConfigError("diameter must be finite and >= 0")

    @property
    def is_shift(self) -> bool:
        return self.space_kind == "shift"

    @property
    def weights(self) -> np.ndarray:
        """Coordinate weights of the truncated shift metric, left to right."""
        l = self.window_radius
        if self.two_sided:
            return 2.0 ** -np.abs(np.arange(-l, l + 1))
        return 2.0 ** -np.arange(l + 1)

    def window_length(self, n: int | None = None) -> int:
        n = self.horizon if n is None else n
        if n is None:
            raise ConfigError("shift system has no horizon")
        return n + (2 if self.two_sided else 1) * self.window_radius + 1

    def points_array(self, points) -> np.ndarray:
        """Coerce a point or list of points to a batch array."""
        arr = np.asarray(points, dtype=float)
        ndim = 0 if self.space_kind in ("interval", "circle") else 1
        if arr.ndim == ndim:
            arr = arr[None, ...]
        if arr.ndim != ndim + 1:
            raise ConfigError(f"expected points of ndim {ndim}, got shape {arr.shape}")
        return arr


def doubling_map() -> DynSystem:
    return DynSystem("doubling", "circle", circle_metric,
                     lambda x: (2.0 * np.asarray(x, dtype=float)) % 1.0, 0.5)


def tent_map() -> DynSystem:
    def f(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - np.abs(1.0 - 2.0 * x)
    return DynSystem("tent", "interval", _abs_metric, f, 1.0)


def rotation(alpha: float) -> DynSystem:
    return DynSystem(f"rotation:{alpha!r}", "circle", circle_metric,
                     lambda x: (np.asarray(x, dtype=float) + alpha) % 1.0, 0.5,
                     params={"alpha": alpha})


def identity_map() -> DynSystem:
    return DynSystem("identity", "interval", _abs_metric,
                     lambda x: np.array(x, dtype=float, copy=True), 1.0)


def point_system() -> DynSystem:
    """The one-point space ``{0}``."""
    return DynSystem("point", "interval", _abs_metric,
                     lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0)


def interval_system(name: str, f: Callable[[np.ndarray], np.ndarray], params=None) -> DynSystem:
    """Wrap a map of ``[0,1]`` with the standard metric ``|x-y|``."""
    return DynSystem(name, "interval", _abs_metric, f, 1.0, params=params or {})


def product_system(*systems: DynSystem) -> DynSystem:
    """Coordinatewise product of interval/circle systems under the max metric."""
    if not systems or any(s.space_kind not in ("interval", "circle") for s in systems):
        raise ConfigError("product factors must be interval or circle systems")

    def metric(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return np.max(np.stack([s.metric(a[..., i], b[..., i]) for i, s in enumerate(systems)]), axis=0)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.stack([s.map(x[..., i]) for i, s in enumerate(systems)], axis=-1)

    return DynSystem("x".join(s.name for s in systems), "product", metric, f,
                     max(s.diameter for s in systems), factors=tuple(systems))


def make_shift_system(base: BaseSpace, window_radius: int, horizon: int,
                      two_sided: bool = True, fill_value: float | None = None) -> DynSystem:
    """Shift map on windows over ``base`` with the truncated metric ``d_T``.

    The map drops the leftmost stored coordinate and appends ``fill_value``.
    """
    if window_radius < 0 or horizon < 1:
        raise ConfigError("need window_radius >= 0 and horizon >= 1")
    if base.diameter is None or not math.isfinite(base.diameter):
        raise ConfigError(f"base space {base.name!r} has unknown diameter")
    l = window_radius
    if fill_value is None:
        fill_value = float(base.support[0]) if base.support is not None else 0.0
    w = (2.0 ** -np.abs(np.arange(-l, l + 1))) if two_sided else 2.0 ** -np.arange(l + 1)
    span = w.size

    def metric(a, b):
        a = np.asarray(a, dtype=float)[..., :span]
        b = np.asarray(b, dtype=float)[..., :span]
        return base.metric(a, b) @ w

    def shift(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., :-1] = x[..., 1:]
        out[..., -1] = fill_value
        return out

    if two_sided:
        bound = base.diameter * 2.0 ** (2 - l)
    else:
        bound = base.diameter * 2.0 ** (1 - l)
    return DynSystem(f"shift[{base.name},l={l},{'two' if two_sided else 'one'}-sided]",
                     "shift", metric, shift, float(base.diameter * w.sum()),
                     window_radius=l, horizon=horizon, truncation_bound=float(bound),
                     base=base, two_sided=two_sided, fill_value=float(fill_value))


# -------------------------------------------------------------- trajectories


def orbit(sys: DynSystem, x, n: int) -> np.ndarray:
    """The first ``n`` iterates ``x, Tx, ..., T^{n-1}x`` stacked on axis 0."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    pts = [np.asarray(x, dtype=float)]
    for _ in range(n - 1):
        pts.append(np.asarray(sys.map(pts[-1]), dtype=float))
    return np.stack(pts)


def trajectories(sys: DynSystem, points, n: int) -> np.ndarray:
    """Per-point data from which the step distances up to time ``n`` follow.

    Scalar systems give an ``(N, n)`` orbit array, product systems
    ``(N, n, m)``, shift systems the leading ``n + span - 1`` window entries.
    """
    pts = sys.points_array(points)
    if sys.is_shift:
        need = n + sys.weights.size - 1
        if pts.shape[1] < need:
            raise ConfigError(f"windows of length {pts.shape[1]} are too short for n={n}")
        return pts[:, :need]
    out = [pts]
    for _ in range(n - 1):
        out.append(np.asarray(sys.map(out[-1]), dtype=float))
    return np.stack(out, axis=1)


def step_distances(sys: DynSystem, ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """``d(T^k a, T^k b)`` for all pairs, shape ``(len(ta), len(tb), n)``."""
    if sys.is_shift:
        w = sys.weights
        c = sys.base.metric(ta[:, None, :], tb[None, :, :])
        return sliding_window_view(c, w.size, axis=-1) @ w
    return sys.metric(ta[:, None, ...], tb[None, :, ...])


def _pair_steps(sys, x, y, n):
    ta = trajectories(sys, x, n)
    tb = trajectories(sys, y, n)
    return step_distances(sys, ta, tb)[0, 0]


def _check_precision(sys, precision):
    if precision is not None and sys.truncation_bound > precision:
        raise PrecisionRefusal(
            f"truncation bound {sys.truncation_bound:g} exceeds precision budget {precision:g}")


def bowen_distance(sys: DynSystem, x, y, n: int, precision: float | None = None) -> float:
    """``d_n(x, y) = max_{k<n} d(T^k x, T^k y)``."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    _check_precision(sys, precision)
    return float(_pair_steps(sys, x, y, n).max())


def average_distance(sys: DynSystem, x, y, n: int, precision: float | None = None) -> float:
    """``(1/n) sum_{k<n} d(T^k x, T^k y)``."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    _check_precision(sys, precision)
    return float(_pair_steps(sys, x, y, n).mean())


# ----------------------------------------------------------------- sampling


def sample_space(sys: DynSystem, count: int, seed: int = 0,
                 base_grid: Sequence[float] | None = None) -> np.ndarray:
    """Deterministic finite sample of the phase space.

    Interval and circle systems get one jittered point per cell of a
    uniform partition.  Product systems use a Latin-hypercube version of the
    same.  Shift systems get distinct windows whose coordinates are drawn
    from ``base_grid`` (default: the base support).
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if sys.space_kind in ("interval", "circle"):
        if sys.diameter == 0:
            return np.zeros(1)
        return (np.arange(count) + rng.random(count)) / count
    if sys.space_kind == "product":
        cols = [(rng.permutation(count) + rng.random(count)) / count for _ in sys.factors]
        return np.stack(cols, axis=1)
    grid = np.asarray(base_grid if base_grid is not None else sys.base.support, dtype=float)
    if grid is None or grid.size == 0:
        raise ConfigError("shift sampling needs a base grid")
    width = sys.window_length()
    total = grid.size ** width
    if count > total:
        raise ConfigError(f"only {total} distinct windows exist, asked for {count}")
    seen = set()
    rows = []
    while len(rows) < count:
        idx = rng.integers(0, grid.size, size=width)
        key = idx.tobytes()
        if key in seen:
            continue
        seen.add(key)
        rows.append(grid[idx])
    return np.array(rows)


# ----------------------------------------------------------------- measures


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Finitely supported probability measure: distinct atoms with weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.shape[0] or w.ndim != 1 or w.size == 0:
            raise ConfigError("need one weight per atom")
        if np.any(w <= 0) or np.any(w > 1 + TOL):
            raise ConfigError("atom weights must lie in (0, 1]")
        if abs(w.sum() - 1.0) > 1e-12 * max(1, w.size) ** 0.5 + 1e-12:
            raise ConfigError(f"weights sum to {w.sum()!r}, not 1")
        flat = pts.reshape(pts.shape[0], -1)
        if np.unique(flat, axis=0).shape[0] != flat.shape[0]:
            raise ConfigError("atoms must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @classmethod
    def uniform(cls, points) -> FiniteMeasure:
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def point_mass(cls, x) -> FiniteMeasure:
        return cls(np.asarray(x, dtype=float)[None, ...], np.ones(1))


def make_product_measure(base_atoms, horizon: int, window_radius: int,
                         two_sided: bool = True, budget: int = 2_000_000) -> FiniteMeasure:
    """Product measure on windows of length ``horizon + 2l + 1``.

    ``base_atoms`` is a sequence of ``(point, weight)`` pairs, or a pair of
    arrays ``(points, weights)``.
    """
    pts, w = _split_atoms(base_atoms)
    keep = w > 0
    pts, w = pts[keep], w[keep]
    if pts.size == 0:
        raise ConfigError("base measure has no atoms")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ConfigError("base weights must sum to 1")
    width = horizon + (2 if two_sided else 1) * window_radius + 1
    total = pts.size ** width
    if total > budget:
        raise BudgetExceeded(f"{pts.size}**{width} = {total} windows exceeds budget {budget}")
    idx = np.array(list(itertools.product(range(pts.size), repeat=width)), dtype=np.intp)
    idx = idx.reshape(total, width)
    weights = np.prod(w[idx], axis=1)
    return FiniteMeasure(pts[idx], weights / weights.sum())


class ProductMeasure:
    """Product measure at every horizon; ``at(n)`` builds (and caches) the windows."""

    def __init__(self, base_atoms, window_radius: int, two_sided: bool = True,
                 budget: int = 2_000_000):
        self.points, self.weights = _split_atoms(base_atoms)
        self.window_radius = window_radius
        self.two_sided = two_sided
        self.budget = budget
        self._cache: dict[int, FiniteMeasure] = {}

    def at(self, n: int) -> FiniteMeasure:
        if n not in self._cache:
            self._cache[n] = make_product_measure((self.points, self.weights), n,
                                                  self.window_radius, self.two_sided, self.budget)
        return self._cache[n]

    def __repr__(self):
        return (f"ProductMeasure(points={self.points.tolist()}, weights={self.weights.tolist()}, "
                f"l={self.window_radius})")


def _split_atoms(base_atoms):
    # a pair of arrays is (points, weights); anything else is a list of pairs
    if isinstance(base_atoms, tuple) and len(base_atoms) == 2 \
            and all(isinstance(a, np.ndarray) for a in base_atoms):
        return np.asarray(base_atoms[0], dtype=float), np.asarray(base_atoms[1], dtype=float)
    pairs = list(base_atoms)
    return (np.array([p for p, _ in pairs], dtype=float),
            np.array([q for _, q in pairs], dtype=float))


def bernoulli_atoms(p: float) -> tuple[np.ndarray, np.ndarray]:
    """Symbols ``(0, 1)`` with probabilities ``(1-p, p)``."""
    return np.array([0.0, 1.0]), np.array([1.0 - p, p])


# ------------------------------------------------------------------- config


def parse_base(spec: str) -> BaseSpace:
    kind, _, arg = spec.strip().partition(":")
    kind = kind.strip().lower()
    if kind == "discrete":
        return discrete_base(int(arg or 2))
    if kind == "interval":
        return interval_base()
    if kind == "points":
        return finite_base([float(v) for v in arg.split(",") if v.strip()])
    if kind == "grid":
        return finite_base(interval_grid(int(arg)), name=f"grid:{arg}")
    if kind == "cantor":
        return finite_base(cantor_points(int(arg)), name=f"cantor:{arg}")
    if kind == "point":
        return one_point_base()
    raise ConfigError(f"unknown base space {spec!r}")


def parse_system_config(text: str) -> tuple[DynSystem, dict]:
    """Build a system from ``key = value`` lines; returns ``(system, params)``.

    Recognised keys: ``system`` (doubling, tent, rotation, identity, point,
    shift), ``alpha``, ``base``, ``window_radius``, ``horizon``, ``sided``
    (two/one), ``seed``.  Other keys are passed back untouched in ``params``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[system]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    params = dict(cp["system"])
    kind = params.pop("system", None)
    if kind is None:
        raise ConfigError("config lacks a 'system' key")
    kind = kind.strip().lower()
    if kind == "doubling":
        sys = doubling_map()
    elif kind == "tent":
        sys = tent_map()
    elif kind == "rotation":
        sys = rotation(float(params.pop("alpha", "0.5")))
    elif kind == "identity":
        sys = identity_map()
    elif kind == "point":
        sys = point_system()
    elif kind == "shift":
        base = parse_base(params.pop("base", "discrete:2"))
        sided = params.pop("sided", "two").strip().lower()
        if sided not in ("one", "two"):
            raise ConfigError("sided must be 'one' or 'two'")
        sys = make_shift_system(base, int(params.pop("window_radius", "0")),
                                int(params.pop("horizon", "1")), two_sided=sided == "two")
    else:
        raise ConfigError(f"unknown system {kind!r}")
    if "seed" in params:
        params["seed"] = int(params["seed"])
    return sys, params


def load_system_config(path) -> tuple[DynSystem, dict]:
    with open(path, encoding="utf-8") as fh:
        return parse_system_config(fh.read())
