"""Entropy, mutual information, rate-distortion and codebooks for finite sources.

Rates are in nats throughout.  Block distortions are the averaged step
distances ``rho_n(x, y) = (1/n) sum_k d(T^k x, y_k)``; representatives and
reproduction blocks use the trajectory format of :func:`dynsys.trajectories`
(for interval maps and one-coordinate shifts, simply ``n`` points).
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

from .covercount import AVERAGE, _collapse
from .dynsys import TOL, DynSystem, FiniteMeasure, ProductMeasure, step_distances, trajectories
from .errors import ConfigError, ConvergenceWarning


def shannon_entropy(weights) -> float:
    """``-sum p log p`` in nats, with ``0 log 0 = 0``."""
    p = np.asarray(weights, dtype=float).ravel()
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigError("weights must be a probability vector")
    return float(max(0.0, -xlogy(p, p).sum()))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12 * max(1, m.size) ** 0.5:
            raise ConfigError("joint must be a nonnegative matrix summing to 1")
        object.__setattr__(self, "matrix", m)

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.matrix.sum(axis=1), self.matrix.sum(axis=0)


def mutual_information(joint) -> float:
    """``I(X;Y) = H(X) + H(Y) - H(X,Y)``, evaluated as a KL divergence for accuracy."""
    j = joint if isinstance(joint, JointDistribution) else JointDistribution(joint)
    px, py = j.marginals()
    m = j.matrix
    outer = np.outer(px, py)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(m > 0, m * np.log(m / np.where(outer > 0, outer, 1.0)), 0.0)
    value = float(terms.sum())
    bound = min(shannon_entropy(px / px.sum()), shannon_entropy(py / py.sum()))
    return min(max(value, 0.0), bound)


# ---------------------------------------------------------- rate distortion


@dataclass
class RDPoint:
    distortion: float
    rate: float
    n: int = 1
    eps: float | None = None
    kernel: np.ndarray | None = None
    codebook: np.ndarray | None = None
    method: str = "blahut-arimoto"
    grid_mesh: float = 0.0
    converged: bool = True
    meta: dict = field(default_factory=dict)


RD_COLUMNS = ("n", "eps", "rate_nats", "distortion", "method", "grid_mesh")


@dataclass
class RDCurve:
    points: list[RDPoint] = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RD_COLUMNS)
            for p in self.points:
                w.writerow([p.n, _fmt(p.eps), _fmt(p.rate), _fmt(p.distortion), p.method,
                            _fmt(p.grid_mesh)])

    @classmethod
    def read_csv(cls, path) -> RDCurve:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([RDPoint(float(r["distortion"]), float(r["rate_nats"]), int(r["n"]),
                            None if r["eps"] == "" else float(r["eps"]), method=r["method"],
                            grid_mesh=float(r["grid_mesh"])) for r in rows])


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def _ba_fixed(logp, dist, beta, logq, mask, tol, max_iter):
    """Alternating minimization at slope ``beta``; returns (logQ, logq, iters, converged)."""
    penalty = np.where(mask, -beta * dist, -np.inf)
    prev = None
    for it in range(1, max_iter + 1):
        logk = logq[None, :] + penalty
        logk -= logsumexp(logk, axis=1, keepdims=True)
        logq = logsumexp(logp[:, None] + logk, axis=0)
        # rate functional I + beta * D, evaluated on the current kernel
        kern = np.exp(logk)
        joint = np.exp(logp)[:, None] * kern
        with np.errstate(invalid="ignore"):
            info = np.where(joint > 0, joint * (logk - logq[None, :]), 0.0).sum()
        func = info + beta * float((joint * np.where(mask, dist, 0.0)).sum())
        if prev is not None and abs(func - prev) <= tol * max(abs(func), 1e-300):
            return logk, logq, it, True
        prev = func
    return logk, logq, max_iter, False


def _evaluate(p, dist, kernel) -> tuple[float, float]:
    joint = p[:, None] * kernel
    return mutual_information(joint / joint.sum()), float((joint * dist).sum())


def blahut_arimoto(source, distortion, target: float | None = None, *, slope: float | None = None,
                   tol: float = 1e-9, max_iter: int = 10_000) -> RDPoint:
    """Rate-distortion point of a finite source under a finite distortion matrix.

    Pass ``target`` (a distortion bound ``D``) or ``slope`` (the Lagrange
    parameter ``beta >= 0``).  With a target the slope is bisected, and if
    the distortion curve jumps over ``D`` (a straight piece of ``R``) the
    two bracketing kernels are time-shared so that distortion equals ``D``.
    """
    p = np.asarray(source, dtype=float)
    d = np.asarray(distortion, dtype=float)
    if p.ndim != 1 or d.ndim != 2 or d.shape[0] != p.size:
        raise ConfigError("distortion matrix must have one row per source letter")
    if np.any(~np.isfinite(d)) or np.any(d < 0):
        raise ConfigError("distortion matrix must be finite and nonnegative")
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ConfigError("source must be a probability vector")
    if (target is None) == (slope is None):
        raise ConfigError("give exactly one of target and slope")
    keep = p > 0
    p_full, p = p, p[keep]
    d = d[keep]
    logp = np.log(p)
    full = np.ones_like(d, dtype=bool)

    def pack(kernel, method, converged=True, **meta):
        k = np.zeros((p_full.size, d.shape[1]))
        k[keep] = kernel
        k[~keep] = kernel[0] if kernel.shape[0] else 0.0
        rate, dist = _evaluate(p, d, kernel)
        return RDPoint(dist, rate, eps=target, kernel=k, method=method, converged=converged,
                       meta=meta)

    if slope is not None:
        if slope < 0:
            raise ConfigError("slope must be >= 0")
        logq0 = np.full(d.shape[1], -math.log(d.shape[1]))
        logk, _, iters, ok = _ba_fixed(logp, d, slope, logq0, full, tol, max_iter)
        if not ok:
            warnings.warn(f"no convergence after {max_iter} iterations", ConvergenceWarning)
        return pack(np.exp(logk), "blahut-arimoto", ok, beta=slope, iterations=iters)

    col_cost = p @ d
    d_max = float(col_cost.min())
    d_min = float(p @ d.min(axis=1))
    if target < d_min - 1e-12:
        raise ConfigError(f"target distortion {target} below the minimum {d_min}")
    if target >= d_max - 1e-15:
        k = np.zeros_like(d)
        k[:, int(np.argmin(col_cost))] = 1.0
        return pack(k, "constant")
    if target <= d_min + 1e-12:
        mask = d <= d.min(axis=1, keepdims=True) + 1e-15
        logq0 = np.full(d.shape[1], -math.log(d.shape[1]))
        logk, _, iters, ok = _ba_fixed(logp, d, 0.0, logq0, mask, tol, max_iter)
        if not ok:
            warnings.warn(f"no convergence after {max_iter} iterations", ConvergenceWarning)
        return pack(np.exp(logk), "lossless", ok, iterations=iters)

    logq = np.full(d.shape[1], -math.log(d.shape[1]))
    ok_all = True

    def solve(beta):
        nonlocal logq, ok_all
        logk, logq, _, ok = _ba_fixed(logp, d, beta, logq, full, tol, max_iter)
        ok_all &= ok
        kern = np.exp(logk)
        return kern, float((p[:, None] * kern * d).sum())

    lo, hi = 0.0, 1.0
    k_lo, dist_lo = solve(lo)
    k_hi, dist_hi = solve(hi)
    while dist_hi > target:
        lo, k_lo, dist_lo = hi, k_hi, dist_hi
        hi *= 2.0
        if hi > 1e8:
            break
        k_hi, dist_hi = solve(hi)
    for _ in range(100):
        if dist_hi >= target - tol or hi - lo <= 1e-12 * hi:
            break
        mid = 0.5 * (lo + hi)
        k_mid, dist_mid = solve(mid)
        if dist_mid > target:
            lo, k_lo, dist_lo = mid, k_mid, dist_mid
        else:
            hi, k_hi, dist_hi = mid, k_mid, dist_mid
    kernel = k_hi
    if dist_hi < target and dist_lo > target:
        lam = (target - dist_hi) / (dist_lo - dist_hi)
        kernel = lam * k_lo + (1 - lam) * k_hi
    if not ok_all:
        warnings.warn(f"no convergence after {max_iter} iterations", ConvergenceWarning)
    return pack(kernel, "blahut-arimoto", ok_all, beta=hi)


def _block_source(mu, sys: DynSystem, n: int):
    mu = mu.at(n) if isinstance(mu, ProductMeasure) else mu
    pts, w, _ = _collapse(sys, mu, n)
    return trajectories(sys, pts, n), w


def block_distortion(sys: DynSystem, ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """``rho_n`` between every pair of trajectory rows."""
    return step_distances(sys, ta, tb).mean(axis=-1)


def block_rate_distortion(mu, sys: DynSystem, n: int, eps_list: Sequence[float],
                          reproduction: np.ndarray | None = None, *, threads: int | None = None,
                          tol: float = 1e-9, max_iter: int = 10_000) -> RDCurve:
    """Rate per symbol ``(1/n) I`` of the ``n``-block process at each distortion bound.

    The reproduction alphabet defaults to the orbit blocks of the support,
    so ``grid_mesh`` (the worst nearest-reproduction distortion) is 0.
    """
    src, w = _block_source(mu, sys, n)
    rep = src if reproduction is None else np.unique(np.asarray(reproduction, dtype=float), axis=0)
    rho = block_distortion(sys, src, rep)
    mesh = float(rho.min(axis=1).max())

    def one(eps):
        pt = blahut_arimoto(w, rho, float(eps), tol=tol, max_iter=max_iter)
        pt.rate /= n
        pt.n, pt.eps, pt.grid_mesh = n, float(eps), mesh
        return pt

    eps_sorted = sorted(float(e) for e in eps_list)
    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        pts = list(pool.map(one, eps_sorted))
    # the curve is nonincreasing in eps; clean sub-tolerance solver jitter
    for i in range(1, len(pts)):
        pts[i].rate = min(pts[i].rate, pts[i - 1].rate)
    return RDCurve(pts)


# ---------------------------------------------------------------- codebooks


def _coord_metric(metric):
    if metric is None or metric == "hamming":
        return lambda a, b: (a != b).astype(float)
    if metric == "abs":
        return lambda a, b: np.abs(a - b)
    return metric


def lloyd_codebook(blocks: FiniteMeasure, rate: float, *, metric="hamming",
                   candidates: Sequence[np.ndarray] | None = None, restarts: int = 8,
                   seed: int = 0, tol: float = 1e-12, max_iter: int = 1000) -> RDPoint:
    """Lloyd quantizer for ``n``-blocks with at most ``floor(e^{nR})`` codewords.

    ``blocks.points`` has shape ``(N, n)``; ``metric`` acts coordinatewise
    (``"hamming"``, ``"abs"`` or a vectorized callable).  Centroids are
    coordinatewise weighted medoids over ``candidates[k]`` (default: the
    values seen at coordinate ``k``), which minimizes ``rho_n`` exactly
    over that product grid.  The result is an upper bound on the optimal
    codebook distortion.
    """
    x = np.asarray(blocks.points, dtype=float)
    if x.ndim != 2:
        raise ConfigError("blocks must be an (N, n) array")
    w = blocks.weights
    num, n = x.shape
    size = int(math.floor(math.exp(n * rate) + 1e-9))
    if size < 1:
        raise ConfigError("codebook size floor(e^{nR}) must be >= 1")
    d = _coord_metric(metric)
    cand = [np.unique(x[:, k]) for k in range(n)] if candidates is None else \
        [np.asarray(c, dtype=float) for c in candidates]
    # cost[k][v, i]: distance from candidate v to block i at coordinate k
    cost = [d(cand[k][:, None], x[None, :, k]) for k in range(n)]

    def dist_to(code):
        return np.mean([d(x[:, k][:, None], code[None, :, k]) for k in range(n)], axis=0)

    if size >= num:
        return RDPoint(0.0, math.log(size) / n, n, codebook=x.copy(), method="lloyd",
                       meta={"upper_bound": True, "history": [0.0], "size": size})
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        code = x[rng.choice(num, size, replace=False, p=w)].copy()
        history = []
        for _ in range(max_iter):
            dm = dist_to(code)
            assign = np.argmin(dm, axis=1)
            distortion = float(w @ dm[np.arange(num), assign])
            history.append(distortion)
            if len(history) > 1 and history[-2] - distortion < tol:
                break
            new = code.copy()
            for c in range(size):
                cell = assign == c
                if not cell.any():
                    continue
                for k in range(n):
                    new[c, k] = cand[k][int(np.argmin(cost[k][:, cell] @ w[cell]))]
            for c in range(size):
                if not (assign == c).any():
                    # split the heaviest cell: its worst-served atom seeds the empty one
                    mass = np.bincount(assign, weights=w, minlength=size)
                    heavy = int(np.argmax(mass))
                    members = np.flatnonzero(assign == heavy)
                    far = members[int(np.argmax(dm[members, heavy]))]
                    new[c] = x[far]
                    assign[far] = c
            code = new
        if best is None or history[-1] < best[0] - 1e-15:
            best = (history[-1], code, history)
    distortion, code, history = best
    return RDPoint(distortion, math.log(size) / n, n, codebook=code, method="lloyd",
                   meta={"upper_bound": True, "history": history, "size": size})


# ------------------------------------------------------ orbit coding


@dataclass
class ApproximationMap:
    """Partition of the atoms into cells, one representative trajectory per cell."""

    cells: list[np.ndarray]
    reps: np.ndarray
    n: int

    def __post_init__(self):
        self.cells = [np.asarray(c, dtype=np.intp) for c in self.cells]
        self.reps = np.asarray(self.reps, dtype=float)
        if len(self.cells) != self.reps.shape[0]:
            raise ConfigError("one representative per cell")
        if any(c.size == 0 for c in self.cells):
            raise ConfigError("cells must be nonempty")

    def check_partition(self, num_atoms: int) -> None:
        flat = np.sort(np.concatenate(self.cells))
        if not np.array_equal(flat, np.arange(num_atoms)):
            raise ConfigError("cells do not partition the atoms")

    def labels(self, num_atoms: int) -> np.ndarray:
        out = np.empty(num_atoms, dtype=np.intp)
        for i, c in enumerate(self.cells):
            out[c] = i
        return out

    def distortion(self, sys: DynSystem, mu: FiniteMeasure) -> float:
        self.check_partition(len(mu))
        traj = trajectories(sys, mu.points, self.n)
        total = 0.0
        for c, rep in zip(self.cells, self.reps):
            g = block_distortion(sys, traj[c], rep[None])[:, 0]
            total += float(mu.weights[c] @ g)
        return total


def orbit_code(sys: DynSystem, mu: FiniteMeasure, z: ApproximationMap,
               eps: float | None = None) -> ApproximationMap:
    """Replace each representative by the orbit of the best cell atom.

    The chosen atom minimizes ``g(x) = rho_n(orbit(x), rep)`` within its cell
    (lowest index on ties).  Cells are unchanged; the new distortion is at
    most twice the old one.  With ``eps`` the input must satisfy
    ``distortion <= eps``.
    """
    z.check_partition(len(mu))
    if z.reps.shape[1:] != trajectories(sys, mu.points[:1], z.n).shape[1:]:
        raise ConfigError("representatives must have the trajectory shape of length n")
    if eps is not None and z.distortion(sys, mu) > eps + TOL:
        raise ConfigError("input is not an (n, eps)-approximation")
    traj = trajectories(sys, mu.points, z.n)
    reps = np.empty_like(z.reps)
    for i, (c, rep) in enumerate(zip(z.cells, z.reps)):
        g = block_distortion(sys, traj[c], rep[None])[:, 0]
        reps[i] = traj[c[int(np.argmin(g))]]
    return ApproximationMap([c.copy() for c in z.cells], reps, z.n)


def random_approximation(sys: DynSystem, mu: FiniteMeasure, n: int, num_cells: int,
                         seed: int = 0, jitter: float = 0.05) -> ApproximationMap:
    """A random partition with perturbed representatives, for property checks."""
    rng = np.random.default_rng(seed)
    m = len(mu)
    num_cells = max(1, min(num_cells, m))
    labels = np.concatenate([np.arange(num_cells), rng.integers(0, num_cells, m - num_cells)])
    rng.shuffle(labels)
    traj = trajectories(sys, mu.points, n)
    cells, reps = [], []
    for c in range(num_cells):
        idx = np.flatnonzero(labels == c)
        base = traj[rng.choice(idx)]
        rep = base + rng.uniform(-jitter, jitter, base.shape)
        if sys.space_kind == "circle":
            rep = np.mod(rep, 1.0)
        elif sys.space_kind == "interval":
            rep = np.clip(rep, 0.0, 1.0)
        cells.append(idx)
        reps.append(rep)
    return ApproximationMap(cells, np.array(reps), n)


# ------------------------------------------------------------ sandwich


@dataclass
class SandwichReport:
    eps: float
    L: int
    lower: float
    rate: float
    upper: float
    rate_by_n: dict[int, float]
    tolerance: float

    @property
    def lower_margin(self) -> float:
        return self.rate - self.lower

    @property
    def upper_margin(self) -> float:
        return self.upper - self.rate

    @property
    def flagged(self) -> bool:
        return min(self.lower_margin, self.upper_margin) < -self.tolerance

    def to_dict(self) -> dict:
        return {"eps": self.eps, "L": self.L, "lower": self.lower, "rate": self.rate,
                "upper": self.upper, "lower_margin": self.lower_margin,
                "upper_margin": self.upper_margin, "flagged": self.flagged,
                "tolerance": self.tolerance,
                "rate_by_n": {str(k): v for k, v in self.rate_by_n.items()}}


def sandwich_check(sys: DynSystem, mu, eps: float, L: int, n_range: Sequence[int], *,
                   diameter: float | None = None, rd_n_max: int = 6, tolerance: float = 0.05,
                   **kw) -> SandwichReport:
    """Average-ball Katok estimates around the block rate at ``eps``.

    Lower leg: radius ``4 L eps`` with ``delta = 1/L``.  Upper leg: radius
    ``eps`` with ``delta = eps / (2 D)``.  The rate is the smallest block
    rate over ``n <= rd_n_max`` within ``n_range``.  Margins below
    ``-tolerance`` are flagged, not raised.
    """
    from .estimators import katok_entropy

    if L < 1:
        raise ConfigError("L must be >= 1")
    diam = sys.diameter if diameter is None else diameter
    n_range = sorted(n_range)
    lower = upper = 0.0
    if diam > 0:
        lower = katok_entropy(sys, mu, 4 * L * eps, 1.0 / L, n_range, AVERAGE, **kw).slope
        if eps / (2 * diam) < 1:
            upper = katok_entropy(sys, mu, eps, eps / (2 * diam), n_range, AVERAGE, **kw).slope
    rate_by_n = {}
    for n in n_range:
        if n > rd_n_max:
            break
        rate_by_n[n] = block_rate_distortion(mu, sys, n, [eps]).points[0].rate
    rate = min(rate_by_n.values()) if rate_by_n else 0.0
    return SandwichReport(float(eps), L, lower, rate, upper, rate_by_n,
                          tolerance)
