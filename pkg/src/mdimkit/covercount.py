"""Separated sets and measure covers by Bowen, average and prime dynamical balls.

Conventions: a set is ``(n, eps)``-separated when pairwise distances are
strictly greater than ``eps``; balls are closed.  Every comparison against a
radius carries the absolute tolerance ``TOL`` so that ties computed in
floating point resolve like exact ties.

Measure covers count balls centred at atoms and require covered mass
strictly greater than ``1 - delta``.
"""

from __future__ import annotations

import csv
import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .dynsys import TOL, DynSystem, FiniteMeasure, step_distances, trajectories
from .errors import BudgetExceeded, ConfigError, PrecisionRefusal

DEFAULT_MEMORY_CAP = 2 * 1024 ** 3
_BLOCK_BYTES = 64 * 1024 ** 2


@dataclass(frozen=True)
class BallKind:
    """``bowen``, ``average``, or ``prime`` with its exceptional fraction ``r``."""

    kind: str = "bowen"
    prime_fraction: float | None = None

    def __post_init__(self):
        if self.kind not in ("bowen", "average", "prime"):
            raise ConfigError(f"unknown ball kind {self.kind!r}")
        if (self.kind == "prime") != (self.prime_fraction is not None):
            raise ConfigError("prime_fraction is required for prime balls and only for them")
        if self.kind == "prime" and not 0 < self.prime_fraction < 1:
            raise ConfigError("prime_fraction must lie in (0, 1)")

    def __str__(self):
        return self.kind if self.kind != "prime" else f"prime:{self.prime_fraction!r}"

    @classmethod
    def parse(cls, text: str | BallKind) -> BallKind:
        if isinstance(text, BallKind):
            return text
        kind, _, r = str(text).partition(":")
        return cls(kind, float(r) if r else None)


BOWEN = BallKind("bowen")
AVERAGE = BallKind("average")


def prime(r: float) -> BallKind:
    return BallKind("prime", r)


# ---------------------------------------------------------------- CountCurve


@dataclass(frozen=True)
class CountEntry:
    n: int
    eps: float
    count: int
    method: str
    ball: BallKind = BOWEN
    delta: float | None = None
    covered_mass: float | None = None


CSV_COLUMNS = ("n", "eps", "ball", "delta", "count", "method", "covered_mass")


@dataclass
class CountCurve:
    """Counts indexed by ``(n, eps)`` plus ball kind, delta and method."""

    entries: list[CountEntry] = field(default_factory=list)

    def add(self, entry: CountEntry) -> None:
        if entry.count < 1:
            raise ConfigError("counts are >= 1")
        key = (entry.n, entry.eps, entry.ball, entry.delta)
        if any((e.n, e.eps, e.ball, e.delta) == key for e in self.entries):
            raise ConfigError(f"duplicate count entry {key}")
        self.entries.append(entry)

    def extend(self, entries: Iterable[CountEntry]) -> None:
        for e in entries:
            self.add(e)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def epsilons(self) -> list[float]:
        return sorted({e.eps for e in self.entries}, reverse=True)

    def restrict(self, eps: float) -> CountCurve:
        return CountCurve([e for e in self.entries if e.eps == eps])

    def series(self) -> tuple[np.ndarray, np.ndarray]:
        """``(n, count)`` arrays sorted by ``n`` (single-eps curves only)."""
        if len({e.eps for e in self.entries}) > 1:
            raise ConfigError("restrict the curve to one eps first")
        es = sorted(self.entries, key=lambda e: e.n)
        return np.array([e.n for e in es], dtype=float), np.array([e.count for e in es], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for e in self.entries:
                w.writerow([e.n, _fmt(e.eps), str(e.ball), "" if e.delta is None else _fmt(e.delta),
                            e.count, e.method, "" if e.covered_mass is None else _fmt(e.covered_mass)])

    @classmethod
    def read_csv(cls, path) -> CountCurve:
        curve = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                curve.add(CountEntry(
                    n=int(row["n"]), eps=float(row["eps"]), count=int(row["count"]),
                    method=row["method"], ball=BallKind.parse(row["ball"]),
                    delta=float(row["delta"]) if row["delta"] else None,
                    covered_mass=float(row["covered_mass"]) if row["covered_mass"] else None))
        return curve


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ------------------------------------------------------------ ball oracles


def _reduce(steps: np.ndarray, eps: float, ball: BallKind) -> np.ndarray:
    """Closed-ball membership from step distances ``(..., n)``."""
    n = steps.shape[-1]
    if ball.kind == "bowen":
        return steps.max(axis=-1) <= eps + TOL
    if ball.kind == "average":
        return steps.mean(axis=-1) <= eps + TOL
    hits = np.count_nonzero(steps <= eps + TOL, axis=-1)
    return hits >= (1.0 - ball.prime_fraction) * n - TOL


def _distance(steps: np.ndarray, ball: BallKind) -> np.ndarray | None:
    if ball.kind == "bowen":
        return steps.max(axis=-1)
    if ball.kind == "average":
        return steps.mean(axis=-1)
    return None


class BallOracle:
    """Closed-ball membership among a fixed point set at time ``n``.

    Scalar systems with Bowen or average balls use a KD-tree on orbit
    vectors (Chebyshev resp. L1 norm, periodic for the circle).  Everything
    else is evaluated blockwise, in parallel over row blocks.  The full
    boolean membership matrix is cached when it fits under ``memory_cap``;
    otherwise rows are recomputed on demand.
    """

    def __init__(self, sys: DynSystem, points, n: int, eps: float, ball: BallKind = BOWEN,
                 *, certify: bool = False, threads: int | None = None,
                 memory_cap: int = DEFAULT_MEMORY_CAP):
        if eps <= 0:
            raise ConfigError("eps must be > 0")
        if n < 1:
            raise ConfigError("n must be >= 1")
        self.sys = sys
        self.n = n
        self.eps = float(eps)
        self.ball = BallKind.parse(ball)
        self.certify = certify and sys.truncation_bound > 0
        self.threads = threads or min(8, os.cpu_count() or 1)
        self.memory_cap = memory_cap
        self.traj = trajectories(sys, points, n)
        self.size = self.traj.shape[0]
        self._tree = None
        if sys.space_kind in ("interval", "circle") and self.ball.kind != "prime":
            box = 1.0 if sys.space_kind == "circle" else None
            data = self.traj % 1.0 if box else self.traj
            self._tree = cKDTree(data, boxsize=box)
            self._p = np.inf if self.ball.kind == "bowen" else 1
            self._r = self.eps + TOL if self.ball.kind == "bowen" else n * (self.eps + TOL)
        self._matrix = None

    # rows -----------------------------------------------------------------

    def _block(self, rows: np.ndarray) -> np.ndarray:
        steps = step_distances(self.sys, self.traj[rows], self.traj)
        if self.certify:
            d = _distance(steps, self.ball)
            if d is None:
                d = steps
            if np.any(np.abs(d - self.eps) < self.sys.truncation_bound):
                raise PrecisionRefusal(
                    f"a distance lies within the truncation bound {self.sys.truncation_bound:g} "
                    f"of eps={self.eps:g}")
        return _reduce(steps, self.eps, self.ball)

    def _block_size(self) -> int:
        per_row = self.size * self.traj[0].size * 8 * 3
        return max(1, min(self.size, _BLOCK_BYTES // max(per_row, 1)))

    def rows(self, idx: Sequence[int]) -> np.ndarray:
        """Boolean membership rows for the given centres."""
        idx = np.asarray(idx, dtype=np.intp)
        if self._matrix is not None:
            return self._matrix[idx]
        if self._tree is not None:
            out = np.zeros((idx.size, self.size), dtype=bool)
            hits = self._tree.query_ball_point(self._tree.data[idx], r=self._r, p=self._p)
            for i, h in enumerate(hits):
                out[i, h] = True
            return out
        bs = self._block_size()
        chunks = [idx[s:s + bs] for s in range(0, idx.size, bs)]
        if len(chunks) == 1 or self.threads == 1:
            return np.concatenate([self._block(c) for c in chunks]) if chunks else \
                np.zeros((0, self.size), dtype=bool)
        with ThreadPoolExecutor(self.threads) as ex:
            return np.concatenate(list(ex.map(self._block, chunks)))

    def row(self, i: int) -> np.ndarray:
        return self.rows([i])[0]

    def neighbors(self, idx: Sequence[int]) -> list[np.ndarray]:
        """Index arrays of the points inside each centre's ball."""
        idx = np.asarray(idx, dtype=np.intp)
        if self._tree is not None and self._matrix is None:
            hits = self._tree.query_ball_point(self._tree.data[idx], r=self._r, p=self._p)
            return [np.asarray(h, dtype=np.intp) for h in hits]
        return [np.flatnonzero(r) for r in self.rows(idx)]

    def matrix(self) -> np.ndarray | None:
        """The full membership matrix, or ``None`` if it exceeds the cap."""
        if self._matrix is None and self.size * self.size <= self.memory_cap:
            self._matrix = self.rows(np.arange(self.size))
        return self._matrix

    def masses(self, weights: np.ndarray) -> np.ndarray:
        """Ball masses for every centre, without keeping the matrix."""
        m = self.matrix()
        if m is not None:
            return m @ weights
        bs = max(1, self._block_size())
        return np.concatenate([self.rows(np.arange(s, min(s + bs, self.size))) @ weights
                               for s in range(0, self.size, bs)])


def _collapse(sys: DynSystem, mu: FiniteMeasure, n: int):
    """Merge atoms that no step distance up to time ``n`` can tell apart.

    Returns ``(points, weights, first_index)`` where ``first_index`` maps each
    merged atom back to its lowest original index.
    """
    traj = trajectories(sys, mu.points, n)
    flat = np.ascontiguousarray(traj.reshape(traj.shape[0], -1))
    _, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    weights = np.zeros(first.size)
    np.add.at(weights, rank[inverse], mu.weights)
    return mu.points[first[order]], weights, first[order]


# -------------------------------------------------------- separated sets


def greedy_separated(sample, sys: DynSystem, n: int, eps: float, *, certify: bool = False,
                     threads: int | None = None, memory_cap: int = DEFAULT_MEMORY_CAP):
    """Greedy maximal ``(n, eps)``-separated subset, scanning in sample order.

    Returns ``(count, witnesses)``.  The witnesses are pairwise at
    ``d_n``-distance ``> eps`` and every sample point lies within ``eps`` of
    one of them.
    """
    pts = sys.points_array(sample)
    if pts.shape[0] == 0:
        raise ConfigError("sample is empty")
    oracle = BallOracle(sys, pts, n, eps, BOWEN, certify=certify, threads=threads,
                        memory_cap=memory_cap)
    blocked = np.zeros(oracle.size, dtype=bool)
    chosen: list[int] = []
    batch = 64
    i = 0
    while i < oracle.size:
        cand = np.flatnonzero(~blocked[i:])[:batch] + i
        if cand.size == 0:
            break
        taken = 0
        for c, nbrs in zip(cand, oracle.neighbors(cand)):
            if blocked[c]:
                continue
            chosen.append(int(c))
            blocked[nbrs] = True
            taken += 1
        i = int(cand[-1]) + 1
        # candidates blocked by earlier picks in the same batch were queried for nothing
        batch = int(min(4096, max(1, 2 * taken)))
    return len(chosen), pts[chosen]


def exact_max_separated(sample, sys: DynSystem, n: int, eps: float, budget: int = 24,
                        *, certify: bool = False) -> int:
    """Maximum ``(n, eps)``-separated subset of a small sample, by branch and bound."""
    pts = sys.points_array(sample)
    if pts.shape[0] > budget:
        raise BudgetExceeded(f"sample of {pts.shape[0]} exceeds exact budget {budget}")
    close = BallOracle(sys, pts, n, eps, BOWEN, certify=certify, threads=1).rows(np.arange(pts.shape[0]))
    adj = [sum(1 << int(j) for j in np.flatnonzero(r) if j != i) for i, r in enumerate(close)]
    return _max_independent(adj, (1 << len(adj)) - 1)


def _max_independent(adj: list[int], cand: int) -> int:
    best = 0

    def rec(p: int, size: int):
        nonlocal best
        if p == 0:
            best = max(best, size)
            return
        if size + bin(p).count("1") <= best:
            return
        # branch on the candidate with most neighbours inside p
        v = max(_bits(p), key=lambda u: bin(adj[u] & p).count("1"))
        if adj[v] & p == 0:
            # isolated inside p: always take it
            rec(p & ~(1 << v), size + 1)
            return
        rec(p & ~(1 << v) & ~adj[v], size + 1)
        rec(p & ~(1 << v), size)

    rec(cand, 0)
    return best


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# ---------------------------------------------------------- measure covers


def _target(delta: float) -> float:
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    return 1.0 - delta + TOL


@dataclass(frozen=True)
class CoverResult:
    count: int
    centers: np.ndarray
    covered_mass: float


def greedy_measure_cover(mu: FiniteMeasure, sys: DynSystem, n: int, eps: float, delta: float,
                         ball: BallKind | str = BOWEN, *, certify: bool = False,
                         threads: int | None = None,
                         memory_cap: int = DEFAULT_MEMORY_CAP) -> CoverResult:
    """Greedy cover of mass ``> 1 - delta`` by balls centred at atoms.

    Each step takes the atom whose ball holds the most uncovered mass, ties
    going to the lowest atom index.  Residual masses only shrink, so stale
    heap entries are valid upper bounds (lazy evaluation).
    """
    target = _target(delta)
    ball = BallKind.parse(ball)
    pts, w, origin = _collapse(sys, mu, n)
    oracle = BallOracle(sys, pts, n, eps, ball, certify=certify, threads=threads,
                        memory_cap=memory_cap)
    uncovered = np.ones(w.size, dtype=bool)
    heap = [(-_q(m), i) for i, m in enumerate(oracle.masses(w))]
    heapq.heapify(heap)
    covered = 0.0
    centers: list[int] = []
    while covered <= target:
        if not heap:
            raise ConfigError("all atoms used and the covered mass is still <= 1 - delta")
        _, i = heapq.heappop(heap)
        row = oracle.row(i) & uncovered
        key = (-_q(w[row].sum()), i)
        if heap and key > heap[0]:
            heapq.heappush(heap, key)
            continue
        if not row.any():
            continue
        centers.append(i)
        uncovered &= ~row
        covered = float(w[~uncovered].sum())
    return CoverResult(len(centers), mu.points[origin[centers]], covered)


def _q(mass: float) -> int:
    # masses equal to within 1e-12 tie and fall back to the atom index
    return int(round(mass * 1e12))


def exact_measure_cover(mu: FiniteMeasure, sys: DynSystem, n: int, eps: float, delta: float,
                        ball: BallKind | str = BOWEN, budget: int = 20, *,
                        certify: bool = False) -> int:
    """Minimum number of atom-centred balls covering mass ``> 1 - delta``.

    Exhaustive iterative deepening with a mass bound; identical and dominated
    balls are pruned first, which keeps cylinder-structured measures cheap.
    """
    if len(mu) > budget:
        raise BudgetExceeded(f"{len(mu)} atoms exceed exact-cover budget {budget}")
    target = _target(delta)
    ball = BallKind.parse(ball)
    pts, w, _ = _collapse(sys, mu, n)
    rows = BallOracle(sys, pts, n, eps, ball, certify=certify, threads=1).rows(np.arange(w.size))
    masks = sorted({sum(1 << int(j) for j in np.flatnonzero(r)) for r in rows})
    masks = [m for m in masks if not any(o != m and (o & m) == m for o in masks)]

    def mass(mask: int) -> float:
        return float(sum(w[j] for j in _bits(mask)))

    masks.sort(key=mass, reverse=True)

    def feasible(start: int, left: int, cov: int, cov_mass: float) -> bool:
        if cov_mass > target:
            return True
        if left == 0:
            return False
        gains = sorted((mass(m & ~cov) for m in masks[start:]), reverse=True)
        if cov_mass + sum(gains[:left]) <= target:
            return False
        for j in range(start, len(masks)):
            extra = masks[j] & ~cov
            if extra == 0:
                continue
            if feasible(j + 1, left - 1, cov | extra, cov_mass + mass(extra)):
                return True
        return False

    for size in range(1, len(masks) + 1):
        if feasible(0, size, 0, 0.0):
            return size
    raise ConfigError("cannot cover mass > 1 - delta")


def min_cylinder_cover(cylinders: int, delta: float) -> int:
    """Smallest ``L`` with ``L / cylinders > 1 - delta``, in exact arithmetic."""
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    keep = (1 - Fraction(repr(float(delta)))) * cylinders
    return math.floor(keep) + 1


def cylinder_cover_exact(k: int, n: int, r: float, delta: float) -> int:
    """``N_{mu_k}(n, r, delta) = floor((1 - delta) k^n) + 1`` for ``r < 1/(2k)``.

    ``mu_k`` is the product of the uniform measure on ``{(2i-1)/(2k)}``; a
    Bowen ball of radius below half the grid gap meets a single length-n
    cylinder.
    """
    if k < 1 or n < 1:
        raise ConfigError("need k >= 1 and n >= 1")
    if not r < 1.0 / (2 * k):
        raise ConfigError(f"formula needs r < 1/(2k) = {1.0 / (2 * k):g}, got {r:g}")
    return min_cylinder_cover(k ** n, delta)


def sorted_mass_cover(masses, delta: float) -> int:
    """Fewest cells, taken heaviest first, whose total mass exceeds ``1 - delta``."""
    target = _target(delta)
    m = np.sort(np.asarray(masses, dtype=float))[::-1]
    hit = np.flatnonzero(np.cumsum(m) > target)
    if hit.size == 0:
        raise ConfigError("cells carry total mass <= 1 - delta")
    return int(hit[0]) + 1


def bernoulli_cylinder_cover(p: float, n: int, delta: float) -> int:
    """Sorted-cylinder count for the Bernoulli(p) measure on ``{0,1}^n``.

    Cylinders with ``j`` ones share the mass ``p^j (1-p)^(n-j)``; whole mass
    classes are consumed before the last one is split.
    """
    if not 0 <= p <= 1 or n < 1:
        raise ConfigError("need 0 <= p <= 1 and n >= 1")
    target = _target(delta)
    classes = sorted(((p ** j * (1 - p) ** (n - j), math.comb(n, j)) for j in range(n + 1)),
                     reverse=True)
    total, count = 0.0, 0
    for mass, mult in classes:
        if mass == 0:
            break
        if total + mass * mult > target:
            return count + math.floor((target - total) / mass) + 1
        total += mass * mult
        count += mult
    raise ConfigError("cylinders carry total mass <= 1 - delta")


def shift_cover_upper(base_cover: int, n: int, l: int) -> int:
    """Covering bound ``M^(n + 2l + 1)`` for the shift over ``Y`` at scale ``7 eps``."""
    if base_cover < 1 or n < 0 or l < 0:
        raise ConfigError("need M >= 1, n >= 0, l >= 0")
    return int(base_cover) ** (n + 2 * l + 1)


def proof_window_radius(eps: float, diam: float) -> int:
    """Smallest ``l >= 1`` with ``sum_{|j| >= l} 2^-|j| = 2^(2-l) < eps / (2 diam)``."""
    if diam <= 0:
        return 1
    l = 1
    while 2.0 ** (2 - l) >= eps / (2.0 * diam):
        l += 1
    return l
