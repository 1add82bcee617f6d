"""Continuous interval maps built from horseshoe blocks, and their separated counts.

``[0,1]`` is cut into consecutive blocks ``J_k = [a_{k-1}, a_k]`` of length
``b_k``.  On ``J_k`` the map is a sawtooth of ``2 l_k + 1`` equal affine
pieces alternating between ``a_{k-1}`` and ``a_k``, so every piece maps onto
``J_k``, both block endpoints are fixed, and there are ``l_k + 1``
increasing pieces.  Large ``l_k`` on small blocks pushes the metric mean
dimension towards 1.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynsys import DynSystem, interval_system
from .errors import ConfigError

MIN_PIECE_WIDTH = 1e-14


@dataclass(frozen=True)
class BlockSpec:
    """Block lengths ``b_k`` (summing to 1) and lap parameters ``l_k``."""

    blocks: tuple[tuple[float, int], ...]
    C: float = 1.0

    def __post_init__(self):
        if not self.blocks:
            raise ConfigError("need at least one block")
        for b, l in self.blocks:
            if not b > 0 or int(l) != l or l < 1:
                raise ConfigError(f"bad block (b={b}, l={l})")
        if abs(sum(b for b, _ in self.blocks) - 1.0) > 1e-12:
            raise ConfigError("block lengths must sum to 1")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, int]]) -> BlockSpec:
        """Normalize arbitrary positive weights into a spec."""
        total = math.fsum(b for b, _ in pairs)
        return cls(tuple((b / total, int(l)) for b, l in pairs), 1.0 / total)

    @classmethod
    def inverse_square(cls, K: int, laps=lambda k: k ** k) -> BlockSpec:
        """``b_k = C/k^2`` over ``k <= K`` with ``l_k = k^k`` by default."""
        if K < 1:
            raise ConfigError("K must be >= 1")
        return cls.from_pairs([(1.0 / k ** 2, laps(k)) for k in range(1, K + 1)])

    def truncate(self, K: int) -> BlockSpec:
        if not 1 <= K:
            raise ConfigError("K must be >= 1")
        raw = [(b / self.C if self.C else b, l) for b, l in self.blocks[:K]]
        return BlockSpec.from_pairs(raw)

    @property
    def endpoints(self) -> np.ndarray:
        """``a_0 = 0, a_1, ..., a_K = 1``."""
        a = np.concatenate([[0.0], np.cumsum([b for b, _ in self.blocks])])
        a[-1] = 1.0
        return a

    def laps(self, k: int) -> int:
        return self.blocks[k - 1][1]

    def eps(self, k: int) -> float:
        """Scale ``b_k / (2 l_k)`` at which block ``k`` is resolved."""
        b, l = self.blocks[k - 1]
        return b / (2 * l)


class PiecewiseAffineMap:
    """Continuous map of ``[0,1]`` given by values at increasing breakpoints."""

    def __init__(self, breakpoints, values):
        x = np.asarray(breakpoints, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ConfigError("need matching breakpoint and value lists")
        if np.any(np.diff(x) <= 0):
            raise ConfigError("breakpoints must be strictly increasing")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(y < 0) or np.any(y > 1):
            raise ConfigError("map must send [0,1] into [0,1]")
        self.breakpoints, self.values = x, y

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def __len__(self):
        return self.breakpoints.size - 1

    def pieces(self) -> np.ndarray:
        """Rows ``(x0, x1, y0, y1)``, one per affine piece."""
        x, y = self.breakpoints, self.values
        return np.column_stack([x[:-1], x[1:], y[:-1], y[1:]])

    def blocks(self) -> np.ndarray:
        """Fixed breakpoints, which delimit the blocks of a built map."""
        return self.breakpoints[self.values == self.breakpoints]

    def block_pieces(self, k: int) -> np.ndarray:
        a = self.blocks()
        if not 1 <= k < a.size:
            raise ConfigError(f"block {k} does not exist")
        pc = self.pieces()
        return pc[(pc[:, 0] >= a[k - 1]) & (pc[:, 1] <= a[k])]

    def increasing_pieces(self, k: int) -> np.ndarray:
        """Pieces of block ``k`` mapping increasingly onto the whole block."""
        a = self.blocks()
        pc = self.block_pieces(k)
        return pc[(pc[:, 2] == a[k - 1]) & (pc[:, 3] == a[k])]

    def as_system(self, name: str = "piecewise-affine") -> DynSystem:
        return interval_system(name, self, {"pieces": len(self)})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["breakpoint", "value"])
            for x, y in zip(self.breakpoints, self.values):
                w.writerow([format(x, ".17g"), format(y, ".17g")])

    @classmethod
    def read_csv(cls, path) -> PiecewiseAffineMap:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["breakpoint"]) for r in rows], [float(r["value"]) for r in rows])


def build_max_mdim_map(spec: BlockSpec, K_max: int | None = None) -> tuple[PiecewiseAffineMap, DynSystem]:
    """Sawtooth blocks glued into one continuous map (and its dynamical system)."""
    if K_max is not None:
        if K_max < 1:
            raise ConfigError("K_max must be >= 1")
        if K_max < len(spec.blocks):
            spec = spec.truncate(K_max)
    a = spec.endpoints
    xs, ys = [np.array([0.0])], [np.array([0.0])]
    for k, (_, l) in enumerate(spec.blocks, start=1):
        lo, hi = a[k - 1], a[k]
        count = 2 * l + 1
        if (hi - lo) / count < MIN_PIECE_WIDTH:
            raise ConfigError(f"block {k}: piece width {(hi - lo) / count:.3g} underflows")
        i = np.arange(1, count + 1)
        knots = lo + (hi - lo) * i / count
        knots[-1] = hi
        xs.append(knots)
        ys.append(np.where(i % 2 == 1, hi, lo))
    f = PiecewiseAffineMap(np.concatenate(xs), np.concatenate(ys))
    return f, f.as_system("max-mdim-interval")


def symbolic_separated_count(f: PiecewiseAffineMap, k: int, m: int) -> int:
    """``(#increasing full pieces of J_k) ** m``, a lower bound for separated sets.

    Every word over the increasing pieces of block ``k`` has a nonempty
    cylinder since each piece maps onto the block, and distinct words are
    separated by more than one piece width.
    """
    if m < 1:
        raise ConfigError("m must be >= 1")
    return int(len(f.increasing_pieces(k))) ** m


def cylinder_points(f: PiecewiseAffineMap, k: int, m: int) -> np.ndarray:
    """One point per length-``m`` word over the increasing pieces of ``J_k``.

    The point lands at the midpoint of the last piece of its word; earlier
    coordinates are pulled back through the increasing branches.
    """
    pcs = f.increasing_pieces(k)
    a = f.blocks()
    lo, hi = a[k - 1], a[k]
    words = np.array(list(itertools.product(range(len(pcs)), repeat=m)), dtype=np.intp)
    y = 0.5 * (pcs[words[:, -1], 0] + pcs[words[:, -1], 1])
    for j in range(m - 2, -1, -1):
        p = pcs[words[:, j]]
        y = p[:, 0] + (y - lo) / (hi - lo) * (p[:, 1] - p[:, 0])
    return y


@dataclass
class PredictedMdim:
    rows: list[tuple[int, float]]

    @property
    def increasing(self) -> bool:
        v = [r[1] for r in self.rows]
        return all(b > a for a, b in zip(v, v[1:]))

    @property
    def last(self) -> float:
        return self.rows[-1][1]


def predicted_mdim(spec: BlockSpec) -> PredictedMdim:
    """``log l_k / |log eps_k|`` with ``eps_k = b_k / (2 l_k)``, per block."""
    rows = []
    for k in range(1, len(spec.blocks) + 1):
        b, l = spec.blocks[k - 1]
        rows.append((k, math.log(l) / abs(math.log(b) - math.log(2) - math.log(l))))
    return PredictedMdim(rows)
