"""Ground metrics and exact Earth Mover's Distance oracles.

A "point" of the metric is a multiset of exactly ``s`` vectors (one
:class:`PointSet`); an "element" is a single vector inside a point.  The
distance between two points is the minimum-cost perfect matching between
their elements under the ground metric (Hamming for hypercube/grid modes,
l_p for real mode).

Everything here is a pure function of immutable inputs and is the source of
truth the hashing modules are tested against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

HYPERCUBE = "hypercube"
GRID = "grid"
REAL = "real"
MODES = (HYPERCUBE, GRID, REAL)

BRUTEFORCE_MAX_S = 8


@dataclass(frozen=True)
class PointSet:
    """A multiset of exactly ``s`` vectors sharing one dimension and mode.

    ``elements`` is an (s, d) array; duplicates are allowed and carry
    multiset semantics (handled by index, never collapsed by value).
    """

    elements: np.ndarray
    mode: str = HYPERCUBE

    def __post_init__(self):
        arr = np.asarray(self.elements)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("a point must be a non-empty (s, d) array of elements")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.mode == HYPERCUBE:
            arr = arr.astype(np.uint8)
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("hypercube elements must be 0/1 valued")
        elif self.mode == GRID:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("grid elements must be integer valued")
            if (arr < 1).any():
                raise ValueError("grid coordinates must be >= 1")
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.float64)
        object.__setattr__(self, "elements", arr)

    @property
    def s(self) -> int:
        return self.elements.shape[0]

    @property
    def d(self) -> int:
        return self.elements.shape[1]

    def __iter__(self):
        return iter(self.elements)

    def __eq__(self, other):
        return (isinstance(other, PointSet) and self.mode == other.mode
                and self.elements.shape == other.elements.shape
                and bool((self.elements == other.elements).all()))


@dataclass(frozen=True)
class Matching:
    """An element-level bijection and its total ground cost."""

    permutation: tuple
    cost: float

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError("permutation must be a bijection on [s]")
        if self.cost < 0:
            raise ValueError("matching cost must be nonnegative")


@dataclass(frozen=True)
class Dataset:
    """The distribution mu: uniform over ``n`` stored points."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if len(pts) < 1:
            raise ValueError("a dataset needs at least one point")
        first = pts[0]
        for p in pts:
            if p.mode != first.mode or p.elements.shape != first.elements.shape:
                raise ValueError("all dataset points must share s, d and mode")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def s(self) -> int:
        return self.points[0].s

    @property
    def d(self) -> int:
        return self.points[0].d

    @property
    def mode(self) -> str:
        return self.points[0].mode

    def sample(self, rng: np.random.Generator) -> PointSet:
        return self.points[int(rng.integers(self.n))]


def _check_same_shape(x: PointSet, y: PointSet):
    if x.mode != y.mode:
        raise ValueError(f"mode mismatch: {x.mode} vs {y.mode}")
    if x.elements.shape != y.elements.shape:
        raise ValueError(f"shape mismatch: {x.elements.shape} vs {y.elements.shape}")


def ground_distance(a: np.ndarray, b: np.ndarray, p: float = 1.0) -> float:
    """l_p distance between two element vectors (p in [1, 2])."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not 1.0 <= p <= 2.0:
        raise ValueError("norm exponent must lie in [1, 2]")
    diff = np.abs(a.astype(np.float64) - b.astype(np.float64))
    if p == 1.0:
        return float(diff.sum())
    return float((diff**p).sum() ** (1.0 / p))


def cost_matrix(x: PointSet, y: PointSet, p: float = 1.0) -> np.ndarray:
    """Pairwise ground distances; integer-valued (as floats) for p=1 integer modes."""
    _check_same_shape(x, y)
    if x.mode in (HYPERCUBE, GRID) and p != 1.0:
        raise ValueError("hypercube/grid modes use the Hamming (p=1) ground metric")
    xe = x.elements.astype(np.int64 if x.mode != REAL else np.float64)
    ye = y.elements.astype(np.int64 if y.mode != REAL else np.float64)
    diff = np.abs(xe[:, None, :] - ye[None, :, :])
    if p == 1.0:
        return diff.sum(axis=2).astype(np.float64)
    return (diff.astype(np.float64) ** p).sum(axis=2) ** (1.0 / p)


def emd_exact(x: PointSet, y: PointSet, p: float = 1.0) -> Matching:
    """Optimal assignment between the elements of x and y.

    Solved with scipy's shortest-augmenting-path assignment solver (a
    Jonker-Volgenant variant, cubic time).  For integer modes the returned
    cost is recomputed from the permutation with integer arithmetic so that
    oracle comparisons are exact.
    """
    costs = cost_matrix(x, y, p)
    rows, cols = linear_sum_assignment(costs)
    perm = [0] * x.s
    for i, j in zip(rows, cols):
        perm[i] = int(j)
    if x.mode in (HYPERCUBE, GRID):
        total = int(sum(int(costs[i, perm[i]]) for i in range(x.s)))
    else:
        total = float(sum(costs[i, perm[i]] for i in range(x.s)))
    return Matching(permutation=tuple(perm), cost=float(total))


def emd(x: PointSet, y: PointSet, p: float = 1.0) -> float:
    return emd_exact(x, y, p).cost


def emd_bruteforce(x: PointSet, y: PointSet, p: float = 1.0) -> float:
    """Exact minimum over all s! bijections; the oracle for emd_exact."""
    _check_same_shape(x, y)
    if x.s > BRUTEFORCE_MAX_S:
        raise ValueError(f"brute-force oracle limited to s <= {BRUTEFORCE_MAX_S}")
    costs = cost_matrix(x, y, p)
    idx = range(x.s)
    best = min(sum(costs[i, pi] for i, pi in zip(idx, perm))
               for perm in itertools.permutations(idx))
    return float(best)


def chamfer(x: PointSet, omega: np.ndarray, p: float = 1.0) -> float:
    """Sum over elements of x of the nearest-neighbor distance into omega.

    Asymmetric; relaxes the bijection, so it lower-bounds EMD against any
    point whose elements all appear in omega.
    """
    omega = np.atleast_2d(np.asarray(omega))
    if omega.shape[0] == 0:
        raise ValueError("chamfer target set must be non-empty")
    if omega.shape[1] != x.d:
        raise ValueError(f"dimension mismatch: {omega.shape[1]} vs {x.d}")
    xe = x.elements.astype(np.float64)
    oe = omega.astype(np.float64)
    diff = np.abs(xe[:, None, :] - oe[None, :, :])
    if p == 1.0:
        pair = diff.sum(axis=2)
    else:
        pair = (diff**p).sum(axis=2) ** (1.0 / p)
    return float(pair.min(axis=1).sum())


def greedy_matching_cost(x: PointSet, y: PointSet, p: float = 1.0) -> float:
    """Cost of repeatedly matching the globally closest unmatched pair.

    Ties break toward the lowest (i, j) index pair so runs are deterministic.
    Always an upper bound on the exact matching cost.
    """
    costs = cost_matrix(x, y, p)
    s = x.s
    free_x = list(range(s))
    free_y = list(range(s))
    total = 0.0
    while free_x:
        best = None
        for i in free_x:
            for j in free_y:
                c = costs[i, j]
                if best is None or c < best[0]:
                    best = (c, i, j)
        c, i, j = best
        total += c
        free_x.remove(i)
        free_y.remove(j)
    return float(total)
