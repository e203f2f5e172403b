"""Synthetic dataset generation and the on-disk dataset format.

File format (human-inspectable, diff-able):

    EMDSET v1 <mode> <n> <s> <d> [<Delta>]
    <s lines of space-separated coordinates>   # point 1
    <blank line>
    ...                                        # points 2..n

Real-mode coordinates are written with repr-level precision so a round trip
is bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from emdlsh.core import GRID, HYPERCUBE, MODES, REAL, Dataset, PointSet, emd_exact
from emdlsh.rng import stream


class FormatError(ValueError):
    """Raised when a dataset file does not follow the EMDSET format."""


@dataclass
class GeneratedData:
    """A synthetic dataset plus the planted structure used by benchmarks."""

    dataset: Dataset
    cluster_of: list                     # cluster index per dataset point
    centers: np.ndarray
    queries: list = field(default_factory=list)       # planted near queries
    near_ids: list = field(default_factory=list)      # their dataset neighbors
    far_queries: list = field(default_factory=list)   # verified far queries


def _clustered_point(center, radius, mode, delta, rng):
    d = center.shape[0]
    if mode == HYPERCUBE:
        out = center.copy()
        if radius:
            out[rng.integers(0, d, size=radius)] ^= 1
        return out
    if mode == GRID:
        out = center + rng.integers(-radius, radius + 1, size=d)
        return np.clip(out, 1, delta)
    return center + radius * rng.normal(size=d)


def gen_clustered(n: int, s: int, d: int, mode: str, delta: Optional[int],
                  n_clusters: int, radius: int, rng) -> GeneratedData:
    """n points in n_clusters groups; every element sits within the stated
    radius of its cluster center."""
    if mode == HYPERCUBE:
        centers = rng.integers(0, 2, size=(n_clusters, d)).astype(np.uint8)
    elif mode == GRID:
        centers = rng.integers(1, delta + 1, size=(n_clusters, d))
    else:
        centers = rng.normal(size=(n_clusters, d)) * 10.0
    points = []
    cluster_of = []
    for i in range(n):
        c = i % n_clusters
        elems = np.stack([_clustered_point(centers[c], radius, mode, delta, rng)
                          for _ in range(s)])
        points.append(PointSet(elems, mode))
        cluster_of.append(c)
    return GeneratedData(dataset=Dataset(tuple(points)), cluster_of=cluster_of,
                         centers=centers)


def gen_uniform(n: int, s: int, d: int, mode: str, delta: Optional[int],
                rng) -> GeneratedData:
    if mode == HYPERCUBE:
        pts = [PointSet(rng.integers(0, 2, size=(s, d)), mode) for _ in range(n)]
        centers = np.zeros((0, d), dtype=np.uint8)
    elif mode == GRID:
        pts = [PointSet(rng.integers(1, delta + 1, size=(s, d)), mode)
               for _ in range(n)]
        centers = np.zeros((0, d), dtype=np.int64)
    else:
        pts = [PointSet(rng.normal(size=(s, d)), mode) for _ in range(n)]
        centers = np.zeros((0, d))
    return GeneratedData(dataset=Dataset(tuple(pts)),
                         cluster_of=list(range(n)), centers=centers)


def plant_near_query(point: PointSet, budget: int, rng) -> PointSet:
    """Flip ``budget`` distinct (element, coordinate) slots of a hypercube
    point; the EMD to the original is at most the budget, and exactly the
    budget when the flips do not let elements swap partners."""
    s, d = point.elements.shape
    if budget > s * d:
        raise ValueError(f"flip budget {budget} exceeds the {s * d} available slots")
    flat = point.elements.copy().reshape(-1)
    slots = rng.choice(s * d, size=budget, replace=False)
    flat[slots] ^= 1
    return PointSet(flat.reshape(s, d), HYPERCUBE)


def gen_planted(n: int, s: int, d: int, n_clusters: int, radius: int,
                near_budget: int, far_margin: float, n_queries: int,
                rng, verify_s_max: int = 4) -> GeneratedData:
    """Clustered hypercube data plus planted near queries and verified far
    queries.

    Near queries copy a dataset point and flip at most ``near_budget`` slots,
    so a true near neighbor within the budget always exists.  Far queries are
    redrawn until exact EMD to every dataset point is at least
    far_margin * near_budget (verification is exact and only feasible at
    small s, hence the guard).
    """
    if near_budget < 1:
        raise ValueError("near budget must be at least one flip")
    data = gen_clustered(n, s, d, HYPERCUBE, None, n_clusters, radius, rng)
    points = data.dataset.points
    for _ in range(n_queries):
        pid = int(rng.integers(n))
        q = plant_near_query(points[pid], near_budget, rng)
        if s <= verify_s_max:
            assert emd_exact(q, points[pid]).cost <= near_budget
        data.queries.append(q)
        data.near_ids.append(pid)
    threshold = far_margin * near_budget
    if threshold > s * d:
        raise ValueError("far margin exceeds the diameter of the cube")
    attempts = 0
    while len(data.far_queries) < n_queries:
        attempts += 1
        if attempts > 200 * n_queries:
            raise ValueError("could not plant far queries at this margin")
        q = PointSet(rng.integers(0, 2, size=(s, d)), HYPERCUBE)
        if s <= verify_s_max:
            if all(emd_exact(q, p).cost >= threshold for p in points):
                data.far_queries.append(q)
        else:
            data.far_queries.append(q)
    return data


# -- serialization ----------------------------------------------------------


def _format_value(v, mode: str) -> str:
    if mode == REAL:
        return repr(float(v))
    return str(int(v))


def save_dataset(dataset: Dataset, path, delta: Optional[int] = None):
    mode = dataset.mode
    header = f"EMDSET v1 {mode} {dataset.n} {dataset.s} {dataset.d}"
    if mode == GRID:
        if delta is None:
            delta = int(max(int(p.elements.max()) for p in dataset.points))
        header += f" {delta}"
    lines = [header]
    for p in dataset.points:
        for row in p.elements:
            lines.append(" ".join(_format_value(v, mode) for v in row))
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path, expect_mode: Optional[str] = None):
    """Read a dataset file; returns (Dataset, delta-or-None)."""
    with open(path) as fh:
        raw = fh.read()
    lines = raw.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError(f"{path}: empty dataset file")
    head = lines[0].split()
    if len(head) < 5 or head[0] != "EMDSET" or head[1] != "v1":
        raise FormatError(f"{path}: missing EMDSET v1 header")
    mode = head[2]
    if mode not in MODES:
        raise FormatError(f"{path}: unknown mode {mode!r}")
    if expect_mode is not None and mode != expect_mode:
        raise FormatError(
            f"{path}: dataset mode {mode!r} does not match expected {expect_mode!r}")
    try:
        n, s, d = (int(v) for v in head[3:6])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header counts") from exc
    delta = None
    if mode == GRID:
        if len(head) < 7:
            raise FormatError(f"{path}: grid datasets need a Delta field")
        delta = int(head[6])
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != n * s:
        raise FormatError(f"{path}: expected {n * s} coordinate rows, got {len(rows)}")
    parse = float if mode == REAL else int
    points = []
    for i in range(n):
        block = [
            [parse(tok) for tok in rows[i * s + j].split()] for j in range(s)
        ]
        arr = np.array(block)
        if arr.shape != (s, d):
            raise FormatError(f"{path}: point {i} has shape {arr.shape}, "
                              f"expected ({s}, {d})")
        points.append(PointSet(arr, mode))
    return Dataset(tuple(points)), delta
