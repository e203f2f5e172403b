"""Approximate near-neighbor search on top of the glued hash family.

A core tree hashes the dataset with a fresh family draw, recurses into each
occupied bucket, and stores one random point per node; k levels of recursion
drive the per-query false-positive mass down to n * p2^k while a true r-near
neighbor survives all k levels with probability p1^k.  A forest of about
3 * n^rho / p1 independent trees amplifies the success probability to 0.9.

Queries walk one bucket path per tree, accept any point within
``accept_radius`` (c * r by default), and scan the reached leaf as a last
resort.  Every distance evaluation uses the exact EMD solver, so a returned
answer is always verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from emdlsh.core import Dataset, PointSet, emd_exact
from emdlsh.glued import GluedLsh, build_glued, glued_bucket_bytes, glued_eval
from emdlsh.rng import stream


@dataclass
class CoreNode:
    point_id: int                       # sampled dataset point stored here
    data: Optional[list] = None         # leaf: residual dataset point ids
    hash_draw: Optional[GluedLsh] = None
    children: dict = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.data is not None


@dataclass
class QueryStats:
    point_checks: int = 0
    leaf_scans: int = 0
    trees_tried: int = 0

    @property
    def distance_evals(self) -> int:
        return self.point_checks + self.leaf_scans


def core_preprocess(points: list, ids: list, k: int, r: float, p1: float,
                    p2: float, seed: int) -> CoreNode:
    """Recursive bucket tree over the residual dataset given by ``ids``.

    Depth is exactly k along every branch, except that singleton residuals
    become leaves immediately (a one-point hash split carries no information
    and the leaf scan preserves the success bound).
    """
    rng = stream(seed, "core-node")
    point_id = ids[int(rng.integers(len(ids)))]
    if k == 0 or len(ids) == 1:
        return CoreNode(point_id=point_id, data=list(ids))
    mu = Dataset(tuple(points[i] for i in ids))
    draw = build_glued(mu, r=r, p1=p1, p2=p2,
                       seed=int(rng.integers(2**62)))
    node = CoreNode(point_id=point_id, hash_draw=draw)
    buckets: dict = {}
    for i in ids:
        tag, bucket = glued_eval(draw, points[i])
        buckets.setdefault(glued_bucket_bytes(tag, bucket), []).append(i)
    for key in sorted(buckets):
        node.children[key] = core_preprocess(
            points, buckets[key], k - 1, r, p1, p2,
            seed=int(rng.integers(2**62)))
    return node


def core_query(q: PointSet, node: CoreNode, points: list, accept_radius: float,
               stats: Optional[QueryStats] = None) -> Optional[PointSet]:
    """One root-to-leaf probe; any non-fail answer is within accept_radius."""
    stats = stats if stats is not None else QueryStats()
    stored = points[node.point_id]
    stats.point_checks += 1
    if emd_exact(stored, q).cost <= accept_radius:
        return stored
    if node.is_leaf:
        for i in node.data:
            if i == node.point_id:
                continue
            stats.leaf_scans += 1
            if emd_exact(points[i], q).cost <= accept_radius:
                return points[i]
        return None
    tag, bucket = glued_eval(node.hash_draw, q)
    child = node.children.get(glued_bucket_bytes(tag, bucket))
    if child is None:
        return None
    return core_query(q, child, points, accept_radius, stats)


@dataclass
class AnnIndex:
    points: list
    trees: list
    r: float
    p1: float
    p2: float
    k: int
    repetitions: int
    accept_radius: float
    seed: int


def build_index(P: Dataset, r: float, p1: float, p2: float, seed: int,
                accept_radius: Optional[float] = None) -> AnnIndex:
    """Forest with k = ceil(log_{1/p2} n) and about 3 n^rho / p1 trees.

    ``accept_radius`` defaults to c*r with the approximation c derived from
    the hash family parameters.
    """
    n = P.n
    k = max(1, math.ceil(math.log(n) / math.log(1.0 / p2))) if n > 1 else 1
    rho = math.log(1.0 / p1) / math.log(1.0 / p2)
    repetitions = max(1, math.ceil(3.0 * n**rho / p1))
    if (1.0 - p1**k) ** repetitions > 0.1:
        raise ValueError("repetition count too small for the 0.9 success target")
    if accept_radius is None:
        from emdlsh.glued import derive_params
        accept_radius = derive_params(r, p1, p2, P.s, P.d).c * r
    points = list(P.points)
    ids = list(range(n))
    trees = [core_preprocess(points, ids, k, r, p1, p2,
                             seed=int(stream(seed, "ann-tree", t).integers(2**62)))
             for t in range(repetitions)]
    return AnnIndex(points=points, trees=trees, r=r, p1=p1, p2=p2, k=k,
                    repetitions=repetitions, accept_radius=float(accept_radius),
                    seed=seed)


def query(index: AnnIndex, q: PointSet) -> Optional[PointSet]:
    """First non-fail answer across the forest, or None."""
    answer, _ = query_with_stats(index, q)
    return answer


def query_with_stats(index: AnnIndex, q: PointSet):
    stats = QueryStats()
    for tree in index.trees:
        stats.trees_tried += 1
        answer = core_query(q, tree, index.points, index.accept_radius, stats)
        if answer is not None:
            return answer, stats
    return None, stats
