"""The composite data-dependent hash family.

A draw combines one data-independent hash per quadtree level with one
sample-tree hash, plus per-level tables of how much dataset mass each bucket
holds.  Evaluating a point walks the levels in order and commits to the first
level whose bucket is light (mass at most p2/3); if every level's bucket is
heavy the point falls through to the sample-tree hash, whose guarantee only
needs the point to sit in a dense region of the dataset, which heaviness at
every level certifies.

The output is (level tag, bucket); two points collide only when both the tag
and the bucket agree.  The tag is a function of the bucket alone, so points
colliding at every level necessarily agree on tags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from emdlsh.core import Dataset, PointSet
from emdlsh.dind import DataIndHash, sample_dind_hash
from emdlsh.quadtree import tree_depth_levels
from emdlsh.rng import stream
from emdlsh.sampletree import (
    L1Lsh,
    SampleTreeDraw,
    build_sampletree,
    default_sample_count,
    sample_l1_lsh,
    sampletree_hash_eval,
)

STAR = "*"


@dataclass(frozen=True)
class GluedParams:
    """All derived constants of the family, pinned at construction."""

    r: float                 # close threshold
    p1: float                # close-collision sensitivity
    p2: float                # far-collision sensitivity
    s: int
    d: int
    levels: int              # L, from the quadtree depth rule
    width: float             # separation scale of the per-level hashes
    dense_mass: float        # bucket-mass level certifying local density
    tree_fail: float         # sample-tree non-contraction failure probability
    log_factor: float        # fitted envelope of the dense-expansion constant
    l1_width: float          # grid width of the l_1 hash on embeddings
    c: float                 # resulting approximation factor
    sample_count: int        # points drawn into each sample tree

    def __post_init__(self):
        if not 0.0 < self.p2 < self.p1 < 1.0:
            raise ValueError("sensitivities must satisfy 0 < p2 < p1 < 1")
        if self.r <= self.s:
            raise ValueError("close threshold must exceed the set size s")
        for name in ("width", "dense_mass", "tree_fail", "l1_width", "c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"derived parameter {name} must be positive")

    @property
    def mass_bound(self) -> float:
        return self.p2 / 3.0


def derive_params(r: float, p1: float, p2: float, s: int, d: int) -> GluedParams:
    """Deterministic parameter arithmetic for the family."""
    if not 0.0 < p2 < p1 < 1.0:
        raise ValueError("sensitivities must satisfy 0 < p2 < p1 < 1")
    if r <= s:
        raise ValueError("close threshold must exceed the set size s")
    levels = tree_depth_levels(d)
    width = 4.0 * (levels + 1) * r / (1.0 - p1)
    dense_mass = (1.0 - p1) * p2 / 6.0
    tree_fail = p2 / 3.0
    ratio = s * d / (tree_fail * dense_mass)
    log_factor = (8.0 * math.log(ratio)
                  * math.log(math.log(max(s * d / dense_mass, math.e**2))) ** 2)
    l1_width = ((log_factor * math.log(20.0 * (levels + 1) / (1.0 - p1))
                 + math.log(1.0 / (1.0 - p1))) * width / (levels + 1))
    c = math.log(3.0 / p2) * l1_width / r
    return GluedParams(r=float(r), p1=float(p1), p2=float(p2), s=s, d=d,
                       levels=levels, width=width, dense_mass=dense_mass,
                       tree_fail=tree_fail, log_factor=log_factor,
                       l1_width=l1_width, c=c,
                       sample_count=default_sample_count(s, d, dense_mass))


@dataclass
class GluedLsh:
    params: GluedParams
    level_hashes: list                  # DataIndHash per level 0..L
    star_draw: SampleTreeDraw
    star_lsh: L1Lsh
    mass_tables: list = field(repr=False)   # per level: bucket -> mass of mu
    mu: Dataset = None
    n: int = 0

    def level_eval(self, level: int, z: PointSet) -> bytes:
        return self.level_hashes[level].eval(z)

    def bucket_mass(self, level: int, bucket: bytes) -> float:
        return self.mass_tables[level].get(bucket, 0.0)

    def star_eval(self, z: PointSet) -> bytes:
        return sampletree_hash_eval(self.star_draw, self.star_lsh, z)


def build_glued(mu: Dataset, r: float, p1: float, p2: float, seed: int) -> GluedLsh:
    """Draw the full family for mu and tabulate per-level bucket masses."""
    params = derive_params(r, p1, p2, mu.s, mu.d)
    level_hashes = [
        sample_dind_hash(width=params.width, level=lev,
                         seed=int(stream(seed, "glued-level", lev).integers(2**62)),
                         d=mu.d)
        for lev in range(params.levels + 1)
    ]
    star_draw = build_sampletree(
        mu, m=params.sample_count, delta=params.tree_fail,
        seed=int(stream(seed, "glued-star-tree").integers(2**62)))
    star_lsh = sample_l1_lsh(
        params.l1_width, seed=int(stream(seed, "glued-star-lsh").integers(2**62)))
    mass_tables = []
    for h in level_hashes:
        table: dict = {}
        for point in mu.points:
            b = h.eval(point)
            table[b] = table.get(b, 0.0) + 1.0 / mu.n
        mass_tables.append(table)
    return GluedLsh(params=params, level_hashes=level_hashes,
                    star_draw=star_draw, star_lsh=star_lsh,
                    mass_tables=mass_tables, mu=mu, n=mu.n)


def glued_eval(gl: GluedLsh, z: PointSet):
    """(tag, bucket): the smallest level whose bucket is light, else the
    sample-tree fallback tagged '*'.  Unseen buckets have mass zero."""
    for level in range(gl.params.levels + 1):
        bucket = gl.level_eval(level, z)
        if gl.bucket_mass(level, bucket) <= gl.params.mass_bound:
            return level, bucket
    return STAR, gl.star_eval(z)


def glued_bucket_bytes(tag, bucket: bytes) -> bytes:
    """Serialize a glued output for use as a dictionary key."""
    head = b"\xff" if tag == STAR else int(tag).to_bytes(2, "little")
    return head + bucket
