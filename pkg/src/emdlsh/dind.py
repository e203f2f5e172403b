"""Data-independent LSH for EMD over the hypercube.

A draw at level l projects every element onto 2^l coordinates sampled with
replacement, counts how many elements of the point land on each projected
pattern, and keeps the pair (pattern, multiplicity) only when a lazily
realized Bernoulli indicator with parameter d / (width * 2^(l+1)) fires.  The
bucket is the canonical set of kept pairs, so two points separate only if
some kept indicator sees different multiplicities, which happens with
probability at most EMD(x, y) / width.

Patterns are identified by the element's values on the distinct sampled
coordinates (the draw multiplicities are shared by all elements, so they
cannot distinguish anything); this keeps storage O(d) even when 2^l far
exceeds d.  In grid mode the projection rides the same lazy unary-encoding
machinery as the quadtree, so split events match an explicit encoding in
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from emdlsh.core import GRID, HYPERCUBE, PointSet
from emdlsh.quadtree import _LazyUnaryLevels, tree_depth_levels
from emdlsh.rng import prf_bytes, prf_uniform, stream, stream_key


@dataclass
class DataIndHash:
    level: int
    width: float               # separation scale: Pr[split] <= EMD / width
    d: int                     # ambient vector dimension
    seed: int
    mode: str = HYPERCUBE
    delta: Optional[int] = None
    counts: np.ndarray = field(default=None, repr=False)   # hypercube draw counts
    _lazy: object = field(default=None, repr=False)        # grid-mode projector
    _mask: np.ndarray = field(default=None, repr=False)
    _keys: tuple = field(default=None, repr=False)

    @property
    def d_eff(self) -> int:
        return self.d if self.mode == HYPERCUBE else self.d * self.delta

    @property
    def bernoulli_p(self) -> float:
        return min(1.0, self.d_eff / (self.width * 2.0 ** (self.level + 1)))

    @property
    def mask(self) -> np.ndarray:
        if self._mask is None:
            self._mask = np.flatnonzero(self.counts > 0)
        return self._mask

    def _prf_keys(self) -> tuple:
        if self._keys is None:
            self._keys = (stream_key(self.seed, "dind-indicators", self.level),
                          stream_key(self.seed, "dind-bucket", self.level))
        return self._keys

    def _pattern_labels(self, elements: np.ndarray) -> list:
        if self.mode == GRID:
            mat = self._lazy.label_matrix(self.level, elements)
            return [row.tobytes() for row in mat]
        proj = elements[:, self.mask].astype(np.uint8)
        if proj.shape[1] == 0:
            return [b""] * elements.shape[0]
        packed = np.packbits(proj, axis=1)
        return [row.tobytes() for row in packed]

    def eval(self, x: PointSet) -> bytes:
        if x.d != self.d:
            raise ValueError(f"dimension mismatch: {x.d} vs {self.d}")
        if x.mode != self.mode:
            raise ValueError(f"mode mismatch: {x.mode} vs {self.mode}")
        labels = self._pattern_labels(x.elements)
        mult: dict = {}
        for lab in labels:
            mult[lab] = mult.get(lab, 0) + 1
        p = self.bernoulli_p
        ind_key, bucket_key = self._prf_keys()
        kept = []
        for lab, count in mult.items():
            for k in range(1, count + 1):
                if prf_uniform(ind_key, lab, k) < p:
                    kept.append((lab, k))
        kept.sort()
        return prf_bytes(bucket_key, *(part for item in kept for part in item))


def _check_level(width: float, level: int, d_eff: int):
    if width <= 0:
        raise ValueError("separation scale must be positive")
    if not 0 <= level <= max(tree_depth_levels(d_eff), 0):
        raise ValueError(f"level must lie in [0, {tree_depth_levels(d_eff)}]")


def sample_dind_hash(width: float, level: int, seed: int, d: int,
                     mode: str = HYPERCUBE, delta: Optional[int] = None) -> DataIndHash:
    """Draw one hash at the given level (0 <= level <= L for the dimension)."""
    d_eff = d if mode == HYPERCUBE else d * (delta or 0)
    _check_level(width, level, d_eff)
    h = DataIndHash(level=level, width=float(width), d=d, seed=seed,
                    mode=mode, delta=delta)
    if mode == HYPERCUBE:
        rng = stream(seed, "dind-projection", level)
        h.counts = rng.multinomial(2**level, np.full(d, 1.0 / d))
    elif mode == GRID:
        h._lazy = _LazyUnaryLevels(d, delta, level + 1,
                                   int(stream(seed, "dind-lazy").integers(2**62)))
    else:
        raise ValueError("data-independent hashing supports hypercube/grid modes")
    return h


def sample_dind_hashes(width: float, level: int, seed: int, d: int,
                       count: int) -> list:
    """Independent hypercube-mode draws in bulk (one vectorized projection
    sample); same distribution as repeated sample_dind_hash calls."""
    _check_level(width, level, d)
    rng = stream(seed, "dind-projection-batch", level)
    counts = rng.multinomial(2**level, np.full(d, 1.0 / d), size=count)
    seeds = rng.integers(2**62, size=count)
    return [DataIndHash(level=level, width=float(width), d=d,
                        seed=int(seeds[i]), counts=counts[i])
            for i in range(count)]


def dind_eval(h: DataIndHash, x: PointSet) -> bytes:
    return h.eval(x)
