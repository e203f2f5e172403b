"""Sample-based data-dependent tree hashing.

A draw takes m i.i.d. points from the dataset distribution, collects their
elements Omega, augments with every Hamming-1 neighbor (Nbr), and builds a
quadtree over the augmented set with a data-independent weight scale of order
log(m*s*d/delta).  The neighborhood augmentation is what makes "one stray
coordinate" cheap for vectors close to the sample, and the weight scale makes
the tree metric non-contracting up to probability delta.

Tree EMD embeds isometrically into l_1: one coordinate per tree edge, valued
edge weight times the number of a point's elements below the edge.  Composing
with a randomly-shifted-grid LSH for l_1 yields the data-dependent hash
family used as the fallback route of the glued hash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from emdlsh.core import Dataset, PointSet
from emdlsh.quadtree import QuadTree
from emdlsh.rng import prf_bytes, prf_uniform, stream, stream_key


def dedup_rows(arr: np.ndarray) -> np.ndarray:
    """Unique rows in a canonical (packed-bytes) order; fast for wide uint8."""
    arr = np.ascontiguousarray(arr)
    packed = np.packbits(arr, axis=1) if arr.dtype == np.uint8 else arr
    keys = packed.view([("", packed.dtype)] * packed.shape[1]).ravel()
    _, index = np.unique(keys, return_index=True)
    return arr[index]


def nbr(omega: np.ndarray) -> np.ndarray:
    """Deduplicated union of each element with its d single-bit flips."""
    omega = np.atleast_2d(np.asarray(omega, dtype=np.uint8))
    n, d = omega.shape
    flips = np.repeat(omega, d, axis=0)
    idx = np.tile(np.arange(d), n)
    flips[np.arange(n * d), idx] ^= 1
    return dedup_rows(np.concatenate([omega, flips]))


@dataclass
class SampleTreeDraw:
    tree: QuadTree
    omega: np.ndarray          # sampled element multiset
    omega_hat: np.ndarray      # Nbr(omega), deduplicated
    sampled_ids: np.ndarray    # which dataset points were drawn
    m: int
    scale: int                 # data-independent weight scale
    delta: float
    seed: int


def indep_weight_scale(m: int, s: int, d: int, delta: float) -> int:
    """ceil(4 ln(m s d / delta)); large enough for the non-contraction bound."""
    return int(math.ceil(4.0 * math.log(m * s * d / delta)))


def default_sample_count(s: int, d: int, alpha: float) -> int:
    """ceil(16 ln(s d) / alpha) samples, enough for dense points to be covered."""
    return int(math.ceil(16.0 * math.log(s * d) / alpha))


def build_sampletree(mu: Dataset, m: int, delta: float, seed: int) -> SampleTreeDraw:
    """Draw m points from mu and build the neighborhood-augmented tree."""
    if m < 1:
        raise ValueError("sample count must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("failure probability must lie in (0, 1)")
    rng = stream(seed, "sampletree-draws")
    ids = rng.integers(0, mu.n, size=m)
    omega = np.concatenate([mu.points[int(i)].elements for i in ids])
    omega_hat = nbr(dedup_rows(omega))
    scale = indep_weight_scale(m, mu.s, mu.d, delta)
    tree = QuadTree.build(omega_hat, indep_scale=scale,
                          seed=int(stream(seed, "sampletree-tree").integers(2**62)))
    return SampleTreeDraw(tree=tree, omega=omega, omega_hat=omega_hat,
                          sampled_ids=ids, m=m, scale=scale, delta=delta, seed=seed)


@dataclass
class SparseVector:
    """Nonnegative sparse vector over the edge-key universe of one tree."""

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(v < 0 for v in self.entries.values()):
            raise ValueError("embedding entries must be nonnegative")

    @property
    def nnz(self) -> int:
        return sum(1 for v in self.entries.values() if v != 0)

    def l1_distance(self, other: "SparseVector") -> float:
        keys = self.entries.keys() | other.entries.keys()
        return float(sum(abs(self.entries.get(k, 0.0) - other.entries.get(k, 0.0))
                         for k in keys))


def embed_l1(draw: SampleTreeDraw, x: PointSet) -> SparseVector:
    """Isometric tree-EMD embedding: entry[edge] = weight * #elements below it."""
    tree = draw.tree
    if x.d != tree.d:
        raise ValueError(f"dimension mismatch: {x.d} vs {tree.d}")
    counts: dict = {}
    weights: dict = {}
    for a in x.elements:
        for key, w in tree.path_weights(a):
            counts[key] = counts.get(key, 0) + 1
            weights[key] = w
    return SparseVector({k: weights[k] * counts[k] for k in counts})


def tree_emd_bruteforce(draw: SampleTreeDraw, x: PointSet, y: PointSet) -> float:
    """Minimum matching cost under the tree metric, by s! enumeration."""
    import itertools

    pair = np.array([[draw.tree.tree_distance(a, b) for b in y.elements]
                     for a in x.elements])
    idx = range(x.s)
    return float(min(sum(pair[i, p] for i, p in zip(idx, perm))
                     for perm in itertools.permutations(idx)))


@dataclass(frozen=True)
class L1Lsh:
    """Randomly-shifted unit grids of width gamma over a lazily-discovered
    sparse coordinate universe.

    Separation probability is at most |x-y|_1/gamma, collision probability at
    most exp(-|x-y|_1/gamma).  Offsets are a keyed PRF of the coordinate, so
    re-evaluation is consistent without storing tables.
    """

    gamma: float
    seed: int

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("scale must be positive")

    def _offset(self, coord: bytes) -> float:
        return prf_uniform(stream_key(self.seed, "l1-lsh-offsets"), coord) * self.gamma

    def cell(self, coord: bytes, value: float) -> int:
        return math.floor((value + self._offset(coord)) / self.gamma)

    def eval(self, v: SparseVector) -> bytes:
        # cells of implicit zeros are 0, so only nonzero cells identify the bucket
        items = []
        for coord, value in v.entries.items():
            c = self.cell(coord, value)
            if c != 0:
                items.append((coord, c))
        items.sort()
        key = stream_key(self.seed, "l1-lsh-bucket")
        return prf_bytes(key, *(p for item in items for p in item))


def sample_l1_lsh(gamma: float, seed: int) -> L1Lsh:
    return L1Lsh(gamma=float(gamma), seed=seed)


def l1_lsh_eval(lsh: L1Lsh, v: SparseVector) -> bytes:
    return lsh.eval(v)


def sampletree_hash_eval(draw: SampleTreeDraw, lsh: L1Lsh, x: PointSet) -> bytes:
    """One evaluation of the composed hash: embed into l_1, then grid-hash."""
    return lsh.eval(embed_l1(draw, x))
