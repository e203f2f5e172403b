"""Dynamic, data-dependent quadtree over the Hamming cube.

The tree has depths 0..L+1.  A node at depth l+1 refines its parent by the
value of a random coordinate projection: level l (l < L) samples 2^l
coordinates with replacement, level L is the identity, so two vectors share a
depth-(l+1) node exactly when they agree on every coordinate sampled up to
level l.  Only nodes whose element set intersects the stored set Omega are
materialized; each holds a uniformly-sampled representative member.

Once a node holds a single element, the whole chain below it is that element
alone: such a node is stored once and marked terminal, and the implicit chain
below it is recovered from the member's own path when queried.  Insertions
split a terminal chain at the point of divergence; deletions re-compress, so
the materialized structure is a canonical function of (level samples, Omega).

Edge weights: if the child node is nonempty, the l_1 distance between the two
endpoint representatives; otherwise scale * d / 2^l for a parent at depth l.
The representative telescoping makes tree distances never contract below l_1
for stored vectors, while rep resampling on insert/delete keeps every rep
uniform over its node's members after any update sequence.

Grid mode ([Delta]^d vectors) runs the same tree over the implicit unary
encoding of dimension d*Delta without materializing it: per level and per
coordinate block, sample counts are realized lazily down a dyadic partition
with conditional binomial draws, so any query sequence is consistent with one
fixed draw of the level projections.

Node keys are 128-bit rolling digests of (parent key, depth, projected
pattern); key collisions at desk scale are negligible.  Concurrency contract:
one writer (insert/delete) at a time, readers must not overlap a writer.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from emdlsh.core import GRID, HYPERCUBE
from emdlsh.rng import prf_bytes, stream, stream_key


def tree_depth_levels(d_eff: int) -> int:
    """Number of sampled levels L = ceil(2 log2 d_eff); the tree has depth L+1."""
    if d_eff < 1:
        raise ValueError("dimension must be positive")
    if d_eff == 1:
        return 0
    return int(math.ceil(2.0 * math.log2(d_eff)))


def sample_binomial(n: int, q: float, rng: np.random.Generator) -> int:
    """Exact Binomial(n, q) draw from the given stream."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if n < 0:
        raise ValueError("count must be nonnegative")
    return int(rng.binomial(n, q))


def unary_encode(x: np.ndarray, delta: int) -> np.ndarray:
    """Order-preserving unary embedding of [Delta]^d into {0,1}^(d*Delta).

    Position j of block tau is 1 exactly when x[tau] >= j, so l_1 distances
    are preserved.  Used explicitly only at small Delta (tests); the tree
    itself defers this encoding.
    """
    x = np.asarray(x, dtype=np.int64)
    thresholds = np.arange(1, delta + 1)
    return (x[:, None] >= thresholds[None, :]).astype(np.uint8).reshape(-1)


class _HypercubeLevels:
    """Explicit level projections: occupancy of 2^l coordinate draws."""

    def __init__(self, d: int, n_levels: int, seed: int):
        self.d = d
        self.counts = []
        self.masks = []
        for lev in range(n_levels):
            rng = stream(seed, "level", lev)
            counts = rng.multinomial(2**lev, np.full(d, 1.0 / d))
            self.counts.append(counts)
            self.masks.append(np.flatnonzero(counts > 0))

    def label_matrix(self, level: int, vectors: np.ndarray) -> np.ndarray:
        """Per-row pattern labels at the given level, one fixed-width row each."""
        if level < len(self.masks):
            proj = vectors[:, self.masks[level]]
        else:  # identity level
            proj = vectors
        if proj.shape[1] == 0:
            return np.zeros((vectors.shape[0], 0), dtype=np.uint8)
        return np.packbits(proj.astype(np.uint8), axis=1)


class _LazyUnaryLevels:
    """Lazy level projections over the implicit unary encoding.

    Per (level, block) the number of coordinate samples falling at unary
    positions <= v is realized on demand by descending a dyadic partition of
    [0, Delta] with conditional binomial draws keyed by the cell bounds, so
    realized values do not depend on query order and previously answered
    queries are never contradicted.  Two vectors project identically at a
    level exactly when these cumulative counts agree on every block.
    """

    def __init__(self, d: int, delta: int, n_levels: int, seed: int):
        self.d = d
        self.delta = delta
        self.seed = seed
        self.block_totals = []
        for lev in range(n_levels):
            rng = stream(seed, "unary-blocks", lev)
            self.block_totals.append(rng.multinomial(2**lev, np.full(d, 1.0 / d)))
        self._cells: dict = {}

    def _cell_count(self, level: int, block: int, lo: int, hi: int) -> int:
        if lo == 0 and hi == self.delta:
            return int(self.block_totals[level][block])
        return self._cells[(level, block, lo, hi)]

    def _realize_children(self, level: int, block: int, lo: int, hi: int):
        mid = (lo + hi) // 2
        if (level, block, lo, mid) in self._cells:
            return
        n = self._cell_count(level, block, lo, hi)
        rng = stream(self.seed, "unary-split", level, block, lo, hi)
        left = sample_binomial(n, (mid - lo) / (hi - lo), rng)
        self._cells[(level, block, lo, mid)] = left
        self._cells[(level, block, mid, hi)] = n - left

    def cumulative(self, level: int, block: int, v: int) -> int:
        """Samples of the level landing at unary positions <= v in the block."""
        if v <= 0:
            return 0
        if v >= self.delta:
            return int(self.block_totals[level][block])
        total = 0
        lo, hi = 0, self.delta
        while True:
            if v == hi:
                return total + self._cell_count(level, block, lo, hi)
            mid = (lo + hi) // 2
            self._realize_children(level, block, lo, hi)
            if v <= mid:
                lo, hi = lo, mid
            else:
                total += self._cell_count(level, block, lo, mid)
                lo, hi = mid, hi

    def label_matrix(self, level: int, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.int64)
        if level >= len(self.block_totals):  # identity level
            return vectors
        out = np.empty((vectors.shape[0], self.d), dtype=np.uint64)
        for i, row in enumerate(vectors):
            for tau in range(self.d):
                out[i, tau] = self.cumulative(level, tau, int(row[tau]))
        return out


class TreeNode:
    __slots__ = ("key", "depth", "parent_key", "pattern", "members", "rep",
                 "terminal")

    def __init__(self, key: bytes, depth: int, parent_key: Optional[bytes],
                 pattern: bytes, members=(), rep: Optional[int] = None,
                 terminal: bool = False):
        self.key = key
        self.depth = depth
        self.parent_key = parent_key
        self.pattern = pattern
        self.members: set[int] = set(members)
        self.rep = rep
        self.terminal = terminal


@dataclass
class PathReport:
    """Root-to-leaf paths, as (node key, incoming edge weight) lists, of every
    stored vector whose weighted path changed during an update."""

    element_paths: dict = field(default_factory=dict)

    @property
    def touched(self) -> int:
        return len(self.element_paths)

    def __post_init__(self):
        for path in self.element_paths.values():
            for _, w in path:
                if w < 0:
                    raise ValueError("edge weights must be nonnegative")


class QuadTree:
    """See the module docstring.  Build with :meth:`QuadTree.build`."""

    def __init__(self, d: int, indep_scale: float = 1.0, seed: int = 0,
                 rep_seed: Optional[int] = None, mode: str = HYPERCUBE,
                 delta: Optional[int] = None):
        if indep_scale < 1.0:
            raise ValueError("data-independent weight scale must be >= 1")
        if mode not in (HYPERCUBE, GRID):
            raise ValueError("quadtrees support hypercube and grid modes")
        if mode == GRID and (delta is None or delta < 1):
            raise ValueError("grid mode needs the coordinate bound Delta")
        self.d = d
        self.mode = mode
        self.delta = delta
        self.d_eff = d if mode == HYPERCUBE else d * delta
        self.levels_count = tree_depth_levels(self.d_eff)
        self.indep_scale = float(indep_scale)
        self.seed = seed
        self._tree_key = stream_key(seed, "tree-structure")
        self._rep_rng = stream(seed if rep_seed is None else rep_seed, "tree-reps")
        if mode == HYPERCUBE:
            self._levels = _HypercubeLevels(d, self.levels_count, seed)
        else:
            self._levels = _LazyUnaryLevels(d, delta, self.levels_count, seed)
        self.root_key = prf_bytes(self._tree_key, "root")
        root = TreeNode(self.root_key, 0, None, b"")
        self.nodes: dict[bytes, TreeNode] = {self.root_key: root}
        self._vectors: dict[int, np.ndarray] = {}
        self._by_value: dict[bytes, list] = {}
        self._path_cache: dict[int, list] = {}
        self._next_id = 0

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, vectors, indep_scale: float = 1.0, seed: int = 0,
              rep_seed: Optional[int] = None, mode: str = HYPERCUBE,
              delta: Optional[int] = None) -> "QuadTree":
        """Build over a multiset of vectors; an empty multiset is allowed and
        yields a tree whose weights are all data-independent."""
        vectors = np.atleast_2d(np.asarray(vectors))
        if vectors.ndim != 2 or vectors.shape[1] == 0:
            raise ValueError("vectors must form an (n, d) array with d >= 1")
        tree = cls(d=vectors.shape[1], indep_scale=indep_scale, seed=seed,
                   rep_seed=rep_seed, mode=mode, delta=delta)
        if vectors.shape[0]:
            tree._bulk_insert(vectors)
        return tree

    def _node_key(self, parent_key: bytes, depth: int, label: bytes) -> bytes:
        data = parent_key + depth.to_bytes(2, "little") + label
        return hashlib.blake2b(data, digest_size=16, key=self._tree_key).digest()

    def _check_vector(self, a) -> np.ndarray:
        a = np.asarray(a)
        if a.shape != (self.d,):
            raise ValueError(f"dimension mismatch: {a.shape} vs ({self.d},)")
        return self._check_matrix(a[None, :])[0]

    def _check_matrix(self, arr: np.ndarray) -> np.ndarray:
        if arr.ndim != 2 or arr.shape[1] != self.d:
            raise ValueError(f"expected (n, {self.d}) vectors, got {arr.shape}")
        if self.mode == HYPERCUBE:
            arr = arr.astype(np.uint8)
            if arr.size and arr.max() > 1:
                raise ValueError("hypercube vectors must be 0/1 valued")
        else:
            arr = arr.astype(np.int64)
            if arr.size and (arr.min() < 1 or arr.max() > self.delta):
                raise ValueError(f"grid coordinates must lie in [1, {self.delta}]")
        return arr

    def _register(self, vec: np.ndarray) -> int:
        vid = self._next_id
        self._next_id += 1
        self._vectors[vid] = vec
        self._by_value.setdefault(vec.tobytes(), []).append(vid)
        return vid

    def _bulk_insert(self, vectors: np.ndarray):
        vectors = self._check_matrix(np.asarray(vectors))
        n = vectors.shape[0]
        ids = np.array([self._register(vectors[i]) for i in range(n)])
        root = self.nodes[self.root_key]
        root.members.update(ids.tolist())
        root.rep = int(ids[int(self._rep_rng.integers(n))])
        if n == 1:
            self._seal_terminal(self.root_key, 1, int(ids[0]))
            return
        active = np.arange(n)                      # rows still descending
        parent_codes = np.zeros(n, dtype=np.int64)
        parent_keys = [self.root_key]
        for depth in range(1, self.levels_count + 2):
            rows = vectors[active]
            label_mat = np.ascontiguousarray(
                self._levels.label_matrix(depth - 1, rows))
            width = label_mat.shape[1] * label_mat.dtype.itemsize
            m = len(active)
            combo = np.empty((m, 8 + width), dtype=np.uint8)
            combo[:, :8] = parent_codes[:, None].view(np.uint8).reshape(m, 8)
            if width:
                combo[:, 8:] = label_mat.view(np.uint8).reshape(m, width)
            rows_view = combo.view([("", np.uint8)] * (8 + width)).ravel()
            _, first_idx, child_codes = np.unique(
                rows_view, return_index=True, return_inverse=True)
            order = np.argsort(child_codes, kind="stable")
            bounds = np.searchsorted(child_codes[order],
                                     np.arange(len(first_idx) + 1))
            sizes = np.diff(bounds)
            picks = (self._rep_rng.random(len(first_idx)) * sizes).astype(np.int64)
            child_keys = []
            keep = []
            for g, i in enumerate(first_idx):
                parent_key = parent_keys[parent_codes[i]]
                key = self._node_key(parent_key, depth, label_mat[i].tobytes())
                group = order[bounds[g]:bounds[g + 1]]
                member_ids = ids[active[group]]
                node = TreeNode(key, depth, parent_key, label_mat[i].tobytes(),
                                members=member_ids.tolist(),
                                rep=int(member_ids[picks[g]]),
                                terminal=sizes[g] == 1)
                self.nodes[key] = node
                child_keys.append(key)
                if sizes[g] > 1:
                    keep.append(group)
            if not keep:
                break
            kept = np.concatenate(keep)
            kept.sort()
            parent_codes = child_codes[kept]
            active = active[kept]
            parent_keys = child_keys

    def _seal_terminal(self, parent_key: bytes, depth: int, member: int):
        """Materialize one terminal node below the parent for a lone member."""
        path = self._member_path(member)
        label = self._levels.label_matrix(
            depth - 1, self._vectors[member][None, :])[0].tobytes()
        key = path[depth]
        self.nodes[key] = TreeNode(key, depth, parent_key, label,
                                   members=(member,), rep=member, terminal=True)

    # -- basic accessors ---------------------------------------------------

    @property
    def size(self) -> int:
        return len(self._vectors)

    def vector(self, element_id: int) -> np.ndarray:
        return self._vectors[element_id]

    def level_sample_counts(self, level: int) -> np.ndarray:
        """Per-coordinate draw counts of a sampled level (hypercube mode)."""
        if self.mode != HYPERCUBE:
            raise ValueError("explicit level samples exist only in hypercube mode")
        return self._levels.counts[level]

    def member_partition(self, depth: int) -> list:
        """Member sets at one depth, implicit singleton chains expanded."""
        parts = []
        for node in self.nodes.values():
            if not node.members:
                continue
            if node.depth == depth:
                parts.append(tuple(sorted(node.members)))
            elif node.terminal and node.depth < depth:
                parts.append(tuple(node.members))
        return sorted(parts)

    def contains_path(self, a) -> bool:
        """True when every node on the vector's path is (implicitly) nonempty."""
        return all(m for _, _, m in self._path_states(self.locate(a)))

    # -- paths and distances ------------------------------------------------

    def locate(self, a) -> list:
        """Node keys of the unique root-to-leaf path of a vector."""
        a = self._check_vector(a)
        keys = [self.root_key]
        row = a[None, :]
        for depth in range(1, self.levels_count + 2):
            label = self._levels.label_matrix(depth - 1, row)[0].tobytes()
            keys.append(self._node_key(keys[-1], depth, label))
        return keys

    def _member_path(self, member: int) -> list:
        path = self._path_cache.get(member)
        if path is None:
            path = self.locate(self._vectors[member])
            self._path_cache[member] = path
        return path

    def _path_states(self, keys: list) -> list:
        """(key, rep id, nonempty) at each depth along a path of keys.

        Below a terminal node the chain is followed through the terminal
        member's own path; once the path leaves every stored chain it is
        empty for good.
        """
        states = []
        chain_member = None
        chain_path = None
        alive = True
        for depth, key in enumerate(keys):
            if not alive:
                states.append((key, None, False))
                continue
            node = self.nodes.get(key)
            if node is not None and node.members:
                states.append((key, node.rep, True))
                if node.terminal:
                    chain_member = next(iter(node.members))
                    chain_path = None
            elif chain_member is not None:
                if chain_path is None:
                    chain_path = self._member_path(chain_member)
                if chain_path[depth] == key:
                    states.append((key, chain_member, True))
                else:
                    alive = False
                    states.append((key, None, False))
            else:
                alive = False
                states.append((key, None, False))
        return states

    def _indep_weight(self, parent_depth: int) -> float:
        return self.indep_scale * self.d_eff / 2.0**parent_depth

    def _state_weight(self, parent_state, child_state, parent_depth: int) -> float:
        _, child_rep, child_ok = child_state
        if not child_ok:
            return self._indep_weight(parent_depth)
        _, parent_rep, _ = parent_state
        pa = self._vectors[parent_rep].astype(np.int64)
        ch = self._vectors[child_rep].astype(np.int64)
        return float(np.abs(pa - ch).sum())

    def edge_weight(self, parent_key: bytes, child_key: bytes) -> float:
        """Weight of the tree edge from a materialized parent to a child key.

        The child may be implicit: either the continuation of the parent's
        terminal chain (weight 0, same representative) or an empty subtree
        (data-independent weight for the parent's depth).
        """
        parent = self.nodes.get(parent_key)
        if parent is None:
            raise ValueError("parent key is not a materialized node")
        child = self.nodes.get(child_key)
        if child is not None:
            if child.parent_key != parent_key:
                raise ValueError("keys are not parent/child adjacent")
            if child.members:
                pa = self._vectors[parent.rep].astype(np.int64)
                ch = self._vectors[child.rep].astype(np.int64)
                return float(np.abs(pa - ch).sum())
        if parent.terminal:
            member = next(iter(parent.members))
            if self._member_path(member)[parent.depth + 1] == child_key:
                return 0.0
        return self._indep_weight(parent.depth)

    def path_weights(self, a) -> list:
        """(node key, incoming edge weight) along the vector's path, depth 1..L+1."""
        states = self._path_states(self.locate(a))
        return [(states[j][0], self._state_weight(states[j - 1], states[j], j - 1))
                for j in range(1, len(states))]

    def tree_distance(self, a, b) -> float:
        """Sum of edge weights below the lowest common ancestor of both paths."""
        sa = self._path_states(self.locate(a))
        sb = self._path_states(self.locate(b))
        split = next((j for j in range(len(sa)) if sa[j][0] != sb[j][0]), None)
        if split is None:
            return 0.0
        total = 0.0
        for j in range(split, len(sa)):
            total += self._state_weight(sa[j - 1], sa[j], j - 1)
            total += self._state_weight(sb[j - 1], sb[j], j - 1)
        return total

    def lazy_unary_locate(self, x) -> list:
        """Grid-mode path keys, distributionally equal to locating the unary
        encoding of x in an explicit (d*Delta)-dimensional hypercube tree."""
        if self.mode != GRID:
            raise ValueError("lazy unary location applies to grid mode only")
        return self.locate(x)

    # -- dynamic updates ----------------------------------------------------

    def _report_for(self, element_ids) -> PathReport:
        return PathReport(element_paths={
            eid: self.path_weights(self._vectors[eid]) for eid in sorted(element_ids)})

    def insert(self, a) -> PathReport:
        """Add one vector instance; reps along its path each move to it with
        probability 1/|members|, and every vector under a changed rep is
        reported with its updated weighted path."""
        a = self._check_vector(a)
        vid = self._register(a)
        affected = {vid}
        keys = self.locate(a)
        chain_member = None
        chain_path = None
        for depth, key in enumerate(keys):
            node = self.nodes.get(key)
            if node is not None:
                if not node.members:  # empty root of an empty tree
                    node.members.add(vid)
                    node.rep = vid
                    continue
                if node.terminal:
                    chain_member = next(iter(node.members))
                    chain_path = self._member_path(chain_member)
                    node.terminal = False
                node.members.add(vid)
                if self._rep_rng.uniform() < 1.0 / len(node.members):
                    node.rep = vid
                    affected.update(node.members)
                continue
            if chain_member is not None and chain_path[depth] == key:
                # the new vector keeps following the terminal chain: the
                # chain node becomes real and shared
                label = self._levels.label_matrix(
                    depth - 1, a[None, :])[0].tobytes()
                node = TreeNode(key, depth, keys[depth - 1], label,
                                members=(chain_member, vid))
                node.rep = vid if self._rep_rng.uniform() < 0.5 else chain_member
                if node.rep == vid:
                    affected.add(chain_member)
                self.nodes[key] = node
                continue
            if chain_member is not None:
                # diverged: seal the old member's side before opening ours
                self._seal_terminal(keys[depth - 1], depth, chain_member)
                chain_member = None
            self._seal_terminal(keys[depth - 1], depth, vid)
            break
        return self._report_for(affected)

    def _recompress(self, node: TreeNode):
        """Drop the materialized chain below a node that became a singleton."""
        member = next(iter(node.members))
        node.terminal = True
        if node.rep != member:
            node.rep = member
        path = self._member_path(member)
        for depth in range(node.depth + 1, len(path)):
            self.nodes.pop(path[depth], None)

    def delete(self, a) -> PathReport:
        """Remove one stored instance equal to a (most recently added first)."""
        a = self._check_vector(a)
        ids = self._by_value.get(a.tobytes())
        if not ids:
            raise LookupError("vector is not stored in the tree")
        vid = ids.pop()
        if not ids:
            del self._by_value[a.tobytes()]
        keys = self.locate(a)
        affected = set()
        for key in keys:
            node = self.nodes.get(key)
            if node is None or vid not in node.members:
                continue
            node.members.discard(vid)
            if not node.members:
                if key != self.root_key:
                    del self.nodes[key]
                else:
                    node.rep = None
                    node.terminal = False
            elif len(node.members) == 1 and key != self.root_key:
                old_rep = node.rep
                self._recompress(node)
                if old_rep == vid:
                    affected.update(node.members)
            elif node.rep == vid:
                ordered = sorted(node.members)
                node.rep = ordered[int(self._rep_rng.integers(len(ordered)))]
                affected.update(node.members)
        del self._vectors[vid]
        self._path_cache.pop(vid, None)
        affected.discard(vid)
        return self._report_for(affected)
