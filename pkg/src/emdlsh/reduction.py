"""Reduction from EMD over (R^d, l_p) to EMD over a Hamming cube.

Two stages:

1. ``lp_to_l1`` embeds the ground space (R^d, l_p), p in (1, 2], into l_1 via
   one shared random linear map with p-stable entries (identity for p = 1).
2. A :class:`ThresholdMap` turns (R^d, l_1) elements into t-bit strings.  Each
   output bit passes the element through d concatenated randomly-shifted
   one-dimensional grids and applies a random sign to the resulting cell
   tuple.  For elements within distance W of each other the per-bit flip
   probability is proportional to their distance, which transfers EMD
   neighborhoods into the cube.

The random signs are never materialized: a keyed PRF of (seed, bit index,
cell-tuple digest) plays the role of the lazily-realized sign tables, so any
query order sees one consistent function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from emdlsh.core import HYPERCUBE, REAL, PointSet
from emdlsh.rng import fold_columns, key_to_u64, mix_u64, stream, stream_key


def _p_stable(rng: np.random.Generator, p: float, size) -> np.ndarray:
    """Standard symmetric p-stable samples (Chambers-Mallows-Stuck)."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size=size)
    w = rng.exponential(1.0, size=size)
    return (np.sin(p * u) / np.cos(u) ** (1.0 / p)
            * (np.cos(u * (1.0 - p)) / w) ** ((1.0 - p) / p))


def _stable_abs_mean(p: float) -> float:
    # E|X| for a standard symmetric p-stable variable, finite for p > 1.
    return (2.0 / np.pi) * math.gamma(1.0 - 1.0 / p)


def lp_to_l1(dataset, p: float, eps: float, seed: int = 0):
    """Apply one shared random l_p -> l_1 linear map to every point.

    p = 1 is an identity pass-through.  The output dimension grows as
    d * log(1/eps) / eps^2; pairwise distances are preserved up to (1 +- eps)
    with high probability, with the scale normalized so the expected image
    distance equals the source distance.
    """
    points = list(dataset)
    if p == 1.0:
        return points
    if not 1.0 < p <= 2.0:
        raise ValueError("norm exponent must lie in (1, 2] (p=1 passes through)")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if not points:
        return []
    d = points[0].d
    d_out = int(math.ceil(4.0 * d * math.log(1.0 / eps) / eps**2))
    rng = stream(seed, "lp-to-l1", d, d_out)
    mat = _p_stable(rng, p, (d_out, d)) / (d_out * _stable_abs_mean(p))
    return [PointSet(x.elements.astype(np.float64) @ mat.T, REAL) for x in points]


@dataclass(frozen=True)
class GridHash:
    """One randomly-shifted one-dimensional grid on a sampled coordinate."""

    axis: int
    offset: float
    cell_width: float

    def __post_init__(self):
        if not 0.0 <= self.offset <= self.cell_width:
            raise ValueError("offset must lie in [0, cell_width]")


def sample_grid_hash(d: int, cell_width: float, rng: np.random.Generator) -> GridHash:
    return GridHash(axis=int(rng.integers(d)),
                    offset=float(rng.uniform(0.0, cell_width)),
                    cell_width=float(cell_width))


def grid_hash_eval(g: GridHash, a) -> int:
    """Cell id ceil((a[axis] + offset) / width); deterministic given g."""
    a = np.asarray(a, dtype=np.float64)
    return int(np.ceil((a[g.axis] + g.offset) / g.cell_width))


def grid_cells_batch(axes: np.ndarray, offsets: np.ndarray, cell_width: float,
                     a) -> np.ndarray:
    """Cell ids under many grid hashes at once (axes/offsets of equal shape)."""
    a = np.asarray(a, dtype=np.float64)
    return np.ceil((a[axes] + offsets) / cell_width).astype(np.int64)


@dataclass(frozen=True)
class ThresholdMap:
    """Randomized map from (R^d, l_1) elements to {0,1}^bits.

    Bit i of the image of a is sign_i(cells_i(a)), where cells_i concatenates
    d shifted grids of width ``cell_width`` and sign_i is a keyed PRF of the
    cell tuple.
    """

    bits: int
    cell_width: float
    image_radius: float
    approximation: float
    axes: np.ndarray        # (bits, d) sampled coordinates
    offsets: np.ndarray     # (bits, d) uniform [0, cell_width)
    seed: int

    @property
    def d(self) -> int:
        return self.axes.shape[1]

    def _sign_bits(self, cells: np.ndarray, bit_index: np.ndarray) -> np.ndarray:
        # 128-bit cell-tuple digest in two u64 lanes, then one sign bit per row.
        key = stream_key(self.seed, "threshold-map-signs")
        lane1 = fold_columns(key_to_u64(key, 0), cells)
        lane2 = fold_columns(key_to_u64(key, 1), cells)
        mixed = mix_u64(mix_u64(lane1, lane2), bit_index.astype(np.uint64))
        return (mixed & np.uint64(1)).astype(np.uint8)

    def apply_element(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (self.d,):
            raise ValueError(f"dimension mismatch: {a.shape} vs ({self.d},)")
        cells = np.ceil((a[self.axes] + self.offsets) / self.cell_width).astype(np.int64)
        return self._sign_bits(cells, np.arange(self.bits))


def sample_threshold_map(s: int, c: float, tau: float, delta: float,
                         seed: int, d: int) -> ThresholdMap:
    """Draw a threshold map for points of s elements in (R^d, l_1).

    Near points (EMD <= tau) land within ``image_radius`` in the cube, and far
    points (EMD >= c*tau) land beyond c*image_radius/3, each with probability
    at least 1 - delta over the draw.
    """
    if not c > 3:
        raise ValueError("approximation must exceed 3")
    if not 0.0 < delta < 1.0:
        raise ValueError("failure probability must lie in (0, 1)")
    if tau <= 0:
        raise ValueError("near threshold must be positive")
    bits = int(math.ceil(64.0 * (s * c) ** 2 * math.log(2.0 * s**2 / delta)))
    rng = stream(seed, "threshold-map-grids")
    axes = rng.integers(0, d, size=(bits, d))
    offsets = rng.uniform(0.0, c * tau, size=(bits, d))
    return ThresholdMap(bits=bits, cell_width=float(c * tau),
                        image_radius=bits / (1.99 * c), approximation=float(c),
                        axes=axes, offsets=offsets, seed=seed)


def threshold_map_apply(f: ThresholdMap, x: PointSet) -> PointSet:
    """Element-wise application; the image is a hypercube point of dimension bits."""
    if x.d != f.d:
        raise ValueError(f"dimension mismatch: {x.d} vs {f.d}")
    elems = x.elements.astype(np.float64)
    cells = np.ceil((elems[:, f.axes] + f.offsets[None, :, :]) / f.cell_width)
    cells = cells.astype(np.int64).reshape(x.s * f.bits, f.d)
    bit_index = np.tile(np.arange(f.bits), x.s)
    bits = f._sign_bits(cells, bit_index)
    return PointSet(bits.reshape(x.s, f.bits), HYPERCUBE)
