"""Labeled, counter-based random streams and keyed pseudo-random functions.

Every stochastic component in the library draws from a stream derived from a
64-bit master seed plus a sequence of string/int labels.  Streams are backed
by Philox (counter-based), so results are reproducible across platforms and
independent of evaluation order between streams.

Lazily-realized random tables (sign functions, Bernoulli indicators, grid
offsets) are implemented as keyed PRFs instead of caches: the value attached
to a key is a pure function of (seed, labels, key), which makes re-evaluation
trivially consistent and thread-safe.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _label_bytes(labels) -> bytes:
    parts = []
    for lab in labels:
        if isinstance(lab, bytes):
            parts.append(lab)
        elif isinstance(lab, str):
            parts.append(lab.encode())
        elif isinstance(lab, (int, np.integer)):
            parts.append(int(lab).to_bytes(16, "little", signed=True))
        else:
            raise TypeError(f"unsupported stream label type: {type(lab)!r}")
    return b"\x1f".join(parts)


def stream_key(seed: int, *labels) -> bytes:
    """16-byte key identifying the (seed, labels) stream."""
    h = hashlib.blake2b(_label_bytes(labels), digest_size=16,
                        key=int(seed).to_bytes(8, "little", signed=False))
    return h.digest()


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent Generator for the given labels, seeded from ``seed``."""
    key = int.from_bytes(stream_key(seed, *labels), "little")
    return np.random.Generator(np.random.Philox(key=key))


def prf_bytes(key: bytes, *parts, size: int = 16) -> bytes:
    """Keyed digest of the given parts (bytes / str / int)."""
    return hashlib.blake2b(_label_bytes(parts), digest_size=size, key=key).digest()


def prf_u64(key: bytes, *parts) -> int:
    return int.from_bytes(prf_bytes(key, *parts, size=8), "little")


def prf_uniform(key: bytes, *parts) -> float:
    """Deterministic uniform [0, 1) value attached to the key/parts."""
    return prf_u64(key, *parts) / 2.0**64


def key_to_u64(key: bytes, lane: int = 0) -> np.uint64:
    return np.uint64(int.from_bytes(key[8 * lane:8 * lane + 8], "little"))


def mix_u64(state, value) -> np.ndarray:
    """One splitmix-style mixing round, vectorized over uint64 arrays.

    Folding the columns of an integer matrix through this gives a cheap
    64-bit lane of a tuple digest; two lanes with distinct keys give the
    128 bits used for cell/pattern digests on hot paths.
    """
    state = np.uint64(state) if np.isscalar(state) else state.astype(np.uint64, copy=False)
    value = value.astype(np.uint64, copy=False)
    z = state + _GOLDEN + value
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def fold_columns(key_lane: np.uint64, matrix: np.ndarray) -> np.ndarray:
    """Fold each row of an integer matrix into one uint64 digest lane."""
    out = np.broadcast_to(key_lane, matrix.shape[:1]).copy()
    for j in range(matrix.shape[1]):
        out = mix_u64(out, matrix[:, j])
    return out
