"""Counter-based random streams.

Each sample point gets its own Philox stream keyed by (seed, index), so
probe results do not depend on evaluation order or chunking.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gaussian_points(seed: int, count: int, dim: int) -> np.ndarray:
    """(count, dim) standard normals; row i drawn from stream (seed, i)."""
    out = np.empty((count, dim))
    for i in range(count):
        out[i] = substream(seed, i).standard_normal(dim)
    return out


def uniform_points(seed: int, count: int, dim: int) -> np.ndarray:
    out = np.empty((count, dim))
    for i in range(count):
        out[i] = substream(seed, i).random(dim)
    return out


def dyadic_points(seed: int, count: int, bits: int = 60) -> np.ndarray:
    """Random dyadic rationals k/2^bits in (0,1), returned as int64 numerators.

    bits <= 62 keeps window shifts used by the averaging operators inside
    int64 range.
    """
    if not 1 <= bits <= 62:
        raise ValueError("bits must lie in [1, 62]")
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        gen = substream(seed, i)
        v = 0
        while v == 0:  # avoid the single boundary point 0
            v = int(gen.integers(0, 1 << bits))
        out[i] = v
    return out
