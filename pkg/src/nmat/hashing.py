"""Deterministic 64-bit integer hashing (splitmix64 finalizer)."""
from __future__ import annotations

import numpy as np

M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def mix(*parts: int, seed: int = 0) -> int:
    h = splitmix64(seed & M64)
    for p in parts:
        h = splitmix64(h ^ (p & M64))
    return h


def unit(h: int) -> float:
    """Map a 64-bit hash to [0, 1)."""
    return (h >> 11) * (1.0 / (1 << 53))


def splitmix64_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x += np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def mix_np(values: np.ndarray, *parts: int, seed: int = 0) -> np.ndarray:
    """Vector version of ``mix(*parts, v, seed=seed)`` for each ``v`` in ``values``."""
    h = splitmix64(seed & M64)
    for p in parts:
        h = splitmix64(h ^ (p & M64))
    return splitmix64_np(np.asarray(values, dtype=np.uint64) ^ np.uint64(h))


def unit_np(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
