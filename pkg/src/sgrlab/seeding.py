"""Deterministic seed derivation.

Every trajectory gets its own counter-based random stream keyed by a 64-bit
seed, so simulation results never depend on batch size, execution order or
thread count.  Sub-seeds are derived with the splitmix64 finalizer: stream
``k`` of ``seed`` is ``mix64(seed + (k + 1) * GOLDEN)``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15  # 2**64 / golden ratio, the splitmix64 increment


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (pure-Python reference)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def substream(seed: int, index: int) -> int:
    """Seed of the ``index``-th child stream of ``seed``."""
    return mix64(seed + (index + 1) * GOLDEN)


def substream_array(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Seeds of child streams ``start .. start+count-1`` as a uint64 array."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))
