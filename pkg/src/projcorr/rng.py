"""Seeded random-number generation.

Every stochastic construction in the package (masks, projection rows,
synthetic noise, synthetic images) draws from NumPy's PCG64 generator seeded
with a 64-bit integer.  Independent streams are derived by XOR-ing the base
seed with a stream index, so per-item work is order-independent and
reproducible from ``(base_seed, index)`` alone.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(base_seed: int, stream_index: int) -> int:
    """Seed for sub-stream ``stream_index`` of ``base_seed`` (64-bit XOR)."""
    if stream_index < 0:
        raise ValueError(f"stream index must be >= 0, got {stream_index}")
    return (int(base_seed) & _MASK64) ^ (int(stream_index) & _MASK64)


def generator(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def stream(base_seed: int, stream_index: int) -> np.random.Generator:
    """Generator for the derived sub-stream ``base_seed ^ stream_index``."""
    return generator(derive_seed(base_seed, stream_index))
