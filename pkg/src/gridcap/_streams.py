"""Counter-based random number streams.

Each (seed, replicate) pair owns an independent Philox stream, and draws
inside a replicate are indexed by position (step, coordinate). Because a
stream never depends on how work is scheduled, simulations are bit-identical
across runs and across thread counts.
"""
from __future__ import annotations

import numpy as np

__all__ = ["replicate_stream", "normal_block"]


def replicate_stream(seed: int, replicate: int) -> np.random.Generator:
    """Return the generator owned by (seed, replicate).

    The Philox key is the pair itself, so streams for distinct replicates are
    statistically independent without any shared sequential state.
    """
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate must be non-negative")
    key = np.array([seed, replicate], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def normal_block(seed: int, replicate: int, steps: int, dim: int) -> np.ndarray:
    """Standard normal draws for one replicate, shape (steps, dim).

    Entry (k, i) is the increment for coordinate i at step k; the layout is
    fixed, so the same (seed, replicate) always yields the same block.
    """
    return replicate_stream(seed, replicate).standard_normal((steps, dim))
