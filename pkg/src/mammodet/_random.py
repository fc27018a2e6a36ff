"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator seeded with a
``SeedSequence([seed, stream])``; PCG64 output is specified by its
algorithm, so sequences are identical across platforms.
"""

import numpy as np


def make_rng(seed, stream=0):
    """Independent PCG64 generator for ``(seed, stream)``."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, int(stream)])))


def as_rng(rng, seed=0, stream=0):
    if rng is None:
        return make_rng(seed, stream)
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng, stream)
