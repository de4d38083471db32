"""Deterministic random-stream derivation.

Every random draw in the package comes from a counter-based Philox generator
keyed by (seed, stream tags).  Draws are made as single vectorized calls, so a
given (seed, tags) pair yields the same values regardless of call order or
thread count.
"""

from __future__ import annotations

import numpy as np

LIBRARY_STREAM = 0x10
CHANNEL_STREAM = 0x20
CODEC_STREAM = 0x30


def seed_material(seed) -> list[int]:
    """Normalize an int or a sequence of ints into seed-sequence entropy."""
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def derived_rng(seed, *tags: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed_material(seed) + [int(t) for t in tags])
    return np.random.Generator(np.random.Philox(ss))
