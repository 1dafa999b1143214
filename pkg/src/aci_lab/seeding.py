"""Counter-based seed derivation.

Every random stream in the package is addressed by a path of integer keys
below a master seed, e.g. ``(master, replication, STREAM_G)``.  Streams never
share a mutable generator, so results do not depend on evaluation order or on
the number of worker threads.
"""
from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]

STREAM_G = 0
STREAM_T = 1
STREAM_SELECT = 2
STREAM_THETA = 3
STREAM_CHANNEL = 4


def derive_seed(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    """Return the seed sequence at ``seed / keys[0] / keys[1] / ...``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys)
        )
    if isinstance(seed, (bool, np.bool_)) or int(seed) < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def generator(seed: SeedLike, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))
