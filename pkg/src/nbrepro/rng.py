"""Seeded, splittable random streams.

Every stochastic routine takes a 64-bit seed. Independent substreams are
addressed by integer keys through ``SeedSequence.spawn_key``, so a stream for
e.g. (date index 12, chunk 3) is the same no matter the order in which
streams are created or how work is split across threads.
"""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.Generator | None

_MASK64 = (1 << 64) - 1


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.Generator(np.random.PCG64())
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & _MASK64)))


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the substream of ``seed`` addressed by ``keys``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def draw_seed(rng: np.random.Generator) -> int:
    """A fresh 64-bit seed drawn from ``rng``."""
    return int(rng.integers(0, 2**63 - 1))
