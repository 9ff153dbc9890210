"""Seed handling.

Every stochastic routine takes an explicit seed. Seeds are normalised to
:class:`numpy.random.SeedSequence` so that replicate seeds can be spawned
deterministically, and the storm simulator additionally uses a counter-based
hash so that the value of the j-th storm of a cell does not depend on the
order in which cells are processed.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence(int(seed))


def generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def spawn(seed, n: int) -> list[np.random.SeedSequence]:
    """Derive ``n`` independent child seeds.

    A fresh copy is spawned from, so repeated calls with the same seed object
    return the same children.
    """
    ss = as_seed_sequence(seed)
    fresh = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key, pool_size=ss.pool_size)
    return fresh.spawn(n)


def seed_key(seed) -> np.uint64:
    """Collapse a seed into a 64-bit key for :func:`hash_uniform`."""
    return np.uint64(as_seed_sequence(seed).generate_state(1, dtype=np.uint64)[0])


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def hash_uniform(key: np.uint64, cell, index, stream: int) -> np.ndarray:
    """Uniform(0, 1) variates addressed by ``(key, cell, index, stream)``.

    The result never equals 0 or 1.
    """
    cell = np.asarray(cell, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _splitmix(np.uint64(key) ^ _splitmix(cell * np.uint64(0xD6E8FEB86659FD93)))
        h = _splitmix(h ^ (index * np.uint64(0xA0761D6478BD642F) + np.uint64(stream)))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
