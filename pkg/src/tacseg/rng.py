"""Seeded sub-stream derivation so every stochastic stage hangs off one seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def sub_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the named sub-stream of ``seed``.

    Same (seed, keys) always yields the same stream; distinct key paths are
    statistically independent (SeedSequence entropy mixing).
    """
    entropy = (int(seed),) + tuple(_key_to_int(k) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
