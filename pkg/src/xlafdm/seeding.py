"""Deterministic random substreams keyed by a master seed and a path of labels."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"substream keys must be non-negative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def seed_sequence(seed, *keys) -> np.random.SeedSequence:
    """SeedSequence for ``keys`` below ``seed``.

    ``seed`` may be an int or a SeedSequence; keys nest, so
    ``seed_sequence(seed_sequence(s, 3), "x")`` equals ``seed_sequence(s, 3, "x")``.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(_key(k) for k in keys))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))


def generator(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *keys))
