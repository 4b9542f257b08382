"""Deterministic seed derivation shared by every seeded component."""

from __future__ import annotations

import zlib

import numpy as np


def _as_int(part: object) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed(master: int, *parts: object) -> int:
    """Mix ``master`` with arbitrary labels into a stable 32-bit seed.

    Uses crc32 for strings so the result never depends on ``PYTHONHASHSEED``.
    """
    entropy = [int(master) & 0xFFFFFFFF] + [_as_int(p) for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def rng_for(master: int, *parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *parts))
