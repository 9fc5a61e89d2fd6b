"""Deterministic random streams derived from a master seed.

Every Monte-Carlo consumer asks for its own stream by name, so results do not
depend on the order in which checks run or on how work is split.
"""

from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 0


def _key(part: str | int) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError("stream path integers must be nonnegative")
    return int(part)


def stream(seed: int, *path: str | int) -> np.random.Generator:
    """Generator for the named sub-stream ``path`` of master ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
