"""Named random sub-streams derived from one global seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode())


def derive_seed(seed: int, *names) -> np.random.SeedSequence:
    """SeedSequence for the stream ``seed:name1:name2:...``.

    Integer parts are used verbatim and strings are hashed with CRC32, so the
    same path always yields the same stream across processes.
    """
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in names))


def rng_for(seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))
