"""Deterministic random-number substreams.

Every draw in the package flows from one master seed through a named
substream, so no result ever depends on execution order or on how work
is split across workers. A substream is addressed by the master seed
plus a path of names and indices, e.g. ("outer", b) or ("inner", b, j).
"""

from __future__ import annotations

import zlib

import numpy as np


def _entropy(seed: int, path: tuple) -> list[int]:
    # String path elements hash to stable 32-bit tags; ints pass through.
    out = [int(seed)]
    for part in path:
        if isinstance(part, str):
            out.append(zlib.crc32(part.encode("utf-8")))
        else:
            out.append(int(part))
    return out


def substream(seed: int, *path: str | int) -> np.random.Generator:
    """Generator for the substream addressed by (seed, *path)."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, path)))


def subseed(seed: int, *path: str | int) -> int:
    """A derived integer seed, for handing a whole component its own master."""
    ss = np.random.SeedSequence(_entropy(seed, path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
