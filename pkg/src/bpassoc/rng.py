"""Reproducible random streams keyed by (seed, trial, purpose, index).

Each stream is a Philox counter-based generator whose key is derived from
the master seed and the draw's coordinates, so a draw never depends on how
many other trials ran before it or on which worker ran them.
"""

from __future__ import annotations

import zlib

import numpy as np


def purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, trial: int, purpose: str, index: int = 0) -> np.random.Generator:
    if seed < 0 or trial < 0 or index < 0:
        raise ValueError("seed, trial and index must be non-negative")
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(trial, purpose_code(purpose), index))
    return np.random.Generator(np.random.Philox(seq))
