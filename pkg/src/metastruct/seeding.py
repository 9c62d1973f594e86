"""Per-stage random generators derived from one user seed."""

import zlib

import numpy as np


def stage_seed(seed: int, stage: str, *extra: int) -> np.random.SeedSequence:
    # crc32 is stable across processes, unlike hash()
    return np.random.SeedSequence([int(seed), zlib.crc32(stage.encode("utf-8")), *map(int, extra)])


def stage_rng(seed: int, stage: str, *extra: int) -> np.random.Generator:
    """Generator for one named stage, reproducible in isolation."""
    return np.random.default_rng(stage_seed(seed, stage, *extra))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
