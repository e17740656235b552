"""Seeded random streams. Every experiment draws from Philox, a counter-based generator."""

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent Philox stream keyed by ``(seed, stream)``."""
    if stream == 0:
        return np.random.Generator(np.random.Philox(int(seed)))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))
