"""Seeded random streams.

Every stochastic operation builds its generator here so runs are reproducible
across platforms: Philox is counter-based and its output does not depend on
the host.
"""
import numpy as np

from app.core.config import RNG_ALGORITHM


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for ``seed``; ``stream`` selects an independent substream."""
    if stream:
        bit_generator = np.random.Philox(key=seed, counter=[0, 0, 0, stream])
        return np.random.Generator(bit_generator)
    return np.random.Generator(np.random.Philox(key=seed))


def rng_algorithm() -> str:
    return RNG_ALGORITHM
