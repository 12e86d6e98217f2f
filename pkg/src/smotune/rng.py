"""Seeded random sources.

All randomness in the toolkit comes from :func:`make_rng`: numpy's PCG64
bit generator, seeded through ``SeedSequence`` from a single unsigned 64-bit
integer. PCG64 output is specified bit-for-bit by numpy, so logs reproduce
across platforms for a fixed numpy major version.
"""

import os

import numpy as np

SEED_ENV = "SMO_SEED"


def make_rng(seed: int) -> np.random.Generator:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def env_seed(default=None):
    """Seed from ``$SMO_SEED`` if set, else ``default``."""
    value = os.environ.get(SEED_ENV)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value, 0)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {value!r}") from None
