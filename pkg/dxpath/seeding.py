"""
Root-seed splitting: every subsystem draws from its own generator derived
from the single configured seed, so adding randomness in one place never
shifts the stream seen by another.
"""

import zlib

import numpy as np


def subsystem_seed(root_seed: int, name: str) -> np.random.SeedSequence:
    """SeedSequence for subsystem `name` under `root_seed`."""
    return np.random.SeedSequence([int(root_seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


def subsystem_rng(root_seed: int, name: str) -> np.random.Generator:
    """Independent numpy Generator for subsystem `name`."""
    return np.random.default_rng(subsystem_seed(root_seed, name))
