"""Seed derivation.

Every random stream is a PCG64 generator seeded through numpy's
``SeedSequence(master_seed, spawn_key=key)``.  Keys are tuples of small
non-negative integers (a stream tag plus e.g. label and item index), so any
item can be regenerated on its own, in any order, on any worker.
"""

import numpy as np

RNG_ALGORITHM = "PCG64/SeedSequence"

# stream tags
DATA = 0
SPLIT = 1
INIT = 2
ORDER = 3
MERGE = 4
ATTACK = 5
SAMPLE = 6
RUN = 7


def _seq(master: int, key) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))


def generator(master: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seq(master, key)))


def derive_seed(master: int, *key: int) -> int:
    """A 63-bit child seed, stable across platforms and numpy versions."""
    return int(_seq(master, key).generate_state(1, np.uint64)[0] >> np.uint64(1))


def describe(master: int) -> dict:
    return {"algorithm": RNG_ALGORITHM, "master_seed": int(master)}
