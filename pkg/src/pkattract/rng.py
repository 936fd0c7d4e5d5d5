"""Deterministic random streams.

Every sampler in the package draws from counter-based Philox generators keyed
off a single user seed.  Worker substreams are spawned from the seed sequence,
so results depend only on (seed, worker_count) and never on scheduling.
"""

import numpy as np


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def substreams(seed: int, workers: int) -> list[np.random.Generator]:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    children = np.random.SeedSequence(seed).spawn(workers)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def split_counts(total: int, workers: int) -> list[int]:
    """Split a sample budget across workers, front-loading the remainder."""
    base, rem = divmod(total, workers)
    return [base + (1 if i < rem else 0) for i in range(workers)]
