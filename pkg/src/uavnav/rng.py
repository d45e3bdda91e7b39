"""Named RNG streams derived from one master seed.

Each source of randomness gets its own stream so that changing how often one
of them is consumed never shifts the others.
"""

import numpy as np

STREAMS = {"env": 0, "policy": 1, "noise": 2, "init": 3, "shuffle": 4}


def stream(master_seed: int, name: str, *key: int) -> np.random.Generator:
    """Generator for stream `name`, optionally forked further by integer `key`s."""
    spawn_key = (STREAMS[name],) + tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=spawn_key))


def coord_key(value: float) -> int:
    """Stable non-negative integer key for a grid coordinate (micro-units)."""
    k = int(round(value * 1e6))
    return 2 * k if k >= 0 else -2 * k - 1
