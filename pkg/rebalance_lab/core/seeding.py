"""Seed splitting.

Every random stream derives from one master seed. A stream is addressed by a
tuple of small integers (its *spawn key*) and built as
``SeedSequence(entropy=master, spawn_key=key)``, so streams never overlap and
adding a new stream does not shift the existing ones.

Stream keys used across the package:

    (0,)        synthetic corpus generation
    (1, s)      customer response fit of station ``s``
    (2,)        simulator demand (departures, destinations)
    (3,)        simulator customer cost draws
"""

from typing import Tuple

import numpy as np

CORPUS_STREAM = (0,)
FIT_STREAM = 1
DEMAND_STREAM = (2,)
CUSTOMER_STREAM = (3,)


def stream(master_seed: int, key: Tuple[int, ...]) -> np.random.Generator:
    """Return the generator for ``key`` under ``master_seed``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)
