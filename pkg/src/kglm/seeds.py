"""Deterministic RNG stream derivation.

Every randomized stage draws from its own generator derived from the
single run seed plus a fixed stage tag (and any per-task indices, e.g.
entity id and walk index). Stages can therefore be rerun independently
and in parallel without changing each other's streams.
"""

import numpy as np

WALKS = 1
MODEL_INIT = 2
SHUFFLE = 3
DROPOUT = 4
SCORER_INIT = 5
NEGATIVES = 6
CLASSIFY_NEGATIVES = 7

DEFAULT_SEED = 1234567


def derived_rng(seed, *key):
    """A numpy Generator seeded from (seed, *key); all parts must be
    nonnegative integers."""
    return np.random.default_rng([int(seed), *[int(k) for k in key]])
