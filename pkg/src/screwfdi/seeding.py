"""Deterministic derivation of per-task random generators from one master seed.

Every stochastic step of an experiment (data simulation, splitting, fold
assignment, hyperparameter sampling, SMOTE, weight init, batch shuffling)
pulls its generator from `derive_rng(master_seed, *tags)` with a distinct tag
tuple, so reruns with the same master seed are bit-identical regardless of
execution order across workers.
"""

import numpy as np

# Tag namespaces for derived streams. Values are part of the on-disk
# reproducibility contract: changing them changes every derived stream.
TAG_SPLIT = 1
TAG_FOLDS = 2
TAG_SAMPLING = 3
TAG_INIT = 4
TAG_AUGMENT = 5
TAG_SHUFFLE = 6
TAG_FINAL = 7


def derive_rng(master_seed, *tags):
    """Return a `numpy.random.Generator` unique to (master_seed, tags)."""
    key = tuple(int(t) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))
