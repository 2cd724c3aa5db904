"""Seeded random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, purpose, trial, branch)`` so results do not depend on the order in
which trials are scheduled across workers.
"""

import numpy as np

PURPOSES = {
    "layout": 0,
    "fading": 1,
    "noise": 2,
    "offset": 3,
    "instance": 4,
    "overlap": 5,
    "tones": 6,
}


def stream(seed, purpose, trial=0, branch=0):
    """Return an independent generator for one ``(purpose, trial, branch)`` key."""
    if purpose not in PURPOSES:
        raise KeyError(f"unknown random stream purpose {purpose!r}")
    ss = np.random.SeedSequence([int(seed), PURPOSES[purpose], int(trial), int(branch)])
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept ``None``, an int seed or a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))
