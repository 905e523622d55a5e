"""Deterministic seed derivation.

Every stochastic site in the package draws from a generator derived via
``child_seed``/``child_rng`` from integer key tuples, so a run is a pure
function of its configured seed.  Keys are plain ints; stream-id
constants live with their consumers.
"""

import numpy as np


def child_seed(*keys):
    """Stable u64 seed derived from a tuple of integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def child_rng(*keys):
    """Generator seeded from a tuple of integer keys."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
