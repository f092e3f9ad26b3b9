"""Deterministic seed derivation for reproducible Monte-Carlo runs.

Every run draws from a generator seeded by a child seed derived from the
master seed and the run's index path, so results do not depend on execution
order or on how runs are spread over worker processes, and any single run
can be reproduced in isolation.
"""
from __future__ import annotations

import numpy as np


def child_seed(master_seed: int, *path: int) -> int:
    """Stable 64-bit child seed for the run addressed by ``path``."""
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    ss = np.random.SeedSequence((master_seed, *path))
    return int(ss.generate_state(1, np.uint64)[0])


def run_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for one run, independent of all sibling runs."""
    return np.random.default_rng(child_seed(master_seed, *path))
