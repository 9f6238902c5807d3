"""Seed streams.

Every random draw in the package comes from a Philox counter-based generator
keyed by ``SeedSequence(master, spawn_key=keys)``. Keys are small tuples of
non-negative ints naming the stream, e.g. ``(replication, STAGE_MAIN, iteration)``.
Identical keys give bit-identical draws on every platform numpy supports.
"""
import numpy as np

# stream tags used as the second spawn-key entry
FIRST_STAGE = 0
MAIN_STAGE = 1
ACQUISITION = 2
FIT = 3
FALLBACK = 4
PROBLEM = 5


def stream(master, *keys):
    """Return a fresh generator for the stream named by ``keys``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(master, *keys):
    """A 63-bit integer seed derived from ``(master, keys)``, for APIs that take ints."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
