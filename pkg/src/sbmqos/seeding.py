"""Deterministic per-realization random streams.

A realization's streams depend only on (master_seed, realization index, tag), so
results do not depend on which worker ran which realization or in what order.
"""
import numpy as np

TRAFFIC_TAG = 0


def channel_tag(hop: int) -> int:
    """Stream tag for the service process of 0-based hop ``hop``."""
    return 1 + hop


def make_rng(master_seed: int, index: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index), int(tag)))
    return np.random.Generator(np.random.PCG64(ss))
