"""Deterministic random-stream derivation.

Every stochastic component takes its randomness from a generator derived
from an explicit entropy tuple, so results are reproducible and independent
of execution order or worker count.
"""
from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1


def seed_sequence(*entropy: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(tuple(int(v) & _U64 for v in entropy))


def derive_rng(*entropy: int) -> np.random.Generator:
    """Independent generator keyed by the entropy tuple."""
    return np.random.default_rng(seed_sequence(*entropy))


def derive_seed(*entropy: int) -> int:
    """Collapse an entropy tuple into a single 64-bit seed."""
    return int(seed_sequence(*entropy).generate_state(1, np.uint64)[0])
