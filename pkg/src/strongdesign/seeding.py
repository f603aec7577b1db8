"""Counter-based RNG streams.

Every random draw in the package goes through :func:`make_rng`, which keys a
Philox generator by a master seed plus an arbitrary tuple of integer labels.
Sample ``i`` of an experiment with master seed ``s`` uses ``make_rng(s, i)``,
so samples can be generated in any order and still reproduce bit-exactly.
"""
from __future__ import annotations

import numpy as np


def make_rng(master: int, *keys: int) -> np.random.Generator:
    entropy = [int(master)] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def spawn(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    # child streams drawn from a parent; deterministic given the parent state
    seeds = rng.integers(0, 2**63 - 1, size=count, dtype=np.int64)
    return [make_rng(int(s)) for s in seeds]
