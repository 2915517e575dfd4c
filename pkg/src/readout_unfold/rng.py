"""Seeded random streams.

Every stochastic routine draws from a Philox (counter-based) generator
keyed by ``SeedSequence([seed, *key])``.  Replica ``b`` of a bootstrap uses
key ``(stream, b)``, so replicas can run in any order or in parallel and
still produce the same numbers as a sequential loop.
"""

from __future__ import annotations

import numpy as np

# stream identifiers, so that different procedures never share draws
TRUTH = 1
READOUT = 2
CALIBRATION = 3
BOOT_MEASURED = 4
BOOT_RESPONSE = 5
PSEUDO = 6


def make_rng(seed: int, *key: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    words = [int(seed)] + [int(k) for k in key]
    if any(w < 0 for w in words):
        raise ValueError("seed and stream keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def ensure_rng(seed_or_rng, *key: int) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return make_rng(seed_or_rng, *key)
