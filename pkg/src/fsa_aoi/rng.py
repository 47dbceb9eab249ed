"""Keyed, counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from an integer tuple such as ``(seed, purpose, node)``.  Two streams
with different keys are statistically independent, and a stream's output does
not depend on which other streams were created or in what order, so results
are reproducible however the work is split across processes.
"""

from __future__ import annotations

import numpy as np

TOPOLOGY = 1
SCHEDULE = 2
SIGNAL_FADING = 3
INTERFERENCE_FADING = 4
POLICY = 5
REPLICATION = 6
ORACLE = 7


def _entropy(seed) -> list[int]:
    if seed is None:
        return [0]
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return [int(seed)]


def stream(seed, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``."""
    seq = np.random.SeedSequence(_entropy(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed, *key: int) -> int:
    """A 63-bit integer seed derived from ``(seed, *key)``."""
    seq = np.random.SeedSequence(_entropy(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0] >> np.uint64(1))
