"""Counter-based splittable random streams.

Every stochastic operation in this package draws from a Philox generator
keyed by (master seed, path), where the path is a small tuple of indices
(replication number, bootstrap replicate, retry attempt, domain tag).
Philox is counter-based, so substreams are independent by construction and
results never depend on execution order or worker count.
"""
from __future__ import annotations

import numpy as np

_U64 = 1 << 64


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for (seed, path); deterministic across platforms."""
    ss = np.random.SeedSequence(int(seed) % _U64, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def stream_seed(seed: int, *path: int) -> int:
    """A 63-bit seed derived from (seed, path), for handing to nested estimators."""
    return int(substream(seed, *path).integers(1 << 63))
