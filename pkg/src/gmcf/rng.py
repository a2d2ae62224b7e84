"""Counter-based random streams keyed by (seed, replica, layer).

Every replica of an experiment owns its own streams, so results do not
depend on how replicas are scheduled across workers. Streams are Philox
generators sharing a key derived from the global seed; the replica and
layer ids occupy the high words of the 256-bit counter, which keeps the
streams disjoint for any realistic number of draws.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["TERMINAL", "ReplicaStream", "stream", "mc_rng", "resolve_seed"]

# layer id reserved for draws that do not belong to a field layer
TERMINAL = 2**63 - 1

_KEY_CACHE: dict = {}


def _key(seed):
    key = _KEY_CACHE.get(seed)
    if key is None:
        key = np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)
        _KEY_CACHE[seed] = key
    return key


def stream(seed: int, replica: int, layer: int = 0) -> np.random.Generator:
    """Generator for the ``(seed, replica, layer)`` stream."""
    if replica < 0 or layer < 0:
        raise ValueError("replica and layer ids must be nonnegative")
    counter = np.array([0, 0, layer, replica], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=counter))


class ReplicaStream:
    """The family of per-layer streams belonging to one replica."""

    __slots__ = ("seed", "replica")

    def __init__(self, seed: int, replica: int = 0):
        self.seed = int(seed)
        self.replica = int(replica)

    def layer(self, j: int) -> np.random.Generator:
        return stream(self.seed, self.replica, j)

    def terminal(self) -> np.random.Generator:
        return stream(self.seed, self.replica, TERMINAL)

    def __repr__(self):
        return f"ReplicaStream(seed={self.seed}, replica={self.replica})"


def mc_rng(seed: int, *tags: int) -> np.random.Generator:
    """Fast generator for bulk path simulation, keyed by ``(seed, *tags)``.

    Uses SFC64, which draws normals noticeably faster than Philox; the
    field layers keep the counter-based streams above.
    """
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence([int(seed), *map(int, tags)])))


def resolve_seed(seed=None, env="GMCF_SEED", default=0):
    """Explicit seed, else the ``GMCF_SEED`` environment variable, else ``default``."""
    if seed is not None:
        return int(seed)
    value = os.environ.get(env)
    if value not in (None, ""):
        return int(value)
    return int(default)
