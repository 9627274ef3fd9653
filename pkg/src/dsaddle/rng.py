"""Seeded per-node random streams.

Every consumer of randomness (quantizer, batch sampling, reference refresh)
gets its own stream per node, derived from ``(seed, purpose, node)``. Results
therefore never depend on the order in which nodes are processed.
"""

from __future__ import annotations

import numpy as np

_PURPOSES = {"quantize_x": 1, "quantize_y": 2, "batch": 3, "refresh": 4, "init": 5}


def node_streams(seed: int, purpose: str, m: int) -> list[np.random.Generator]:
    """One independent generator per node for the given purpose."""
    if purpose not in _PURPOSES:
        raise KeyError(f"unknown stream purpose {purpose!r}")
    tag = _PURPOSES[purpose]
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, i))) for i in range(m)]


class StreamBank:
    """Lazily created per-node streams for one run."""

    def __init__(self, seed: int, m: int):
        self.seed = int(seed)
        self.m = int(m)
        self._cache: dict[str, list[np.random.Generator]] = {}

    def __getitem__(self, purpose: str) -> list[np.random.Generator]:
        if purpose not in self._cache:
            self._cache[purpose] = node_streams(self.seed, purpose, self.m)
        return self._cache[purpose]
