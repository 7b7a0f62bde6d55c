"""Seeded random-number streams.

One run seed fans out into independent named streams so that changing one
consumer (say the prey controller) never perturbs the draws seen by another.
"""
from __future__ import annotations

import numpy as np

STREAM_NAMES = ("policy", "environment", "food", "prey")


class RngStreams:
    """Named, independent PCG64 generators derived from a single seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        root = np.random.SeedSequence(self.seed)
        children = root.spawn(len(STREAM_NAMES))
        self._streams = {
            name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children)
        }

    def __getitem__(self, name: str) -> np.random.Generator:
        try:
            return self._streams[name]
        except KeyError:
            raise KeyError(f"unknown rng stream: {name!r}") from None

    @property
    def policy(self) -> np.random.Generator:
        return self._streams["policy"]

    @property
    def environment(self) -> np.random.Generator:
        return self._streams["environment"]

    @property
    def food(self) -> np.random.Generator:
        return self._streams["food"]

    @property
    def prey(self) -> np.random.Generator:
        return self._streams["prey"]
