"""Counter-based random streams partitioned by a key path.

Every stream is a Philox generator keyed by ``SeedSequence(seed,
spawn_key=path)``.  Replica ``i`` of a run always receives the stream
``root.child(i)``, so results do not depend on how replicas are scheduled.
"""
from __future__ import annotations

import numpy as np


class RngStream:
    __slots__ = ("seed", "key", "_gen")

    def __init__(self, seed: int, stream_id: int | tuple = 0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        key = tuple(stream_id) if isinstance(stream_id, tuple) else (int(stream_id),)
        self.seed = seed
        self.key = key
        self._gen = None

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.key + (int(i),))

    def children(self, n: int, start: int = 0):
        return [self.child(i) for i in range(start, start + n)]

    @property
    def generator(self) -> np.random.Generator:
        """The Generator for this stream (created once, then advanced)."""
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def fresh(self) -> np.random.Generator:
        """A new Generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def as_stream(rng, default_seed=0) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(default_seed)
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError("rng must be an RngStream, an integer seed or None")


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return as_stream(rng).generator
