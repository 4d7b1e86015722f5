"""Keyed, splittable random streams on top of numpy's counter-based Philox generator.

A stream is identified by ``(seed, path)``. ``child(*keys)`` extends the path,
so a run can hand each ``(step, slot, factor)`` tuple its own reproducible
substream without threading generator state through the call graph.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("boolean stream keys are ambiguous")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        # offset keeps string keys away from small integer keys
        return (1 << 32) + zlib.crc32(key.encode())
    raise TypeError(f"unsupported stream key {key!r}")


class RngStream:
    def __init__(self, seed: int, path: tuple = ()):
        if int(seed) < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self.path = tuple(path)
        self._spawn_key = tuple(_key_to_int(k) for k in self.path)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path!r})"

    @property
    def identifier(self) -> tuple:
        return (self.seed, self.path)

    def child(self, *keys) -> RngStream:
        return RngStream(self.seed, self.path + keys)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self._spawn_key)
        return np.random.Generator(np.random.Philox(seq))


def as_stream(rng: RngStream | int) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or integer seed, got {type(rng).__name__}")
