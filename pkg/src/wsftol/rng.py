"""Seeded, splittable random streams.

Two derivations hang off one ``RngSeed``:

* ``generator()`` -- a numpy ``Generator`` (PCG64) seeded from
  ``SeedSequence(seed, spawn_key=path)``.  Used by sequential samplers
  (Wilson, projection DPP).
* ``key()`` -- a 64-bit counter-based key obtained by folding the path
  labels through the splitmix64 finalizer.  Tree samplers key every vertex
  by hashing its child-index path under this key, so a coin attached to a
  vertex is the same no matter which sampler asks for it or in what order.
  This is what lets ray and percolation marginals be reproduced in
  isolation, and lets batch replicas be generated in vectorized form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)

# salts for the distinct coins attached to one vertex key
SALT_PERC = 0x5EED0001
SALT_PERC_REVERSED = 0x5EED0002
SALT_RAY = 0x5EED0003


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def child_key(key: int, label: int) -> int:
    return mix64((key + (label + 1) * GOLDEN) & MASK64)


def unit(h: int) -> float:
    """Map a 64-bit hash to a double in [0, 1)."""
    return (h >> 11) * _INV53


def coin(key: int, salt: int) -> float:
    return unit(mix64(key ^ salt))


def mix64_array(x: np.ndarray) -> np.ndarray:
    z = x.astype(np.uint64, copy=True)
    z += np.uint64(GOLDEN)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def child_key_array(keys: np.ndarray, labels: np.ndarray) -> np.ndarray:
    step = (labels.astype(np.uint64) + np.uint64(1)) * np.uint64(GOLDEN)
    return mix64_array(keys.astype(np.uint64) + step)


def unit_array(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * _INV53


def coin_array(keys: np.ndarray, salt: int) -> np.ndarray:
    return unit_array(mix64_array(keys ^ np.uint64(salt)))


@dataclass(frozen=True)
class RngSeed:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0 <= int(self.seed) <= MASK64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for label in self.path:
            if not (0 <= int(label) < (1 << 32)):
                raise ValueError(f"stream labels must be 32-bit unsigned, got {label}")

    def child(self, *labels: int) -> RngSeed:
        return RngSeed(self.seed, self.path + tuple(int(x) for x in labels))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))

    def key(self) -> int:
        k = mix64(int(self.seed))
        for label in self.path:
            k = child_key(k, label)
        return k

    def child_keys(self, n: int) -> np.ndarray:
        """Keys of ``self.child(i)`` for i in range(n), vectorized."""
        base = np.full(n, self.key(), dtype=np.uint64)
        return child_key_array(base, np.arange(n, dtype=np.uint64))


def as_seed(seed: RngSeed | int) -> RngSeed:
    return seed if isinstance(seed, RngSeed) else RngSeed(int(seed))
