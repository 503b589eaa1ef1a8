"""Deterministic counter-based random streams.

All stochastic choices in tree training flow through splitmix64 so that a
model is a pure function of (data, seed): the k-th draw of a stream is
``mix64(seed + k * GAMMA)``, which can be produced one draw at a time (the
compiled kernel does this) or as a whole vector (the NumPy fallback does
this) with bit-identical results.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def stream_seed(master_seed: int, index: int) -> int:
    """Seed for the ``index``-th child stream of ``master_seed``."""
    return mix64((master_seed + GAMMA * (index + 1)) & MASK64)


class SplitMix64:
    """Sequential view of a splitmix64 stream (scalar draws)."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * GAMMA) & MASK64)

    def randbelow(self, n: int) -> int:
        """Draw an integer in [0, n). Modulo bias is negligible for n << 2^64."""
        return self.next_u64() % n


def draws(seed: int, start: int, count: int) -> np.ndarray:
    """Draws ``start+1 .. start+count`` of the stream, as one uint64 vector."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64_array(np.uint64(seed & MASK64) + counters * np.uint64(GAMMA))


def bootstrap_indices(seed: int, n: int) -> np.ndarray:
    """n-out-of-n bootstrap sample for one tree, as int64 row indices."""
    return (draws(seed, 0, n) % np.uint64(n)).astype(np.int64)
