"""Deterministic, portable random draws.

Python's builtin hash() is salted per process and numpy's default generators
promise nothing across library versions, so everything here is built from two
fixed primitives with published reference vectors:

  - FNV-1a (64-bit) to turn strings into seeds, and
  - SplitMix64 as a counter-based stream: the i-th output is a pure function
    of (seed, i), so draws are independent of evaluation order and can be
    produced scalar-by-scalar or as a vectorized batch with identical results.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64_at(seed: int, index: int) -> int:
    """The index-th output (0-based) of the SplitMix64 stream for `seed`."""
    z = (seed + (index + 1) * _SM_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _SM_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MUL2) & _MASK64
    return z ^ (z >> 31)


def _splitmix64_block(seed: int, start: int, count: int) -> np.ndarray:
    """Vectorized splitmix64_at(seed, start..start+count-1) as uint64."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(_SM_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_SM_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_SM_MUL2)
        return z ^ (z >> np.uint64(31))


class CounterRng:
    """Sequential view over the SplitMix64 counter stream.

    Each draw consumes one or more counter slots; the mapping from slots to
    values is fixed, so a given (seed, call sequence) reproduces bit-identical
    results on any platform.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._pos = 0

    def next_u64(self) -> int:
        v = splitmix64_at(self.seed, self._pos)
        self._pos += 1
        return v

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform draw in [lo, hi) with 53-bit resolution."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo reduction; bias is negligible
        for the small ranges used here and determinism is what matters."""
        if n <= 0:
            raise ValueError("randint needs n > 0")
        return self.next_u64() % n

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct integers drawn from range(n), via partial Fisher-Yates.

        Order of the result is the draw order (deterministic).
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} from range({n})")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def uniforms(self, count: int) -> np.ndarray:
        """Vectorized batch of `count` uniforms in [0, 1)."""
        z = _splitmix64_block(self.seed, self._pos, count)
        self._pos += count
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller over consecutive uniform pairs.

        Pair j uses uniforms (2j, 2j+1): r = sqrt(-2 ln(1 - u0)),
        theta = 2 pi u1, yielding (r cos theta, r sin theta). This exact
        recipe is part of the stub-embedding contract and is mirrored by the
        encoder sidecar; do not change it.
        """
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = (2.0 * math.pi) * u[1::2]
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:count]
