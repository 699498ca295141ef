"""Deterministic random numbers: PCG-XSH-RR 64/32 with derived streams.

Every stochastic piece of the toolkit (weight init, dropout masks, epoch
shuffles, synthetic data) draws from its own stream derived from one master
seed, so a single integer reproduces an entire experiment bit-for-bit,
independent of numpy's global state or generator versioning.

The generator is the classic 32-bit-output PCG (O'Neill): a 64-bit LCC
state advanced by ``state * MULT + inc`` with an XSH-RR output permutation.
Batches are generated in closed form (``state_i = A^i * s0 + (sum_j<i A^j) * c``
mod 2^64) so large draws are vectorized in numpy while staying identical to
the sequential recurrence.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005


def _splitmix64(x: int) -> int:
    """One splitmix64 scramble step; used only for seed/stream derivation."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _tag_hash(tag: str | int) -> int:
    if isinstance(tag, int):
        return _splitmix64(tag & _MASK64)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, tag: str | int) -> int:
    """Stable 64-bit sub-seed for (seed, tag); used to key child components."""
    return _splitmix64((seed & _MASK64) ^ _tag_hash(tag))


class Pcg32:
    """PCG-XSH-RR 64/32 stream.

    Scalar state arithmetic uses Python ints (exact, no overflow warnings);
    bulk draws use uint64 numpy arrays with wrapping semantics.
    """

    def __init__(self, seed: int, stream: int = 0):
        self._base_seed = seed & _MASK64
        self._inc = ((stream & _MASK64) << 1 | 1) & _MASK64
        self._state = 0
        self._step()
        self._state = (self._state + self._base_seed) & _MASK64
        self._step()

    def _step(self) -> None:
        self._state = (self._state * _MULT + self._inc) & _MASK64

    @staticmethod
    def _output(state: int) -> int:
        xorshifted = ((state >> 18) ^ state) >> 27 & 0xFFFFFFFF
        rot = state >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def next_u32(self) -> int:
        old = self._state
        self._step()
        return self._output(old)

    def u32_array(self, n: int) -> np.ndarray:
        """n outputs of the sequential recurrence, computed vectorized."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        mult = np.uint64(_MULT)
        # powers[i] = A^i, sums[i] = sum_{j<i} A^j  (mod 2^64)
        powers = np.empty(n, dtype=np.uint64)
        powers[0] = np.uint64(1)
        if n > 1:
            powers[1:] = np.cumprod(np.full(n - 1, mult, dtype=np.uint64))
        sums = np.zeros(n, dtype=np.uint64)
        if n > 1:
            sums[1:] = np.cumsum(powers[:-1])
        s0 = np.uint64(self._state)
        inc = np.uint64(self._inc)
        states = powers * s0 + sums * inc
        # advance the scalar state by n steps
        a_n = (int(powers[-1]) * _MULT) & _MASK64
        b_n = (int(sums[-1]) + int(powers[-1])) & _MASK64
        self._state = (a_n * self._state + b_n * self._inc) & _MASK64
        # XSH-RR output permutation, vectorized
        xorshifted = (((states >> np.uint64(18)) ^ states) >> np.uint64(27)).astype(
            np.uint32
        )
        rot = (states >> np.uint64(59)).astype(np.uint32)
        out = (xorshifted >> rot) | (xorshifted << ((-rot) & np.uint32(31)))
        return out.astype(np.uint64)

    def random(self, n: int | None = None):
        """Uniform float64 in [0, 1) with full 53-bit resolution."""
        m = 1 if n is None else n
        bits = self.u32_array(2 * m)
        u64 = (bits[0::2] << np.uint64(32)) | bits[1::2]
        vals = (u64 >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        return float(vals[0]) if n is None else vals

    def uniform(self, lo: float, hi: float, n: int | None = None):
        u = self.random(n)
        return lo + (hi - lo) * u

    def normal(self, n: int | None = None):
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        m = 1 if n is None else n
        pairs = (m + 1) // 2
        u = self.random(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        z = z[:m]
        return float(z[0]) if n is None else z

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n).

        Bounded draws use the multiply-shift trick ``(u32 * k) >> 32``; the
        ~2^-32 bias is irrelevant for shuffling and keeps the draw count at
        exactly one word per swap.
        """
        perm = np.arange(n)
        if n < 2:
            return perm
        words = self.u32_array(n - 1)
        for i in range(n - 1, 0, -1):
            j = (int(words[n - 1 - i]) * (i + 1)) >> 32
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def derive(self, tag: str | int) -> "Pcg32":
        """Child stream keyed by (this stream's seed, tag); independent draws."""
        h = _tag_hash(tag)
        seed = _splitmix64(self._base_seed ^ h)
        stream = _splitmix64((self._base_seed + h) & _MASK64)
        return Pcg32(seed, stream)
