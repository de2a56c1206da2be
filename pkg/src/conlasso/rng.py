"""Portable counter-based random stream.

The generator is SplitMix64 used in counter mode, so the stream is fully
described by a few integer operations and can be reproduced in any language:

* ``key = mix64(seed)``, where ``seed`` is reduced mod 2**64;
* the i-th raw output (i = 0, 1, ...) is
  ``mix64(key + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``;
* ``mix64(z)``: ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
  z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31``
  (all arithmetic mod 2**64).

Uniforms on [0, 1) are ``(raw >> 11) * 2**-53``. Normals use Box-Muller on
consecutive uniform pairs ``(u1, u2)``: ``sqrt(-2 log(1 - u1)) cos(2 pi u2)``
then ``... sin(2 pi u2)``. Permutations are Fisher-Yates from the last
position down with ``j = floor(u * (i + 1))``.

Independent sub-streams (folds, subsamples) come from :meth:`SplitMix64.spawn`,
which keys a new stream by ``mix64(key ^ mix64(stream_id + 1))``.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer on a uint64 scalar or array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * _M1
        z = z ^ (z >> np.uint64(27))
        z = z * _M2
        z = z ^ (z >> np.uint64(31))
    return z


class SplitMix64:
    """Counter-mode SplitMix64 stream.

    Parameters
    ----------
    seed : int
        Any Python integer; reduced modulo 2**64.

    Examples
    --------
    >>> g = SplitMix64(123)
    >>> u = g.uniform(3)
    >>> bool(np.all((0 <= u) & (u < 1)))
    True
    """

    def __init__(self, seed: int = 0, _key=None):
        self.seed = int(seed) & _MASK
        self.key = mix64(np.uint64(self.seed)) if _key is None else np.uint64(_key)
        self.counter = 0

    def raw(self, size: int) -> np.ndarray:
        """Next ``size`` 64-bit outputs."""
        idx = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            return mix64(self.key + idx * GOLDEN)

    def uniform(self, size: int) -> np.ndarray:
        return (self.raw(size) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, size: int) -> np.ndarray:
        """Standard normals by Box-Muller; consumes ``2 * ceil(size / 2)`` uniforms."""
        m = (size + 1) // 2
        u = self.uniform(2 * m)
        u1, u2 = u[0::2], u[1::2]
        rad = np.sqrt(-2.0 * np.log1p(-u1))
        out = np.empty(2 * m)
        out[0::2] = rad * np.cos(2.0 * np.pi * u2)
        out[1::2] = rad * np.sin(2.0 * np.pi * u2)
        return out[:size]

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for t, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[t] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def sample(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, in draw order."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        return self.permutation(n)[n - k:][::-1].copy()

    def spawn(self, stream_id: int) -> "SplitMix64":
        key = mix64(self.key ^ mix64(np.uint64((int(stream_id) + 1) & _MASK)))
        return SplitMix64(self.seed, _key=key)
