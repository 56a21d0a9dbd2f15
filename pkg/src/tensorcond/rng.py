"""Platform-independent seeded random numbers.

The generator is SplitMix64 run in counter mode: output ``i`` (starting at
1) is ``mix(seed + i * 0x9E3779B97F4A7C15)`` with the usual SplitMix64
finaliser, all arithmetic modulo 2**64.  Uniforms in ``[0, 1)`` take the top
53 bits.  Normal variates come from the Box-Muller transform applied to
consecutive pairs ``(u1, u2)``: ``sqrt(-2 log(1 - u1)) * (cos, sin)(2 pi u2)``,
cosine first.  A request for ``n`` normals consumes ``2 * ceil(n / 2)``
uniforms.  Nothing depends on numpy's own generators, so streams are
identical on every platform and numpy version.
"""
from __future__ import annotations

import math

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SeededRng:
    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def uint64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = (self.uint64(n) >> np.uint64(11)).astype(float) * 2.0 ** -53
        return float(u[0]) if size is None else u.reshape(size)

    def standard_normal(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        rad = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        ang = 2.0 * math.pi * u[:, 1]
        z = np.column_stack((rad * np.cos(ang), rad * np.sin(ang))).reshape(-1)[:n]
        return float(z[0]) if size is None else z.reshape(size)

    def orthonormal(self, n: int, k: int) -> np.ndarray:
        """``n x k`` matrix with orthonormal columns (QR of a normal matrix)."""
        q, r = np.linalg.qr(self.standard_normal((n, k)))
        return q * np.sign(np.diag(r))

    def orthogonal(self, n: int) -> np.ndarray:
        return self.orthonormal(n, n)
