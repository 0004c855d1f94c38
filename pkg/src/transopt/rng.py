"""Splittable, counter-based 64-bit random number generation.

Every random draw in the package goes through :class:`SplitRng` so that
datasets, initialisations and training runs are bit-reproducible across
machines and independent of numpy's global state.

Generator
---------
The core is SplitMix64.  A stream holds a 64-bit ``state``; the ``i``-th
output (``i = 1, 2, ...``) is::

    mix64(state + i * GAMMA)      (mod 2**64)

with ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` the SplitMix64 finaliser::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

Because outputs depend only on the counter, blocks of draws are computed
vectorised with numpy ``uint64`` arithmetic.

Derived values:

* uniform doubles in ``[0, 1)``: ``(u64 >> 11) * 2**-53``
* standard normals: Box-Muller on consecutive uniform pairs
  ``(u1, u2)``: ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``
* permutations: stable argsort of a block of ``u64`` draws

Splitting
---------
``rng.split(stream_id)`` returns a child whose state is
``mix64(parent.state ^ mix64(stream_id + GAMMA))``.  Splitting does not
advance the parent.

Seed hashing
------------
:func:`hash_words` folds any number of unsigned integers into one 64-bit
seed: ``h = GAMMA; for w in words: h = mix64((h ^ w) + GAMMA)``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_GAMMA = np.uint64(GAMMA)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))


def mix64(z: int) -> int:
    """SplitMix64 finaliser on a Python int (taken mod 2**64)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def hash_words(*words: int) -> int:
    h = GAMMA
    for w in words:
        h = mix64((h ^ (int(w) & MASK64)) + GAMMA)
    return h


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _U_M1
        z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


class SplitRng:
    """A single SplitMix64 stream.

    >>> a = SplitRng(42)
    >>> b = SplitRng(42)
    >>> bool((a.uniform(5) == b.uniform(5)).all())
    True
    """

    __slots__ = ("state", "stream")

    def __init__(self, seed: int, stream: int = 0):
        self.state = mix64(int(seed) ^ mix64(int(stream) + GAMMA))
        self.stream = int(stream) & MASK64

    @classmethod
    def _from_state(cls, state: int, stream: int) -> "SplitRng":
        rng = cls.__new__(cls)
        rng.state = state & MASK64
        rng.stream = stream & MASK64
        return rng

    def split(self, stream_id: int) -> "SplitRng":
        child = mix64(self.state ^ mix64(int(stream_id) + GAMMA))
        return SplitRng._from_state(child, stream_id)

    def next_u64(self, n: int | None = None):
        """Draw ``n`` raw 64-bit words (one Python int when ``n`` is None)."""
        if n is None:
            self.state = (self.state + GAMMA) & MASK64
            return mix64(self.state)
        n = int(n)
        base = np.uint64(self.state)
        with np.errstate(over="ignore"):
            ctr = np.arange(1, n + 1, dtype=np.uint64) * _U_GAMMA + base
        self.state = (self.state + n * GAMMA) & MASK64
        return _mix64_array(ctr)

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0):
        if shape is None:
            u = (self.next_u64() >> 11) * 2.0**-53
            return low + (high - low) * u
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> _S11).astype(np.float64) * 2.0**-53
        u = u.reshape(shape)
        if low == 0.0 and high == 1.0:
            return u
        return low + (high - low) * u

    def normal(self, shape) -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u = self.uniform(2 * n).reshape(n, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        return (r * np.cos(2.0 * np.pi * u[:, 1])).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.next_u64(n), kind="stable")

    def __repr__(self) -> str:
        return f"SplitRng(state=0x{self.state:016x}, stream={self.stream})"
