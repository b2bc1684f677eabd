"""Seeded SplitMix64 stream.

Every random draw in the package comes from this generator, so any
implementation can reproduce a run from the seed alone. The stream is::

    state_t = seed + t * 0x9E3779B97F4A7C15          (mod 2**64), t = 1, 2, ...
    z = state_t
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out_t = z ^ (z >> 31)

Derived draws:

* ``uniform``: ``(out >> 11) * 2**-53`` in [0, 1).
* ``integers(high)``: ``floor(uniform * high)``.
* ``normal``: Box-Muller on consecutive pairs ``(u1, u2)``, taking
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``; one normal per pair.

``spawn(label)`` derives an independent child stream whose seed is the next
raw output xor-ed with ``label``.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def raw(self, size):
        """Next ``size`` 64-bit outputs as a uint64 array."""
        t = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + t * GAMMA
        self.state = (self.state + size * int(GAMMA)) & _MASK
        return _mix(states)

    def next_u64(self):
        return int(self.raw(1)[0])

    def uniform(self, size, low=0.0, high=1.0):
        u = (self.raw(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def integers(self, high, size):
        return np.floor(self.uniform(size) * high).astype(np.int64)

    def normal(self, size, scale=1.0):
        u = self.uniform(2 * size).reshape(size, 2)
        return scale * np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])

    def spawn(self, label=0):
        return SplitMix64(self.next_u64() ^ (int(label) & _MASK))
