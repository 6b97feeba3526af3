"""Portable deterministic random numbers for reproducible experiment data.

The generator is SplitMix64 (Steele, Lea, Flood; the mixing constants below
are the published reference ones).  It keeps a single 64-bit word of state,
so a seed written in a report is enough to regenerate the exact problem data
in any language.  Algorithm, per draw:

    state  = (state + 0x9E3779B97F4A7C15) mod 2^64
    z      = state
    z      = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z      = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

Uniforms take the top 53 bits: u = (output >> 11) * 2^-53, giving [0, 1).
Normals use the Box-Muller transform on pairs of draws, with the first
uniform shifted into (0, 1] so the logarithm is always defined:

    u1 = ((x1 >> 11) + 1) * 2^-53        in (0, 1]
    u2 = (x2 >> 11) * 2^-53              in [0, 1)
    z0 = sqrt(-2 ln u1) cos(2 pi u2)
    z1 = sqrt(-2 ln u1) sin(2 pi u2)

Each ``normals(k)`` call consumes whole pairs; for odd k the second half of
the final pair is discarded rather than carried over, so the stream position
after a call depends only on k.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0**-53


class SplitMix64:
    """SplitMix64 stream seeded with a single integer."""

    def __init__(self, seed):
        self._state = int(seed) & _MASK

    def next_u64(self):
        """Next raw 64-bit output as a Python int."""
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniforms(self, count):
        """Array of ``count`` doubles uniform on [0, 1)."""
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            out[i] = (self.next_u64() >> 11) * _INV53
        return out

    def normals(self, count):
        """Array of ``count`` standard normal doubles via Box-Muller."""
        out = np.empty(count, dtype=np.float64)
        for i in range(0, count, 2):
            u1 = ((self.next_u64() >> 11) + 1) * _INV53
            u2 = (self.next_u64() >> 11) * _INV53
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < count:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        return out
