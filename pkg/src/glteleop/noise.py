"""Self-contained pseudo-random generator for reproducible scenario synthesis.

Scenario files and their golden logs must hash identically forever, so the
generator is pinned to SplitMix64 (Steele, Lea & Flood's published mixing
constants) rather than to any library RNG whose stream could change between
releases.  Gaussians come from the trigonometric Box-Muller transform with a
cached spare, so one draw consumes exactly two 64-bit outputs.
"""

from __future__ import annotations

import math
from typing import Optional

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """64-bit SplitMix64 stream with uniform and normal float helpers."""

    def __init__(self, seed: int):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ValueError(f"seed must be an int, got {seed!r}")
        self._state = seed & _MASK
        self._spare: Optional[float] = None

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        """Uniform float in [low, high) from the top 53 bits of one output."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return low + (high - low) * u

    def normal(self, loc: float = 0.0, scale: float = 1.0) -> float:
        """Standard Box-Muller Gaussian, scaled and shifted."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return loc + scale * z
        # u1 in (0, 1] keeps the log finite; u2 in [0, 1).
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return loc + scale * (r * math.cos(2.0 * math.pi * u2))
