"""Integer mixing and hash-based noise used by the generation functions.

The noise primitive is the 32-bit finalizer of MurmurHash3 applied to the
integer lattice, linearly interpolated between lattice points.  It is cheap,
deterministic, and has no visible spatial correlation, which is all the
procedural generation needs.
"""

from __future__ import annotations

import math

_MASK32 = 0xFFFFFFFF
_INV_MAX32 = 1.0 / 4294967295.0


def murmur_mix32(h: int) -> int:
    """MurmurHash3 32-bit finalizer (fmix32)."""
    h &= _MASK32
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & _MASK32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & _MASK32
    h ^= h >> 16
    return h


def hash_interp(t: float) -> float:
    """Piecewise-linear hash noise: interpolates murmur_mix32 at ⌊t⌋ and ⌊t⌋+1.

    Lattice values are scaled into [0, 1] by 2**32 - 1.  Negative inputs are
    reduced modulo 2**32 (two's complement), so the function is defined on the
    whole real line.
    """
    i = math.floor(t)
    frac = t - i
    lo = murmur_mix32(i & _MASK32) * _INV_MAX32
    if frac == 0.0:
        return lo
    hi = murmur_mix32((i + 1) & _MASK32) * _INV_MAX32
    return lo * (1.0 - frac) + hi * frac
