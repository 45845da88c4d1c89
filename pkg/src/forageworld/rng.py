"""Deterministic pseudorandom number generation.

All randomness in the simulator flows through :class:`Pcg32`, a PCG-XSH-RR
64/32 generator.  The generator state is two 64-bit words (state, increment),
which makes save files portable: restoring the words restores the exact
output stream on every platform.
"""

from __future__ import annotations

_MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


class Pcg32:
    """PCG-XSH-RR 64/32 generator with explicit, serializable state.

    Parameters
    ----------
    seed : int
        Initial state contribution (any 64-bit value).
    seq : int
        Stream selector; distinct values give independent streams.
    """

    __slots__ = ("state", "inc")

    def __init__(self, seed: int = 0, seq: int = 0):
        # Canonical pcg32_srandom_r seeding sequence.
        self.state = 0
        self.inc = ((seq << 1) | 1) & _MASK64
        self.next_u32()
        self.state = (self.state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _MULT + self.inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & _MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _MASK32

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via rejection sampling (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (-bound) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def next_real(self) -> float:
        """Uniform float in [0, 1) with 32 bits of resolution."""
        return self.next_u32() / 4294967296.0

    def getstate(self) -> tuple[int, int]:
        return (self.state, self.inc)

    def setstate(self, state: tuple[int, int]) -> None:
        s, inc = state
        if inc % 2 == 0:
            raise ValueError("increment must be odd")
        self.state = s & _MASK64
        self.inc = inc & _MASK64

    @classmethod
    def from_state(cls, state: tuple[int, int]) -> "Pcg32":
        rng = cls.__new__(cls)
        rng.setstate(state)
        return rng

    def __repr__(self) -> str:
        return f"Pcg32(state={self.state:#018x}, inc={self.inc:#018x})"
