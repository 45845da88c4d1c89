"""Intensity and interaction functions of the item point process.

An item layout is scored by a log-density with two kinds of terms: an
*intensity* per item (how much an item type likes existing at a position)
and an *interaction* per ordered pair of items (attraction or repulsion).
This module defines the supported function forms and evaluates them.

Positions are integer grid cells.  Evaluation is pure; the numeric kernels
in :mod:`forageworld._kernels` mirror these definitions exactly and are
cross-checked against them in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .hashing import hash_interp

# ---------------------------------------------------------------------------
# Intensity forms


@dataclass(frozen=True)
class ZeroIntensity:
    """Identically zero."""


@dataclass(frozen=True)
class Constant:
    """Position-independent intensity."""

    value: float


@dataclass(frozen=True)
class RadialHash:
    """Hash noise over the distance from the origin.

    Evaluates to ``base - gain * hash_interp(r / scale + shift)`` where ``r``
    is the Euclidean distance of the position from the origin.  Produces
    irregular concentric bands, so item abundance varies from region to
    region.
    """

    shift: float
    scale: float
    base: float
    gain: float

    def __post_init__(self):
        if self.scale == 0:
            raise ValueError("RadialHash scale must be nonzero")


IntensityFn = Union[ZeroIntensity, Constant, RadialHash]


# ---------------------------------------------------------------------------
# Interaction forms


@dataclass(frozen=True)
class ZeroInteraction:
    """Identically zero."""


@dataclass(frozen=True)
class PiecewiseBox:
    """Two-band interaction on squared Euclidean distance.

    With d the squared distance between the items: ``near_value`` if
    d < near_cutoff, ``far_value`` if near_cutoff <= d < far_cutoff, else 0.
    """

    near_cutoff: float
    far_cutoff: float
    near_value: float
    far_value: float


@dataclass(frozen=True)
class Cross:
    """Axis-aligned interaction producing cross- or grid-shaped structures.

    With dx, dy the absolute coordinate differences, let d = min(dx, dy) and
    D = max(dx, dy).  Perfect row/column alignment means d = 0.  Values:
    ``aligned_near`` if d = 0 and D <= near_cutoff; ``misaligned_near`` if
    d != 0 and D <= near_cutoff; ``aligned_far`` if d = 0 and
    near_cutoff < D <= far_cutoff; ``misaligned_far`` if d != 0 and
    near_cutoff < D <= far_cutoff; else 0.
    """

    near_cutoff: float
    far_cutoff: float
    aligned_near: float
    aligned_far: float
    misaligned_near: float
    misaligned_far: float


@dataclass(frozen=True)
class CrossHash:
    """Cross interaction whose cutoffs vary by hash noise.

    The near cutoff is ``base + gain * hash_interp(x1 / scale)`` where x1 is
    the first item's x coordinate, and the far cutoff sits ``band`` beyond
    it.  Note the cutoffs depend on the first argument only, so this form is
    not symmetric in its arguments; it is evaluated exactly as defined.
    """

    scale: float
    base: float
    gain: float
    band: float
    aligned_near: float
    aligned_far: float
    misaligned_near: float
    misaligned_far: float

    def __post_init__(self):
        if self.scale == 0:
            raise ValueError("CrossHash scale must be nonzero")


InteractionFn = Union[ZeroInteraction, PiecewiseBox, Cross, CrossHash]


# ---------------------------------------------------------------------------
# Evaluation


def eval_intensity(spec: IntensityFn, pos: tuple[int, int]) -> float:
    if isinstance(spec, ZeroIntensity):
        return 0.0
    if isinstance(spec, Constant):
        return spec.value
    if isinstance(spec, RadialHash):
        x, y = pos
        r = math.sqrt(x * x + y * y)
        return spec.base - spec.gain * hash_interp(r / spec.scale + spec.shift)
    raise TypeError(f"not an intensity function: {spec!r}")


def _cross_cases(dx: int, dy: int, near: float, far: float,
                 an: float, af: float, mn: float, mf: float) -> float:
    d = min(dx, dy)
    big = max(dx, dy)
    if big <= near:
        return an if d == 0 else mn
    if near < big <= far:
        return af if d == 0 else mf
    return 0.0


def eval_interaction(spec: InteractionFn, p1: tuple[int, int],
                     p2: tuple[int, int]) -> float:
    if isinstance(spec, ZeroInteraction):
        return 0.0
    dx = abs(p1[0] - p2[0])
    dy = abs(p1[1] - p2[1])
    if isinstance(spec, PiecewiseBox):
        d = float(dx * dx + dy * dy)
        if d < spec.near_cutoff:
            return spec.near_value
        if d < spec.far_cutoff:
            return spec.far_value
        return 0.0
    if isinstance(spec, Cross):
        return _cross_cases(dx, dy, spec.near_cutoff, spec.far_cutoff,
                            spec.aligned_near, spec.aligned_far,
                            spec.misaligned_near, spec.misaligned_far)
    if isinstance(spec, CrossHash):
        near = spec.base + spec.gain * hash_interp(p1[0] / spec.scale)
        far = near + spec.band
        return _cross_cases(dx, dy, near, far,
                            spec.aligned_near, spec.aligned_far,
                            spec.misaligned_near, spec.misaligned_far)
    raise TypeError(f"not an interaction function: {spec!r}")


def interaction_range(spec: InteractionFn) -> float:
    """Upper bound on the Chebyshev distance at which `spec` can be nonzero.

    Used to skip distant pairs during sampling.  Returns -1 for the zero
    interaction so every pair is skipped.
    """
    if isinstance(spec, ZeroInteraction):
        return -1.0
    if isinstance(spec, PiecewiseBox):
        # Nonzero requires squared Euclidean distance < far_cutoff, and the
        # Chebyshev distance is a lower bound on the Euclidean distance.
        m = max(spec.near_cutoff, spec.far_cutoff)
        return math.sqrt(m) if m > 0 else -1.0
    if isinstance(spec, Cross):
        return max(spec.near_cutoff, spec.far_cutoff)
    if isinstance(spec, CrossHash):
        hi = spec.base + max(0.0, spec.gain)
        return max(hi, hi + spec.band)
    raise TypeError(f"not an interaction function: {spec!r}")
