"""Vision rendering.

Every cell within the visual range projects onto the unit circle around the
observer as an arc centered at the cell's bearing with half-angle
asin(min(1, 0.5/distance)).  The cell's rendered color is its raw color sum
scaled by two multiplicative factors:

  * field-of-view: the fraction of the cell's arc inside the view arc
    (length = the configured angle, centered on the facing direction);
  * occlusion: max(1 - sum over closer items of o_i * overlap fraction, 0).

The observer's own cell is always fully visible.  The output tensor is
egocentric: the facing direction points up (row 0 is farthest ahead).
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

DIRECTIONS = ("N", "E", "S", "W")
_DIR_CODE = {"N": 0, "E": 1, "S": 2, "W": 3}
_DIR_ANGLE = {"N": math.pi / 2, "E": 0.0, "S": -math.pi / 2, "W": math.pi}

# movement deltas; +y is north
DIR_DELTA = {"N": (0, 1), "E": (1, 0), "S": (0, -1), "W": (-1, 0)}
LEFT_OF = {"N": "W", "W": "S", "S": "E", "E": "N"}
RIGHT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}


def direction_code(direction: str) -> int:
    return _DIR_CODE[direction]


def arc_intersection(center1: float, half1: float,
                     center2: float, half2: float) -> float:
    """Length of the intersection of two arcs on the circle.

    Valid for half-widths up to pi (arcs up to the full circle); the result
    is capped at the smaller arc's length.
    """
    d = (center1 - center2) % (2.0 * math.pi)
    if d > math.pi:
        d = 2.0 * math.pi - d
    inner = max(0.0, half1 + half2 - d) + \
        max(0.0, half1 + half2 - (2.0 * math.pi - d))
    return min(inner, 2.0 * min(half1, half2))


def _cell_arc(offset: tuple[int, int]) -> tuple[float, float, float]:
    """(distance, bearing, half-angle) of a cell's projected arc."""
    dist = math.hypot(offset[0], offset[1])
    bearing = math.atan2(offset[1], offset[0])
    half = math.asin(min(1.0, 0.5 / dist))
    return dist, bearing, half


def fov_factor(fov_degrees: float, cell_offset: tuple[int, int],
               direction: str) -> float:
    """Fraction of the cell's arc inside the field-of-view arc."""
    if cell_offset == (0, 0):
        return 1.0
    view_half = math.radians(fov_degrees) / 2.0
    if view_half >= math.pi:
        return 1.0  # the full circle has no boundary to clip against
    _, bearing, half = _cell_arc(cell_offset)
    return arc_intersection(_DIR_ANGLE[direction], view_half,
                            bearing, half) / (2.0 * half)


def occlusion_factor(cell_offset: tuple[int, int],
                     occluders: Iterable[tuple[tuple[int, int], float]]
                     ) -> float:
    """Attenuation from items between the observer and the cell.

    Callers must pass only items strictly closer to the observer than the
    cell; the item on the cell itself never occludes it.
    """
    if cell_offset == (0, 0):
        return 1.0
    _, bearing, half = _cell_arc(cell_offset)
    arc = 2.0 * half
    cover = 0.0
    for offset, opacity in occluders:
        _, ob, oh = _cell_arc(offset)
        cover += opacity * arc_intersection(ob, oh, bearing, half) / arc
    return max(1.0 - cover, 0.0)


def egocentric_index(direction: str, offset: tuple[int, int],
                     radius: int) -> tuple[int, int]:
    """(row, col) of a world-frame offset in the egocentric tensor."""
    dx, dy = offset
    if direction == "N":
        fwd, right = dy, dx
    elif direction == "E":
        fwd, right = dx, -dy
    elif direction == "S":
        fwd, right = -dy, -dx
    else:
        fwd, right = -dx, dy
    return radius - fwd, radius + right


def render_egocentric(items: Sequence[tuple[int, int, int]],
                      agents: Sequence[tuple[int, int, Sequence[float]]],
                      direction: str, radius: int, fov_degrees: float,
                      type_colors: np.ndarray,
                      type_occlusion: np.ndarray) -> np.ndarray:
    """Egocentric vision tensor, computed through the compiled kernel.

    `items` holds (dx, dy, type_id) world-frame offsets from the observer
    within the Chebyshev box of `radius`; `agents` holds (dx, dy, color)
    including the observer itself at (0, 0).
    """
    n_ch = type_colors.shape[1]
    out = np.zeros((2 * radius + 1, 2 * radius + 1, n_ch))
    n_items = len(items)
    it_dx = np.fromiter((i[0] for i in items), np.int64, n_items)
    it_dy = np.fromiter((i[1] for i in items), np.int64, n_items)
    it_type = np.fromiter((i[2] for i in items), np.int16, n_items)
    n_agents = len(agents)
    ag_dx = np.fromiter((a[0] for a in agents), np.int64, n_agents)
    ag_dy = np.fromiter((a[1] for a in agents), np.int64, n_agents)
    ag_colors = np.zeros((n_agents, n_ch))
    for k, a in enumerate(agents):
        ag_colors[k] = a[2]
    _kernels.render_vision(out, _DIR_CODE[direction], radius,
                           math.radians(fov_degrees),
                           it_dx, it_dy, it_type, n_items,
                           ag_dx, ag_dy, ag_colors, n_agents,
                           type_colors, type_occlusion)
    return out


def render_reference(items: Sequence[tuple[int, int, int]],
                     agents: Sequence[tuple[int, int, Sequence[float]]],
                     direction: str, radius: int, fov_degrees: float,
                     type_colors: np.ndarray,
                     type_occlusion: np.ndarray) -> np.ndarray:
    """Pure rendering used to pin the kernel in tests."""
    n_ch = type_colors.shape[1]
    width = 2 * radius + 1
    base = np.zeros((width, width, n_ch))
    for dx, dy, t in items:
        base[dx + radius, dy + radius] += type_colors[t]
    for dx, dy, color in agents:
        base[dx + radius, dy + radius] += np.asarray(color, dtype=float)

    occluders = [((dx, dy), float(type_occlusion[t]))
                 for dx, dy, t in items
                 if type_occlusion[t] > 0.0 and (dx, dy) != (0, 0)]

    out = np.zeros_like(base)
    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            offset = (dx, dy)
            dist = math.hypot(dx, dy)
            closer = [(off, o) for off, o in occluders
                      if math.hypot(off[0], off[1]) < dist]
            factor = fov_factor(fov_degrees, offset, direction) * \
                occlusion_factor(offset, closer)
            row, col = egocentric_index(direction, offset, radius)
            out[row, col] = base[dx + radius, dy + radius] * factor
    return out


def visible_mask(radius: int, fov_degrees: float) -> np.ndarray:
    """Egocentric boolean grid of cells with nonzero field-of-view factor."""
    out = np.zeros((2 * radius + 1, 2 * radius + 1), dtype=np.uint8)
    _kernels.fov_mask(out, radius, math.radians(fov_degrees))
    return out
