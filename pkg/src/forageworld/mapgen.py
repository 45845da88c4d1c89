"""Infinite map generation.

The world is an unbounded grid divided into disjoint patch_size x patch_size
patches, generated on demand.  Items inside a patch are drawn from a pairwise
interaction point process

    p(items) ∝ exp( Σ_i f(item_i) + Σ_i Σ_{j≠i} g(item_i, item_j) )

by Metropolis-Hastings, where j additionally ranges over the items of the
eight neighboring patches (the sampling context).  Pairs farther apart than
the patch size (Chebyshev distance) do not interact.

A patch being generated first materializes any missing neighbors as
*speculative* patches (sampled, but re-samplable later) so the target sees a
full context and no boundary artifacts; the target itself is then sampled and
marked *fixed*, never to change again.

``mh_step`` is the readable single-transition reference; bulk sampling runs
in the compiled ``_kernels.mh_run``, and the tests check the two produce
identical chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from . import _kernels
from .config import WorldConfig
from .functions import (
    Constant,
    Cross,
    CrossHash,
    PiecewiseBox,
    RadialHash,
    ZeroInteraction,
    eval_intensity,
    eval_interaction,
    interaction_range,
)
from .rng import Pcg32

FIXED = "fixed"
SPECULATIVE = "speculative"

# Neighbor offsets in canonical generation order.
NEIGHBOR_OFFSETS = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0),
                    (-1, 1), (0, 1), (1, 1))


@dataclass(frozen=True)
class Item:
    """An item on the map at an absolute grid position."""

    position: tuple[int, int]
    type_id: int
    created_at: int = 0


@dataclass
class Patch:
    patch_coord: tuple[int, int]
    status: str
    items: list[Item] = field(default_factory=list)


class FunctionTables:
    """Config function specs compiled to the array form the kernels take."""

    def __init__(self, config: WorldConfig):
        n = len(config.item_types)
        self.intensity_codes = np.zeros(n, dtype=np.int8)
        self.intensity_params = np.zeros((n, 4), dtype=np.float64)
        self.interaction_codes = np.zeros((n, n), dtype=np.int8)
        self.interaction_params = np.zeros((n, n, 8), dtype=np.float64)
        # Chebyshev distance beyond which a pair's interaction is certainly
        # zero; -1 means the pair never interacts.  Capped by the patch size,
        # the model's hard interaction cutoff.
        self.interaction_bound = np.full((n, n), -1.0, dtype=np.float64)

        for i, t in enumerate(config.item_types):
            fn = t.intensity
            if isinstance(fn, Constant):
                self.intensity_codes[i] = _kernels.INTENSITY_CONSTANT
                self.intensity_params[i, 0] = fn.value
            elif isinstance(fn, RadialHash):
                self.intensity_codes[i] = _kernels.INTENSITY_RADIAL_HASH
                self.intensity_params[i, :4] = (fn.shift, fn.scale,
                                                fn.base, fn.gain)
            for j in range(n):
                g = config.interaction(i, j)
                if isinstance(g, ZeroInteraction):
                    continue
                if isinstance(g, PiecewiseBox):
                    self.interaction_codes[i, j] = \
                        _kernels.INTERACTION_PIECEWISE_BOX
                    self.interaction_params[i, j, :4] = (
                        g.near_cutoff, g.far_cutoff, g.near_value, g.far_value)
                elif isinstance(g, Cross):
                    self.interaction_codes[i, j] = _kernels.INTERACTION_CROSS
                    self.interaction_params[i, j, :6] = (
                        g.near_cutoff, g.far_cutoff, g.aligned_near,
                        g.aligned_far, g.misaligned_near, g.misaligned_far)
                else:
                    self.interaction_codes[i, j] = \
                        _kernels.INTERACTION_CROSS_HASH
                    self.interaction_params[i, j, :8] = (
                        g.scale, g.base, g.gain, g.band, g.aligned_near,
                        g.aligned_far, g.misaligned_near, g.misaligned_far)
                self.interaction_bound[i, j] = min(
                    float(config.patch_size), interaction_range(g))


# ---------------------------------------------------------------------------
# Log-density (pure reference; the kernel computes increments of it).


def log_density(items: Iterable[Item], context: Iterable[Item],
                config: WorldConfig) -> float:
    """Score of `items` given fixed `context` items under the point process.

    Sums each item's intensity plus interactions over ordered pairs (i, j)
    with i from `items` and j from `items` and `context`, i != j.  Pairs
    farther than the patch size in Chebyshev distance contribute nothing.
    """
    items = list(items)
    context = list(context)
    cutoff = config.patch_size
    total = 0.0
    for it in items:
        total += eval_intensity(config.item_types[it.type_id].intensity,
                                it.position)
    for it in items:
        for other in items:
            if other is it:
                continue
            total += _pair_term(it, other, config, cutoff)
        for other in context:
            total += _pair_term(it, other, config, cutoff)
    return total


def _pair_term(a: Item, b: Item, config: WorldConfig, cutoff: int) -> float:
    if (max(abs(a.position[0] - b.position[0]),
            abs(a.position[1] - b.position[1])) > cutoff):
        return 0.0
    return eval_interaction(config.interaction(a.type_id, b.type_id),
                            a.position, b.position)


def _exp(x: float) -> float:
    # math.exp raises on overflow; the kernels saturate to inf instead.
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _delta_item(item: Item, items: list[Item], context: list[Item],
                config: WorldConfig) -> float:
    """Log-density change from adding `item` to `items` (which excludes it)."""
    cutoff = config.patch_size
    delta = eval_intensity(config.item_types[item.type_id].intensity,
                           item.position)
    for other in items:
        delta += _pair_term(item, other, config, cutoff)
        delta += _pair_term(other, item, config, cutoff)
    for other in context:
        delta += _pair_term(item, other, config, cutoff)
    return delta


# ---------------------------------------------------------------------------
# Metropolis-Hastings, one transition at a time (reference implementation).


def mh_step(patch: Patch, context: list[Item], rng: Pcg32,
            config: WorldConfig) -> None:
    """One MH transition on `patch.items`, in place.

    Proposes an addition (uniform over cell and type) with probability 1/2,
    otherwise removal of a uniformly chosen item.  Additions onto occupied
    cells are rejected outright; removal from an empty patch is a no-op.
    The acceptance ratio carries the Hastings correction for the asymmetric
    proposal: q_add = 1/(2 P² T) per specific placement and q_remove = 1/(2m)
    per specific item.
    """
    p = config.patch_size
    n_types = len(config.item_types)
    items = patch.items
    x0 = patch.patch_coord[0] * p
    y0 = patch.patch_coord[1] * p
    p2t = float(p * p * n_types)

    if rng.next_real() < 0.5:
        cell = rng.next_below(p * p)
        type_id = rng.next_below(n_types)
        pos = (x0 + cell % p, y0 + cell // p)
        if any(it.position == pos for it in items):
            return
        candidate = Item(pos, type_id)
        delta = _delta_item(candidate, items, context, config)
        ratio = _exp(delta) * p2t / (len(items) + 1.0)
        if rng.next_real() < ratio:
            items.append(candidate)
    else:
        m = len(items)
        if m == 0:
            return
        idx = rng.next_below(m)
        rest = items[:idx] + items[idx + 1:]
        delta = -_delta_item(items[idx], rest, context, config)
        ratio = _exp(delta) * m / p2t
        if rng.next_real() < ratio:
            del items[idx]


# ---------------------------------------------------------------------------
# Bulk sampling through the compiled kernel.


def _grouped_context(context: list[Item], x0: int, y0: int, p: int,
                     n_types: int, bound: np.ndarray):
    """Context arrays grouped by candidate item type.

    For candidate type t only items that could interact with *some* position
    in the patch box are kept (Chebyshev distance from the box within the
    pair's bound, either direction).  Original order is preserved within each
    group, so the kernel's float accumulation matches the unfiltered
    reference sum exactly (dropped terms are exact zeros).
    """
    n = len(context)
    off = np.zeros(n_types + 1, dtype=np.int64)
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.int16), off
    xs = np.fromiter((it.position[0] for it in context), np.int64, n)
    ys = np.fromiter((it.position[1] for it in context), np.int64, n)
    types = np.fromiter((it.type_id for it in context), np.int16, n)
    box_dist = np.maximum.reduce([x0 - xs, xs - (x0 + p - 1),
                                  y0 - ys, ys - (y0 + p - 1),
                                  np.zeros(n, dtype=np.int64)])
    reach = np.maximum(bound, bound.T)
    keep_xs, keep_ys, keep_types = [], [], []
    for t in range(n_types):
        mask = box_dist <= reach[t, types]
        off[t + 1] = off[t] + int(mask.sum())
        keep_xs.append(xs[mask])
        keep_ys.append(ys[mask])
        keep_types.append(types[mask])
    return (np.concatenate(keep_xs), np.concatenate(keep_ys),
            np.concatenate(keep_types), off)


def sample_patch_items(initial: list[Item], context: list[Item],
                       patch_coord: tuple[int, int], rng: Pcg32,
                       config: WorldConfig, tables: FunctionTables,
                       iterations: Optional[int] = None) -> list[Item]:
    """Run the configured MH iteration budget; returns the sampled items."""
    p = config.patch_size
    cap = p * p
    xs = np.zeros(cap, dtype=np.int64)
    ys = np.zeros(cap, dtype=np.int64)
    types = np.zeros(cap, dtype=np.int16)
    occupied = np.zeros(cap, dtype=np.uint8)
    x0 = patch_coord[0] * p
    y0 = patch_coord[1] * p
    for i, it in enumerate(initial):
        xs[i], ys[i] = it.position
        types[i] = it.type_id
        occupied[(it.position[1] - y0) * p + (it.position[0] - x0)] = 1
    ctx_xs, ctx_ys, ctx_types, ctx_off = _grouped_context(
        context, x0, y0, p, len(config.item_types),
        tables.interaction_bound)

    state = np.array(rng.getstate(), dtype=np.uint64)
    n = _kernels.mh_run(
        xs, ys, types, len(initial), occupied,
        ctx_xs, ctx_ys, ctx_types, ctx_off,
        np.int64(x0), np.int64(y0), p, len(config.item_types),
        iterations if iterations is not None else config.mh_iterations,
        tables.intensity_codes, tables.intensity_params,
        tables.interaction_codes, tables.interaction_params,
        tables.interaction_bound, state)
    rng.setstate((int(state[0]), int(state[1])))
    return [Item((int(xs[i]), int(ys[i])), int(types[i]))
            for i in range(n)]


# ---------------------------------------------------------------------------
# The sparse world map.


class WorldMap:
    """Sparse mapping of patch coordinates to patches.

    Items of fixed patches are additionally indexed per cell in `occupancy`
    for O(1) lookup during simulation; speculative patches exist only as
    sampling context and are invisible to agents.
    """

    def __init__(self, config: WorldConfig):
        self.config = config
        self.tables = FunctionTables(config)
        self.patches: dict[tuple[int, int], Patch] = {}
        self.occupancy: dict[tuple[int, int], Item] = {}

    def patch_coord_of(self, position: tuple[int, int]) -> tuple[int, int]:
        p = self.config.patch_size
        return (position[0] // p, position[1] // p)

    def item_at(self, position: tuple[int, int]) -> Optional[Item]:
        return self.occupancy.get(position)

    def is_fixed(self, patch_coord: tuple[int, int]) -> bool:
        patch = self.patches.get(patch_coord)
        return patch is not None and patch.status == FIXED

    def fixed_patch_coords(self) -> list[tuple[int, int]]:
        return sorted(c for c, p in self.patches.items() if p.status == FIXED)

    def generate_patch(self, patch_coord: tuple[int, int],
                       rng: Pcg32) -> Patch:
        """Sample and fix the patch at `patch_coord`.

        Missing neighbors are first created as speculative patches (their own
        missing neighbors count as empty context).  The target is then
        initialized fresh, sampled against the full 8-neighbor context, and
        fixed.  Returns the fixed patch; newly fixed items carry created_at=0
        (the caller stamps times).
        """
        existing = self.patches.get(patch_coord)
        if existing is not None and existing.status == FIXED:
            raise ValueError(f"patch {patch_coord} is already fixed")
        for off in NEIGHBOR_OFFSETS:
            nc = (patch_coord[0] + off[0], patch_coord[1] + off[1])
            if nc not in self.patches:
                self.patches[nc] = self._sample_new(nc, rng)
        target = self._sample_new(patch_coord, rng)
        target.status = FIXED
        self.patches[patch_coord] = target
        for it in target.items:
            self.occupancy[it.position] = it
        return target

    def _sample_new(self, patch_coord: tuple[int, int], rng: Pcg32) -> Patch:
        # Initialize by copying a uniformly chosen fixed patch (translated),
        # which seeds the chain near the stationary distribution.
        fixed = self.fixed_patch_coords()
        initial: list[Item] = []
        if fixed:
            src = self.patches[fixed[rng.next_below(len(fixed))]]
            p = self.config.patch_size
            dx = (patch_coord[0] - src.patch_coord[0]) * p
            dy = (patch_coord[1] - src.patch_coord[1]) * p
            initial = [replace(it, position=(it.position[0] + dx,
                                             it.position[1] + dy))
                       for it in src.items]
        items = sample_patch_items(initial, self.context_items(patch_coord),
                                   patch_coord, rng, self.config, self.tables)
        # Canonical item order keeps later context sums identical across
        # save/load round-trips.
        items.sort(key=lambda it: it.position)
        return Patch(patch_coord, SPECULATIVE, items)

    def context_items(self, patch_coord: tuple[int, int]) -> list[Item]:
        out: list[Item] = []
        for off in NEIGHBOR_OFFSETS:
            patch = self.patches.get((patch_coord[0] + off[0],
                                      patch_coord[1] + off[1]))
            if patch is not None:
                out.extend(patch.items)
        return out

    def ensure_generated(self, position: tuple[int, int], radius: int,
                         rng: Pcg32) -> list[Patch]:
        """Fix every patch intersecting the Chebyshev ball around `position`.

        Returns the patches fixed by this call, in generation order.
        """
        p = self.config.patch_size
        x, y = position
        new_patches = []
        for py in range((y - radius) // p, (y + radius) // p + 1):
            for px in range((x - radius) // p, (x + radius) // p + 1):
                if not self.is_fixed((px, py)):
                    new_patches.append(self.generate_patch((px, py), rng))
        return new_patches

    def remove_item(self, item: Item) -> None:
        patch = self.patches[self.patch_coord_of(item.position)]
        items = patch.items
        for k, existing in enumerate(items):
            if existing is item:
                del items[k]
                break
        else:
            items.remove(item)  # equal but distinct instance
        del self.occupancy[item.position]

    def add_item(self, item: Item) -> None:
        coord = self.patch_coord_of(item.position)
        patch = self.patches[coord]
        if patch.status != FIXED:
            raise ValueError(f"cannot place an item in non-fixed patch {coord}")
        if item.position in self.occupancy:
            raise ValueError(f"cell {item.position} is already occupied")
        patch.items.append(item)
        patch.items.sort(key=lambda it: it.position)
        self.occupancy[item.position] = item
