"""Scent diffusion.

Each cell's scent follows the linear lattice recurrence

    S^t = C^t + lambda * S^{t-1} + alpha * sum over 4-neighbors of S^{t-1}

where C^t sums the scent vectors of sources (items and agents) present at
the cell at time t.  Linearity lets the field be evaluated lazily from a log
of source appearance (+1) and disappearance (-1) events: a source that
appears at time t0 and never leaves contributes kappa(t - t0, offset), where
kappa is the response of the recurrence to a persistent unit source.

kappa converges geometrically (rate rho = lambda + 4*alpha < 1) to a steady
state, so the kernel is precomputed up to tau_max and replaced by the steady
state beyond; it is also truncated to a finite spatial window chosen so the
lost tail mass is below 1e-7.  Events older than tau_max can then be folded
into per-cell steady-state aggregates without changing any future query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

EPSILON = 1e-9
TAIL_MASS_LIMIT = 1e-7
# Events are folded into steady aggregates only once they are this many steps
# older than tau_max, so queries lagging the present by up to COMPACTION_SLACK
# steps still see exact per-tau values.
COMPACTION_SLACK = 64


@dataclass(frozen=True)
class ScentEvent:
    """A scent source appearing (sign +1) or disappearing (sign -1)."""

    position: tuple[int, int]
    scent: tuple[float, ...]
    sign: int
    time: int


class DiffusionKernel:
    """Response of the scent recurrence to a persistent unit source.

    table[tau, |dx|, |dy|] holds kappa for tau <= tau_max; `steady` holds the
    limit.  Entries beyond `cutoff` in either coordinate are treated as zero.
    """

    def __init__(self, decay: float, diffusion: float):
        if not 0.0 <= decay < 1.0 or diffusion < 0.0:
            raise ValueError("invalid decay/diffusion")
        rho = decay + 4.0 * diffusion
        if rho >= 1.0:
            raise ValueError("recurrence diverges: decay + 4*diffusion >= 1")
        self.decay = decay
        self.diffusion = diffusion
        self.rho = rho

        # smallest tau whose remaining mass rho^(tau+1)/(1-rho) is below the
        # truncation threshold
        if rho == 0.0:
            self.tau_max = 0
        else:
            self.tau_max = max(
                0, math.ceil(math.log(EPSILON * (1.0 - rho)) /
                             math.log(rho)) - 1)

        steady = self._steady_state()
        self.cutoff = self._pick_cutoff(steady)
        n = self.cutoff + 1
        self.steady = np.ascontiguousarray(steady[:n, :n])
        self.table = np.zeros((self.tau_max + 1, n, n))
        grid = np.zeros((n, n))
        for tau in range(self.tau_max + 1):
            grid = self._advance(grid)
            self.table[tau] = grid

    def _advance(self, grid: np.ndarray) -> np.ndarray:
        """One recurrence step on the nonnegative quadrant.

        Neighbors across an axis fold back by symmetry: the cell left of
        (0, dy) is (1, dy).  Mass beyond the array edge is dropped.
        """
        out = self.decay * grid
        out[0, 0] += 1.0
        a = self.diffusion
        out[:-1, :] += a * grid[1:, :]
        out[1:, :] += a * grid[:-1, :]
        out[0, :] += a * grid[1, :]
        out[:, :-1] += a * grid[:, 1:]
        out[:, 1:] += a * grid[:, :-1]
        out[:, 0] += a * grid[:, 1]
        # the true kernel is exactly x/y symmetric; re-symmetrizing removes
        # the tiny axis-order rounding drift so the symmetry is bit-exact
        return 0.5 * (out + out.T)

    def _steady_state(self) -> np.ndarray:
        # iterate on a generous window until sup-norm convergence
        size = 160
        grid = np.zeros((size + 1, size + 1))
        for _ in range(20_000):
            nxt = self._advance(grid)
            if np.max(np.abs(nxt - grid)) < 1e-16:
                return nxt
            grid = nxt
        return grid

    def _pick_cutoff(self, steady: np.ndarray) -> int:
        """Smallest window radius whose excluded steady mass is < 1e-7.

        Mass over the full plane from the quadrant array: cells on an axis
        are shared by two quadrants, the origin by four.
        """
        size = steady.shape[0] - 1
        for k in range(1, size):
            inside = self._plane_mass(steady, k)
            total = self._plane_mass(steady, size)
            if total - inside < TAIL_MASS_LIMIT:
                return k
        return size

    @staticmethod
    def _plane_mass(quadrant: np.ndarray, k: int) -> float:
        block = quadrant[:k + 1, :k + 1]
        return (4.0 * block.sum()
                - 2.0 * block[0, :].sum() - 2.0 * block[:, 0].sum()
                + block[0, 0])

    def kappa(self, tau: int, dx: int, dy: int) -> float:
        dx, dy = abs(dx), abs(dy)
        if tau < 0 or dx > self.cutoff or dy > self.cutoff:
            return 0.0
        if tau > self.tau_max:
            return float(self.steady[dx, dy])
        return float(self.table[tau, dx, dy])


_KERNEL_CACHE: dict[tuple[float, float], DiffusionKernel] = {}


def diffusion_kernel(decay: float, diffusion: float) -> DiffusionKernel:
    key = (decay, diffusion)
    if key not in _KERNEL_CACHE:
        _KERNEL_CACHE[key] = DiffusionKernel(decay, diffusion)
    return _KERNEL_CACHE[key]


# ---------------------------------------------------------------------------


def scent_at(kernel: DiffusionKernel, events: Iterable[ScentEvent],
             position: tuple[int, int], time: int,
             scent_dims: int) -> np.ndarray:
    """Field value at `position` and `time` from an explicit event list.

    Reference path used by tests and small queries; the simulation uses
    ScentField, which evaluates the same sum through the compiled kernel.
    """
    out = np.zeros(scent_dims)
    x, y = position
    for e in events:
        kap = kernel.kappa(time - e.time, x - e.position[0],
                           y - e.position[1])
        if kap != 0.0:
            out += (e.sign * kap) * np.asarray(e.scent)
    return out


def scent_dense_reference(grid_extent: int, events: Sequence[ScentEvent],
                          steps: int, scent_dims: int,
                          decay: float, diffusion: float) -> np.ndarray:
    """Literal recurrence iteration on a bounded grid, for tests.

    Returns field[t, x, y, :] for t = 0..steps over the square
    [-grid_extent, grid_extent]^2.  The grid must be large enough that
    nothing meaningful reaches the boundary within `steps`.
    """
    width = 2 * grid_extent + 1
    field = np.zeros((steps + 1, width, width, scent_dims))
    current = np.zeros((width, width, scent_dims))
    sources = np.zeros((width, width, scent_dims))
    by_time: dict[int, list[ScentEvent]] = {}
    for e in events:
        by_time.setdefault(e.time, []).append(e)
    for t in range(steps + 1):
        for e in by_time.get(t, ()):  # sources present from their event time
            ix = e.position[0] + grid_extent
            iy = e.position[1] + grid_extent
            sources[ix, iy] += e.sign * np.asarray(e.scent)
        spread = np.zeros_like(current)
        spread[:-1, :] += current[1:, :]
        spread[1:, :] += current[:-1, :]
        spread[:, :-1] += current[:, 1:]
        spread[:, 1:] += current[:, :-1]
        current = sources + decay * current + diffusion * spread
        field[t] = current
    return field


# ---------------------------------------------------------------------------


class _EventLog:
    """Flat append-only arrays of events, FIFO-compactable at the head."""

    def __init__(self, scent_dims: int):
        self.capacity = 256
        self.head = 0
        self.size = 0
        self.time = np.zeros(self.capacity, dtype=np.int64)
        self.x = np.zeros(self.capacity, dtype=np.int64)
        self.y = np.zeros(self.capacity, dtype=np.int64)
        self.sign = np.zeros(self.capacity, dtype=np.float64)
        self.scent = np.zeros((self.capacity, scent_dims), dtype=np.float64)

    def append(self, time: int, x: int, y: int, sign: int,
               scent: Sequence[float]) -> None:
        if self.size == self.capacity:
            self._grow()
        k = self.size
        self.time[k] = time
        self.x[k] = x
        self.y[k] = y
        self.sign[k] = sign
        self.scent[k] = scent
        self.size += 1

    def _grow(self) -> None:
        live = self.size - self.head
        new_cap = max(256, 2 * live if live > self.capacity // 2
                      else self.capacity)
        def enlarge(a):
            out = np.zeros((new_cap,) + a.shape[1:], dtype=a.dtype)
            out[:live] = a[self.head:self.size]
            return out
        self.time = enlarge(self.time)
        self.x = enlarge(self.x)
        self.y = enlarge(self.y)
        self.sign = enlarge(self.sign)
        self.scent = enlarge(self.scent)
        self.size = live
        self.head = 0
        self.capacity = new_cap


class ScentField:
    """Event-sourced scent field with steady-state compaction.

    Sources older than tau_max + COMPACTION_SLACK are folded into per-cell
    steady aggregates (their kernel value no longer depends on elapsed time),
    keeping both query cost and memory proportional to recent activity plus
    touched area.
    """

    def __init__(self, kernel: DiffusionKernel, scent_dims: int):
        self.kernel = kernel
        self.scent_dims = scent_dims
        self.log = _EventLog(scent_dims)
        # steady aggregates, grouped in 64x64 blocks: block coord -> dict of
        # cell -> scent vector; flattened lazily for the compiled query
        self._steady_cells: dict[tuple[int, int],
                                 dict[tuple[int, int], np.ndarray]] = {}
        self._steady_flat: dict[tuple[int, int], tuple] = {}

    def add_event(self, time: int, position: tuple[int, int], sign: int,
                  scent: Sequence[float]) -> None:
        self.log.append(time, position[0], position[1], sign, scent)

    def record(self, event: ScentEvent) -> None:
        self.add_event(event.time, event.position, event.sign, event.scent)

    def compact(self, now: int) -> int:
        """Fold events older than tau_max + slack into steady aggregates.

        Returns the number of events folded.  Queries for any time within
        COMPACTION_SLACK of `now` are unaffected: a folded event's kernel
        value at such times is the steady state either way.
        """
        horizon = now - self.kernel.tau_max - COMPACTION_SLACK
        log = self.log
        folded = 0
        while log.head < log.size and log.time[log.head] < horizon:
            k = log.head
            pos = (int(log.x[k]), int(log.y[k]))
            block = (pos[0] >> 6, pos[1] >> 6)
            cells = self._steady_cells.setdefault(block, {})
            vec = cells.get(pos)
            if vec is None:
                vec = np.zeros(self.scent_dims)
                cells[pos] = vec
            vec += log.sign[k] * log.scent[k]
            self._steady_flat.pop(block, None)
            log.head += 1
            folded += 1
        return folded

    def _flat_block(self, block: tuple[int, int]):
        flat = self._steady_flat.get(block)
        if flat is None:
            cells = self._steady_cells[block]
            n = len(cells)
            sx = np.zeros(n, dtype=np.int64)
            sy = np.zeros(n, dtype=np.int64)
            vecs = np.zeros((n, self.scent_dims))
            for i, (pos, vec) in enumerate(sorted(cells.items())):
                sx[i], sy[i] = pos
                vecs[i] = vec
            flat = (sx, sy, vecs)
            self._steady_flat[block] = flat
        return flat

    def query(self, position: tuple[int, int], time: int) -> np.ndarray:
        out = np.zeros(self.scent_dims)
        k = self.kernel
        log = self.log
        _kernels.scent_events_at(
            out, position[0], position[1], time,
            log.time[log.head:log.size], log.x[log.head:log.size],
            log.y[log.head:log.size], log.sign[log.head:log.size],
            log.scent[log.head:log.size], log.size - log.head,
            k.table, k.steady, k.cutoff, k.tau_max)
        if self._steady_cells:
            c = k.cutoff
            for bx in range((position[0] - c) >> 6,
                            ((position[0] + c) >> 6) + 1):
                for by in range((position[1] - c) >> 6,
                                ((position[1] + c) >> 6) + 1):
                    if (bx, by) not in self._steady_cells:
                        continue
                    sx, sy, vecs = self._flat_block((bx, by))
                    _kernels.scent_steady_at(out, position[0], position[1],
                                             sx, sy, vecs, sx.shape[0],
                                             k.steady, k.cutoff)
        return out

    def live_event_count(self) -> int:
        return self.log.size - self.log.head

    def steady_cell_count(self) -> int:
        return sum(len(c) for c in self._steady_cells.values())

    def events(self) -> list[ScentEvent]:
        """Live (uncompacted) events in log order, for persistence."""
        log = self.log
        return [ScentEvent((int(log.x[k]), int(log.y[k])),
                           tuple(log.scent[k]), int(log.sign[k]),
                           int(log.time[k]))
                for k in range(log.head, log.size)]

    def steady_entries(self) -> list[tuple[tuple[int, int], tuple]]:
        """Steady aggregate cells, canonically sorted, for persistence."""
        out = []
        for block in sorted(self._steady_cells):
            for pos in sorted(self._steady_cells[block]):
                out.append((pos, tuple(self._steady_cells[block][pos])))
        return out

    def restore_steady(self, entries) -> None:
        for pos, vec in entries:
            block = (pos[0] >> 6, pos[1] >> 6)
            cells = self._steady_cells.setdefault(block, {})
            cells[pos] = np.asarray(vec, dtype=np.float64).copy()
            self._steady_flat.pop(block, None)
