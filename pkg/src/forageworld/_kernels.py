"""Compiled numeric kernels.

Hot loops (item sampling, scent queries, vision rendering, path search) are
compiled with numba.  Every kernel mirrors a pure-Python definition elsewhere
in the package and the test suite checks the two routes produce identical
results; the pure versions are the readable reference, these are the fast
path.

Function specs are passed to kernels as (code, params) pairs:

  intensity codes:    0 Zero, 1 Constant, 2 RadialHash
  interaction codes:  0 Zero, 1 PiecewiseBox, 2 Cross, 3 CrossHash

Parameter layouts follow the dataclass field order in
:mod:`forageworld.functions`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

INTENSITY_ZERO = 0
INTENSITY_CONSTANT = 1
INTENSITY_RADIAL_HASH = 2

INTERACTION_ZERO = 0
INTERACTION_PIECEWISE_BOX = 1
INTERACTION_CROSS = 2
INTERACTION_CROSS_HASH = 3

_U64_MULT = np.uint64(6364136223846793005)
_INV_MAX32 = 1.0 / 4294967295.0


# ---------------------------------------------------------------------------
# PCG-XSH-RR 64/32 on an explicit uint64[2] = (state, increment) array.


@njit(cache=True, inline="always")
def pcg_next(rng):
    old = rng[0]
    rng[0] = old * _U64_MULT + rng[1]
    xorshifted = np.uint32(((old >> np.uint64(18)) ^ old) >> np.uint64(27))
    rot = np.uint32(old >> np.uint64(59))
    return np.uint32((xorshifted >> rot)
                     | (xorshifted << (np.uint32(32) - rot & np.uint32(31))))


@njit(cache=True, inline="always")
def pcg_below(rng, bound):
    b = np.uint32(bound)
    threshold = (np.uint32(0) - b) % b
    while True:
        r = pcg_next(rng)
        if r >= threshold:
            return np.int64(r % b)


@njit(cache=True, inline="always")
def pcg_real(rng):
    return np.float64(pcg_next(rng)) / 4294967296.0


# ---------------------------------------------------------------------------
# Hash noise.


@njit(cache=True, inline="always")
def fmix32(h):
    # Scalar integer ops promote to 64 bits under numba, so mask explicitly.
    m = np.uint64(0xFFFFFFFF)
    h = np.uint64(h) & m
    h ^= h >> np.uint64(16)
    h = (h * np.uint64(0x85EBCA6B)) & m
    h ^= h >> np.uint64(13)
    h = (h * np.uint64(0xC2B2AE35)) & m
    h ^= h >> np.uint64(16)
    return h


@njit(cache=True, inline="always")
def hash_interp(t):
    i = np.int64(math.floor(t))
    frac = t - math.floor(t)
    lo = np.float64(fmix32(np.uint32(i))) * _INV_MAX32
    if frac == 0.0:
        return lo
    hi = np.float64(fmix32(np.uint32(i + 1))) * _INV_MAX32
    return lo * (1.0 - frac) + hi * frac


# ---------------------------------------------------------------------------
# Function evaluation.


@njit(cache=True, inline="always")
def eval_intensity(code, params, x, y):
    if code == INTENSITY_CONSTANT:
        return params[0]
    if code == INTENSITY_RADIAL_HASH:
        r = math.sqrt(float(x) * float(x) + float(y) * float(y))
        return params[2] - params[3] * hash_interp(r / params[1] + params[0])
    return 0.0


@njit(cache=True, inline="always")
def _cross_cases(dx, dy, near, far, an, af, mn, mf):
    d = min(dx, dy)
    big = max(dx, dy)
    if big <= near:
        return an if d == 0 else mn
    if near < big <= far:
        return af if d == 0 else mf
    return 0.0


@njit(cache=True, inline="always")
def eval_interaction(code, params, x1, y1, x2, y2):
    if code == INTERACTION_ZERO:
        return 0.0
    dx = abs(x1 - x2)
    dy = abs(y1 - y2)
    if code == INTERACTION_PIECEWISE_BOX:
        d = float(dx * dx + dy * dy)
        if d < params[0]:
            return params[2]
        if d < params[1]:
            return params[3]
        return 0.0
    fdx = float(dx)
    fdy = float(dy)
    if code == INTERACTION_CROSS:
        return _cross_cases(fdx, fdy, params[0], params[1],
                            params[2], params[3], params[4], params[5])
    near = params[1] + params[2] * hash_interp(float(x1) / params[0])
    far = near + params[3]
    return _cross_cases(fdx, fdy, near, far,
                        params[4], params[5], params[6], params[7])


# ---------------------------------------------------------------------------
# Metropolis-Hastings item sampling.
#
# Proposal: with probability 1/2 add an item uniform over position and type,
# else remove a uniformly chosen existing item.  Adds onto occupied cells are
# rejected outright.  The Hastings ratio uses q_add = 1/(2 P^2 T) and
# q_remove = 1/(2 m).  The log-density difference counts ordered pairs within
# the patch in both directions and patch-to-context pairs in one direction,
# skipping pairs beyond the per-type-pair Chebyshev bound.


@njit(cache=True)
def _delta_item(x, y, t, xs, ys, types, n, skip,
                ctx_xs, ctx_ys, ctx_types, ctx_off,
                int_codes, int_params, g_codes, g_params, g_bound):
    delta = eval_intensity(int_codes[t], int_params[t], x, y)
    for k in range(n):
        if k == skip:
            continue
        dx = abs(x - xs[k])
        dy = abs(y - ys[k])
        c = max(dx, dy)
        tk = types[k]
        if c <= g_bound[t, tk]:
            delta += eval_interaction(g_codes[t, tk], g_params[t, tk],
                                      x, y, xs[k], ys[k])
        if c <= g_bound[tk, t]:
            delta += eval_interaction(g_codes[tk, t], g_params[tk, t],
                                      xs[k], ys[k], x, y)
    # Context entries are grouped per candidate type (the caller filters
    # out items certainly beyond reach of any position in the patch).
    for k in range(ctx_off[t], ctx_off[t + 1]):
        dx = abs(x - ctx_xs[k])
        dy = abs(y - ctx_ys[k])
        c = max(dx, dy)
        tk = ctx_types[k]
        if c <= g_bound[t, tk]:
            delta += eval_interaction(g_codes[t, tk], g_params[t, tk],
                                      x, y, ctx_xs[k], ctx_ys[k])
    return delta


@njit(cache=True)
def mh_run(xs, ys, types, n_items, occupied,
           ctx_xs, ctx_ys, ctx_types, ctx_off,
           x0, y0, patch_size, n_types, n_iter,
           int_codes, int_params, g_codes, g_params, g_bound,
           rng):
    """Run `n_iter` MH transitions in place; returns the new item count.

    xs/ys/types have capacity patch_size**2; the first n_items entries are
    the current items.  `occupied` is a patch_size*patch_size uint8 grid in
    row-major (dy, dx) order.  `rng` is the uint64[2] generator state,
    advanced in place.
    """
    n = n_items
    p2t = float(patch_size * patch_size * n_types)
    for _ in range(n_iter):
        if pcg_real(rng) < 0.5:
            cell = pcg_below(rng, patch_size * patch_size)
            t = np.int16(pcg_below(rng, n_types))
            if occupied[cell]:
                continue
            x = x0 + np.int64(cell % patch_size)
            y = y0 + np.int64(cell // patch_size)
            delta = _delta_item(x, y, t, xs, ys, types, n, -1,
                                ctx_xs, ctx_ys, ctx_types, ctx_off,
                                int_codes, int_params,
                                g_codes, g_params, g_bound)
            ratio = math.exp(delta) * p2t / (n + 1.0)
            if pcg_real(rng) < ratio:
                xs[n] = x
                ys[n] = y
                types[n] = t
                occupied[cell] = 1
                n += 1
        else:
            if n == 0:
                continue
            idx = pcg_below(rng, n)
            delta = -_delta_item(xs[idx], ys[idx], types[idx],
                                 xs, ys, types, n, idx,
                                 ctx_xs, ctx_ys, ctx_types, ctx_off,
                                 int_codes, int_params,
                                 g_codes, g_params, g_bound)
            ratio = math.exp(delta) * n / p2t
            if pcg_real(rng) < ratio:
                cell = ((ys[idx] - y0) * patch_size + (xs[idx] - x0))
                occupied[cell] = 0
                for k in range(idx, n - 1):
                    xs[k] = xs[k + 1]
                    ys[k] = ys[k + 1]
                    types[k] = types[k + 1]
                n -= 1
    return n


# ---------------------------------------------------------------------------
# Scent field accumulation.


@njit(cache=True)
def scent_events_at(out, qx, qy, t,
                    ev_time, ev_x, ev_y, ev_sign, ev_scent, n_events,
                    table, steady, cutoff, tau_max):
    """Add the contribution of logged source events to `out` (length S)."""
    for k in range(n_events):
        dx = abs(qx - ev_x[k])
        if dx > cutoff:
            continue
        dy = abs(qy - ev_y[k])
        if dy > cutoff:
            continue
        tau = t - ev_time[k]
        if tau < 0:
            continue
        if tau > tau_max:
            kap = steady[dx, dy]
        else:
            kap = table[tau, dx, dy]
        if kap == 0.0:
            continue
        s = ev_sign[k] * kap
        for c in range(out.shape[0]):
            out[c] += s * ev_scent[k, c]


@njit(cache=True)
def scent_steady_at(out, qx, qy, sx, sy, s_scent, n_sources, steady, cutoff):
    """Add steady-state contributions of long-lived sources to `out`."""
    for k in range(n_sources):
        dx = abs(qx - sx[k])
        if dx > cutoff:
            continue
        dy = abs(qy - sy[k])
        if dy > cutoff:
            continue
        kap = steady[dx, dy]
        if kap == 0.0:
            continue
        for c in range(out.shape[0]):
            out[c] += kap * s_scent[k, c]


# ---------------------------------------------------------------------------
# Vision rendering.
#
# Cells and occluding items project onto the unit circle around the observer
# as arcs of half-angle asin(min(1, 0.5/distance)) at their bearing.  A cell's
# color is scaled by the fraction of its arc inside the field-of-view arc and
# attenuated by occluding items strictly closer than the cell.  The output
# tensor is egocentric: forward is up (row 0 is farthest ahead), right is
# increasing column.

@njit(cache=True, inline="always")
def _arc_intersection(c1, w1, c2, w2):
    d = (c1 - c2) % (2.0 * math.pi)
    if d > math.pi:
        d = 2.0 * math.pi - d
    inner = max(0.0, w1 + w2 - d) + max(0.0, w1 + w2 - (2.0 * math.pi - d))
    return min(inner, 2.0 * min(w1, w2))


@njit(cache=True)
def render_vision(out, dir_code, radius, fov,
                  it_dx, it_dy, it_type, n_items,
                  ag_dx, ag_dy, ag_colors, n_agents,
                  type_colors, type_occlusion):
    """Render the egocentric vision tensor into `out` (zeroed by caller).

    Item and agent offsets are world-frame deltas from the observer, already
    filtered to the Chebyshev box of `radius`.  `ag_colors` includes the
    observer itself.
    """
    w = 2 * radius + 1
    n_ch = out.shape[2]
    base = np.zeros((w, w, n_ch))
    for k in range(n_items):
        t = it_type[k]
        for c in range(n_ch):
            base[it_dx[k] + radius, it_dy[k] + radius, c] += type_colors[t, c]
    for k in range(n_agents):
        for c in range(n_ch):
            base[ag_dx[k] + radius, ag_dy[k] + radius, c] += ag_colors[k, c]

    # Occluding items: precompute distance, bearing, arc half-width.
    n_occ = 0
    for k in range(n_items):
        if type_occlusion[it_type[k]] > 0.0 and (it_dx[k] != 0 or it_dy[k] != 0):
            n_occ += 1
    occ_dist = np.empty(n_occ)
    occ_bear = np.empty(n_occ)
    occ_half = np.empty(n_occ)
    occ_frac = np.empty(n_occ)
    j = 0
    for k in range(n_items):
        o = type_occlusion[it_type[k]]
        if o <= 0.0 or (it_dx[k] == 0 and it_dy[k] == 0):
            continue
        d = math.sqrt(float(it_dx[k]) ** 2 + float(it_dy[k]) ** 2)
        occ_dist[j] = d
        occ_bear[j] = math.atan2(float(it_dy[k]), float(it_dx[k]))
        occ_half[j] = math.asin(min(1.0, 0.5 / d))
        occ_frac[j] = o
        j += 1

    if dir_code == 0:
        dir_angle = math.pi / 2.0
    elif dir_code == 1:
        dir_angle = 0.0
    elif dir_code == 2:
        dir_angle = -math.pi / 2.0
    else:
        dir_angle = math.pi
    w_fov = fov / 2.0

    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            dist = math.sqrt(float(dx) * float(dx) + float(dy) * float(dy))
            if dist == 0.0:
                factor = 1.0
            else:
                bear = math.atan2(float(dy), float(dx))
                half = math.asin(min(1.0, 0.5 / dist))
                arc = 2.0 * half
                if w_fov >= math.pi:
                    fov_f = 1.0  # full circle: nothing to clip
                else:
                    fov_f = _arc_intersection(dir_angle, w_fov, bear, half) / arc
                cover = 0.0
                for k in range(n_occ):
                    if occ_dist[k] < dist:
                        cover += occ_frac[k] * _arc_intersection(
                            occ_bear[k], occ_half[k], bear, half) / arc
                occ_f = max(1.0 - cover, 0.0)
                factor = fov_f * occ_f
            if dir_code == 0:
                fwd, right = dy, dx
            elif dir_code == 1:
                fwd, right = dx, -dy
            elif dir_code == 2:
                fwd, right = -dy, -dx
            else:
                fwd, right = -dx, dy
            for c in range(n_ch):
                out[radius - fwd, radius + right, c] = \
                    base[dx + radius, dy + radius, c] * factor


@njit(cache=True)
def fov_mask(out, radius, fov):
    """Mark egocentric cells with a nonzero field-of-view factor (forward = up)."""
    w_fov = fov / 2.0
    dir_angle = math.pi / 2.0  # egocentric frame: facing +y before rotation
    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            dist = math.sqrt(float(dx) * float(dx) + float(dy) * float(dy))
            if dist == 0.0 or w_fov >= math.pi:
                visible = True
            else:
                bear = math.atan2(float(dy), float(dx))
                half = math.asin(min(1.0, 0.5 / dist))
                visible = _arc_intersection(dir_angle, w_fov, bear, half) > 0.0
            # egocentric for a north-facing observer: fwd=dy, right=dx
            out[radius - dy, radius + dx] = 1 if visible else 0


# ---------------------------------------------------------------------------
# Shortest path over the egocentric grid.
#
# Vertices are (row, col, facing) with facing 0=up, 1=right, 2=down, 3=left.
# Edges are MoveForward (0), TurnLeft (1), TurnRight (2), all unit cost, so
# uniform-cost search reduces to breadth-first order.  Neighbors expand in
# action order, which fixes the tie-break among equal-length paths.

_ROW_STEP = (-1, 0, 1, 0)
_COL_STEP = (0, 1, 0, -1)


@njit(cache=True)
def grid_search(traversable, goal, start_row, start_col):
    """Shortest action sequence from the center to any goal cell.

    Returns an int8 array of actions, or a length-1 array holding -1 when no
    goal is reachable.  `traversable` and `goal` are uint8 grids in
    egocentric orientation; the start faces up.
    """
    w = traversable.shape[0]
    n_states = w * w * 4
    parent = np.full(n_states, -1, dtype=np.int32)
    via = np.zeros(n_states, dtype=np.int8)
    queue = np.empty(n_states, dtype=np.int32)
    start = (start_row * w + start_col) * 4 + 0
    parent[start] = start
    queue[0] = start
    head = 0
    tail = 1
    found = -1
    while head < tail:
        s = queue[head]
        head += 1
        row = s // (4 * w)
        col = (s // 4) % w
        facing = s % 4
        if goal[row, col] and (row != start_row or col != start_col):
            found = s
            break
        for action in range(3):
            if action == 0:
                nr = row + _ROW_STEP[facing]
                nc = col + _COL_STEP[facing]
                nf = facing
                if nr < 0 or nr >= w or nc < 0 or nc >= w:
                    continue
                if not traversable[nr, nc]:
                    continue
            elif action == 1:
                nr, nc, nf = row, col, (facing + 3) % 4
            else:
                nr, nc, nf = row, col, (facing + 1) % 4
            ns = (nr * w + nc) * 4 + nf
            if parent[ns] >= 0:
                continue
            parent[ns] = s
            via[ns] = np.int8(action)
            queue[tail] = ns
            tail += 1
    if found < 0:
        return np.full(1, -1, dtype=np.int8)
    length = 0
    s = found
    while s != start:
        length += 1
        s = parent[s]
    actions = np.empty(length, dtype=np.int8)
    s = found
    for i in range(length - 1, -1, -1):
        actions[i] = via[s]
        s = parent[s]
    return actions


@njit(cache=True)
def grid_search(goal, wall, visible, prev_vertex, prev_action):
    """Breadth-first search over (cell, heading) vertices of an egocentric grid.

    Vertices are encoded as (row * h + col) * 4 + heading with headings
    0=up 1=right 2=down 3=left; the start is the center cell heading up.
    Edges cost one action each and are expanded in the fixed order
    forward, left turn, right turn, so results are reproducible.  Forward
    edges into out-of-bounds, invisible, or wall cells are dropped.
    Returns the first vertex discovered on a goal cell, or -1; paths are
    reconstructed from prev_vertex/prev_action (0=forward 1=left 2=right,
    start marked with prev_vertex -1, unvisited -2).
    """
    h = goal.shape[0]
    n = h * h * 4
    for v in range(n):
        prev_vertex[v] = -2
    queue = np.empty(n, np.int32)
    r = h // 2
    start = (r * h + r) * 4
    prev_vertex[start] = -1
    queue[0] = start
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        d = v & 3
        cell = v >> 2
        i = cell // h
        j = cell % h
        if d == 0:
            ni = i - 1
            nj = j
        elif d == 1:
            ni = i
            nj = j + 1
        elif d == 2:
            ni = i + 1
            nj = j
        else:
            ni = i
            nj = j - 1
        if 0 <= ni < h and 0 <= nj < h and visible[ni, nj] != 0 \
                and wall[ni, nj] == 0:
            w = ((ni * h + nj) << 2) | d
            if prev_vertex[w] == -2:
                prev_vertex[w] = v
                prev_action[w] = 0
                if goal[ni, nj] != 0:
                    return w
                queue[tail] = w
                tail += 1
        w = (cell << 2) | ((d + 3) & 3)
        if prev_vertex[w] == -2:
            prev_vertex[w] = v
            prev_action[w] = 1
            queue[tail] = w
            tail += 1
        w = (cell << 2) | ((d + 1) & 3)
        if prev_vertex[w] == -2:
            prev_vertex[w] = v
            prev_action[w] = 2
            queue[tail] = w
            tail += 1
    return -1
