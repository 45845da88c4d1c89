"""Vision geometry: arc projection, field of view, occlusion, rendering."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from forageworld.vision import (
    DIRECTIONS,
    LEFT_OF,
    RIGHT_OF,
    arc_intersection,
    egocentric_index,
    fov_factor,
    occlusion_factor,
    render_egocentric,
    render_reference,
    visible_mask,
)

offsets = st.tuples(st.integers(-8, 8), st.integers(-8, 8))


# --- arc intersection --------------------------------------------------------

def test_arc_intersection_disjoint():
    assert arc_intersection(0.0, 0.1, math.pi, 0.1) == 0.0


def test_arc_intersection_nested():
    assert math.isclose(arc_intersection(0.0, 1.0, 0.0, 0.2), 0.4,
                        rel_tol=0, abs_tol=1e-15)


def test_arc_intersection_partial():
    # arcs [|-0.5, 0.5|] and [0.2, 1.0]: overlap [0.2, 0.5]
    assert math.isclose(arc_intersection(0.0, 0.5, 0.6, 0.4), 0.3,
                        rel_tol=0, abs_tol=1e-12)


def test_arc_intersection_wraparound():
    # arcs touching across the -pi/pi seam
    got = arc_intersection(math.pi - 0.1, 0.3, -math.pi + 0.1, 0.3)
    assert math.isclose(got, 0.4, rel_tol=0, abs_tol=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(0.01, math.pi),
       st.floats(-math.pi, math.pi), st.floats(0.01, math.pi))
def test_arc_intersection_bounds(c1, w1, c2, w2):
    got = arc_intersection(c1, w1, c2, w2)
    assert -1e-12 <= got <= 2 * min(w1, w2) + 1e-12


# --- field of view -----------------------------------------------------------

def test_full_fov_sees_everything_exactly():
    for direction in DIRECTIONS:
        for dx in range(-8, 9):
            for dy in range(-8, 9):
                assert fov_factor(360.0, (dx, dy), direction) == 1.0


def test_own_cell_always_visible():
    assert fov_factor(60.0, (0, 0), "N") == 1.0


def test_half_fov_behind_is_zero():
    # facing north, the cell 8 behind projects entirely into the back half
    assert fov_factor(180.0, (0, -8), "N") == 0.0
    assert fov_factor(180.0, (8, 0), "W") == 0.0


def test_half_fov_side_is_half():
    # cell arcs at bearing +-90 degrees are bisected by the view boundary
    for d in (2, 5, 8):
        assert abs(fov_factor(180.0, (d, 0), "N") - 0.5) < 1e-12
        assert abs(fov_factor(180.0, (-d, 0), "N") - 0.5) < 1e-12
        assert abs(fov_factor(180.0, (0, d), "E") - 0.5) < 1e-12


def test_narrow_fov_monotone_with_angle():
    f60 = fov_factor(60.0, (0, 5), "N")
    f120 = fov_factor(120.0, (0, 5), "N")
    f360 = fov_factor(360.0, (0, 5), "N")
    assert f60 <= f120 <= f360 == 1.0
    assert f60 == 1.0  # dead ahead, small arc inside a 60 degree cone


@given(offsets, st.sampled_from(DIRECTIONS),
       st.floats(min_value=1.0, max_value=360.0))
def test_fov_factor_in_unit_interval(offset, direction, fov):
    assert 0.0 <= fov_factor(fov, offset, direction) <= 1.0


@given(offsets, st.sampled_from(DIRECTIONS),
       st.floats(min_value=1.0, max_value=360.0))
def test_fov_rotation_invariance(offset, direction, fov):
    """Rotating direction and offset together by 90 degrees is a no-op."""
    rotated_dir = RIGHT_OF[direction]
    rotated_offset = (offset[1], -offset[0])  # quarter turn clockwise
    assert math.isclose(fov_factor(fov, offset, direction),
                        fov_factor(fov, rotated_offset, rotated_dir),
                        rel_tol=0, abs_tol=1e-12)


# --- occlusion ---------------------------------------------------------------

def test_no_occluders():
    assert occlusion_factor((4, 0), []) == 1.0


def test_collinear_full_occluder_blocks_exactly():
    # occluder at (2,0) has a wider arc at the same bearing as (4,0)
    assert occlusion_factor((4, 0), [((2, 0), 1.0)]) == 0.0


def test_partial_occluder():
    f = occlusion_factor((4, 0), [((2, 0), 0.3)])
    assert math.isclose(f, 0.7, rel_tol=0, abs_tol=1e-12)


def test_occlusion_clamps_at_zero():
    occluders = [((2, 0), 0.6), ((2, 1), 0.6), ((3, 0), 0.6)]
    assert occlusion_factor((4, 0), occluders) == 0.0


def test_off_axis_occluder_no_overlap():
    # perpendicular bearing: arcs cannot intersect
    assert occlusion_factor((4, 0), [((0, 2), 1.0)]) == 1.0


# --- egocentric frame --------------------------------------------------------

def test_egocentric_forward_is_up():
    r = 8
    assert egocentric_index("N", (0, 3), r) == (r - 3, r)
    assert egocentric_index("E", (3, 0), r) == (r - 3, r)
    assert egocentric_index("S", (0, -3), r) == (r - 3, r)
    assert egocentric_index("W", (-3, 0), r) == (r - 3, r)


def test_egocentric_right_is_right():
    r = 8
    assert egocentric_index("N", (2, 0), r) == (r, r + 2)
    assert egocentric_index("E", (0, -2), r) == (r, r + 2)
    assert egocentric_index("S", (-2, 0), r) == (r, r + 2)
    assert egocentric_index("W", (0, 2), r) == (r, r + 2)


def test_turn_tables_are_inverse():
    for d in DIRECTIONS:
        assert RIGHT_OF[LEFT_OF[d]] == d
        assert LEFT_OF[RIGHT_OF[d]] == d


# --- rendering ---------------------------------------------------------------

def colors_for(n):
    table = np.zeros((n, 3))
    for i in range(n):
        table[i, i % 3] = 1.0
    return table


def test_render_empty_world_shows_observer():
    colors = colors_for(1)
    occl = np.zeros(1)
    out = render_egocentric([], [(0, 0, (0.5, 0.5, 0.5))], "N", 8, 360.0,
                            colors, occl)
    assert out.shape == (17, 17, 3)
    assert (out[8, 8] == [0.5, 0.5, 0.5]).all()
    out[8, 8] = 0
    assert (out == 0).all()


def test_render_item_ahead():
    colors = np.array([[0.82, 0.27, 0.20]])
    occl = np.zeros(1)
    out = render_egocentric([(0, 3, 0)], [(0, 0, (0, 0, 0))], "N", 8, 360.0,
                            colors, occl)
    assert np.allclose(out[8 - 3, 8], [0.82, 0.27, 0.20], atol=0)


def test_render_full_occluder_hides_cell_behind():
    # item type 1 occludes fully; type 0 sits behind it on the same ray
    colors = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    occl = np.array([0.0, 1.0])
    out = render_egocentric([(0, 4, 0), (0, 2, 1)], [(0, 0, (0, 0, 0))],
                            "N", 8, 360.0, colors, occl)
    assert (out[8 - 4, 8] == 0.0).all()        # hidden
    assert out[8 - 2, 8, 2] == 1.0             # the occluder itself renders


def test_render_identity_composition():
    """fov 360 and zero occlusion: output is the raw color sum, re-oriented."""
    rng = np.random.default_rng(5)
    colors = colors_for(3)
    occl = np.zeros(3)
    items = [(int(dx), int(dy), int(t))
             for dx, dy, t in zip(rng.integers(-8, 9, 30),
                                  rng.integers(-8, 9, 30),
                                  rng.integers(0, 3, 30))]
    # drop duplicate cells: one item per cell in real maps
    seen, unique = {(0, 0)}, []  # keep the observer cell clear
    for it in items:
        if it[:2] not in seen:
            seen.add(it[:2])
            unique.append(it)
    out = render_egocentric(unique, [(0, 0, (1, 1, 1))], "N", 8, 360.0,
                            colors, occl)
    for dx, dy, t in unique:
        if (dx, dy) != (0, 0):
            assert (out[8 - dy, 8 + dx] == colors[t]).all()
    assert (out[8, 8] == [1, 1, 1]).all()


def test_render_fov_zeroes_out_of_view():
    colors = colors_for(1)
    occl = np.zeros(1)
    out = render_egocentric([(0, -5, 0)], [(0, 0, (0, 0, 0))], "N", 8,
                            180.0, colors, occl)
    # cell 5 behind a north-facing observer: rendered at row 8+5
    assert (out[8 + 5, 8] == 0.0).all()


def test_render_matches_reference():
    rng = np.random.default_rng(6)
    colors = np.array([[1.0, 0, 0], [0, 1.0, 0], [0.3, 0.3, 0.3]])
    occl = np.array([0.0, 0.35, 1.0])
    for direction in DIRECTIONS:
        for fov in (60.0, 180.0, 345.0, 360.0):
            cells = rng.choice(17 * 17, size=40, replace=False)
            items = [(int(c % 17) - 8, int(c // 17) - 8,
                      int(rng.integers(0, 3))) for c in cells]
            agents = [(0, 0, (1, 1, 1)), (2, -3, (0.5, 0, 0.5))]
            got = render_egocentric(items, agents, direction, 8, fov,
                                    colors, occl)
            want = render_reference(items, agents, direction, 8, fov,
                                    colors, occl)
            assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_render_rotation_covariance():
    """Rotating the world and the observer together leaves the egocentric
    view unchanged."""
    colors = np.array([[0.2, 0.4, 0.6]])
    occl = np.array([0.8])
    items = [(2, 3, 0), (-1, 4, 0), (0, -2, 0)]

    def rotate(offset):  # quarter turn clockwise: N-frame -> E-frame
        return (offset[1], -offset[0])

    base = render_egocentric(items, [(0, 0, (1, 0, 0))], "N", 8, 120.0,
                             colors, occl)
    rotated_items = [(*rotate((dx, dy)), t) for dx, dy, t in items]
    turned = render_egocentric(rotated_items, [(0, 0, (1, 0, 0))], "E", 8,
                               120.0, colors, occl)
    assert np.allclose(base, turned, rtol=0, atol=1e-12)


def test_visible_mask_shapes():
    full = visible_mask(5, 360.0)
    assert full.all()
    half = visible_mask(5, 180.0)
    assert half[5, 5] == 1          # own cell
    assert half[0, 5] == 1          # dead ahead
    assert half[10, 5] == 0         # straight behind
    narrow = visible_mask(5, 20.0)
    assert narrow.sum() < half.sum() < full.sum()
