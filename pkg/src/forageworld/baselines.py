"""Reference agents: a greedy vision-chasing policy and a uniform-random one.

The greedy agent scans its visual field for cells colored like a known
reward item, plans the shortest action sequence to one of them, and
replans whenever a strictly shorter path shows up.  With no plan it
walks forward, turning at obstacles and spontaneously about once every
twenty steps.  Planning trusts the rendered colors, so a wall whose
cells are fully occluded looks traversable; a stale plan then drains
into repeated blocked MoveForward attempts against it.  That trap is a
documented property of the policy and must not be "fixed".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .config import WorldConfig
from .rewards import CollectReward, CombinedReward, RewardExpr
from .rng import Pcg32
from .simulation import (Action, COLLECT, MOVE_FORWARD, NO_OP, TURN_LEFT,
                         TURN_RIGHT)

# Color-ray matching: a cell counts as an instance of target color c when
# its color is gamma * c with gamma > GAMMA_FLOOR and relative residual
# below RAY_TOLERANCE.  Scaled matches are what make partially occluded
# items still register.
RAY_TOLERANCE = 1e-6
GAMMA_FLOOR = 1e-6

_ACTION_FOR_CODE = (MOVE_FORWARD, TURN_LEFT, TURN_RIGHT)


def ray_match(colors: np.ndarray, target) -> np.ndarray:
    """Boolean grid of cells whose color is a positive multiple of target.

    `target` is one color, or a stack of colors (2-D) matched any-of;
    None matches nothing.
    """
    colors = np.asarray(colors, dtype=np.float64)
    if target is None:
        return np.zeros(colors.shape[:-1], dtype=bool)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 2:
        out = np.zeros(colors.shape[:-1], dtype=bool)
        for row in target:
            out |= ray_match(colors, row)
        return out
    norm_sq = float(target @ target)
    if norm_sq == 0.0:
        return np.zeros(colors.shape[:-1], dtype=bool)
    gamma = colors @ target / norm_sq
    residual = colors - gamma[..., None] * target
    res_norm = np.linalg.norm(residual, axis=-1)
    cell_norm = np.linalg.norm(colors, axis=-1)
    return (gamma > GAMMA_FLOOR) & (res_norm <= RAY_TOLERANCE * cell_norm)


def shortest_path(vision: np.ndarray, c_r, c_w, c_o=None,
                  visible: Optional[np.ndarray] = None
                  ) -> Optional[list[Action]]:
    """Fewest-action route from the center cell to any c_r-colored cell.

    Plans over (cell, heading) vertices of the egocentric grid; forward
    steps into c_w- or c_o-colored cells, invisible cells, or out of the
    grid are forbidden.  A cell matching both the obstacle and the goal
    ray counts as an obstacle.  `visible`, when given, is the boolean
    field-of-view mask (see vision.visible_mask); by default every cell
    is in view.  Returns None when no goal cell is reachable.
    """
    if vision.ndim != 3 or vision.shape[0] != vision.shape[1] \
            or vision.shape[0] % 2 != 1:
        raise ValueError("vision must be an odd square color grid")
    h = vision.shape[0]
    r = h // 2
    wall = ray_match(vision, c_w) | ray_match(vision, c_o)
    goal = ray_match(vision, c_r) & ~wall
    goal[r, r] = False  # the agent's own cell is never a target
    if not goal.any():
        return None
    if visible is None:
        visible = np.ones((h, h), dtype=np.uint8)
    prev_vertex = np.empty(h * h * 4, dtype=np.int32)
    prev_action = np.empty(h * h * 4, dtype=np.int8)
    found = _kernels.grid_search(
        np.ascontiguousarray(goal, dtype=np.uint8),
        np.ascontiguousarray(wall, dtype=np.uint8),
        np.ascontiguousarray(visible, dtype=np.uint8),
        prev_vertex, prev_action)
    if found < 0:
        return None
    codes = []
    v = int(found)
    while prev_vertex[v] != -1:
        codes.append(prev_action[v])
        v = prev_vertex[v]
    codes.reverse()
    return [_ACTION_FOR_CODE[c] for c in codes]


@dataclass(eq=False)
class GreedyState:
    """Target colors plus the not-yet-executed remainder of the last plan.

    c_w may be one color or a stack of colors (one per blocking type).
    """

    c_r: Sequence[float]
    c_w: Optional[Sequence] = None
    c_o: Optional[Sequence[float]] = None
    visible: Optional[np.ndarray] = None
    best_path: Optional[tuple[Action, ...]] = None


def greedy_policy(state: GreedyState, vision: np.ndarray,
                  rng: Pcg32) -> tuple[GreedyState, Action]:
    """One decision of the greedy agent; returns the successor state too.

    Replans every call and adopts the fresh path when there is no current
    plan or the fresh one is strictly shorter (in actions).  Without a
    plan the agent walks: obstacle-colored cell dead ahead means turn
    left or right with equal probability, open cell ahead means move
    forward, except that 1 step in 20 it turns anyway (one rng draw per
    decision either way).  Straight runs sweep fresh terrain into view;
    the spontaneous turns are load-bearing, because a walker that only
    turns when blocked can never face the side opening of a pocket it
    wandered into and stays confined there forever.
    """
    path = shortest_path(vision, state.c_r, state.c_w, state.c_o,
                         state.visible)
    best = state.best_path
    if best is None or (path is not None and len(path) < len(best)):
        best = tuple(path) if path is not None else None
    if best is None:
        h = vision.shape[0]
        r = h // 2
        ahead_is_wall = h >= 3 and bool(
            ray_match(vision[r - 1, r][None, :], state.c_w)[0])
        if ahead_is_wall:
            action = TURN_LEFT if rng.next_below(2) == 0 else TURN_RIGHT
        else:
            k = rng.next_below(40)
            action = (TURN_LEFT if k == 0
                      else TURN_RIGHT if k == 1 else MOVE_FORWARD)
        next_state = GreedyState(state.c_r, state.c_w, state.c_o,
                                 state.visible, None)
        return next_state, action
    action = best[0]
    rest = best[1:] if len(best) > 1 else None
    next_state = GreedyState(state.c_r, state.c_w, state.c_o,
                             state.visible, rest)
    return next_state, action


class GreedyAgent:
    """Stateful wrapper around greedy_policy for step loops."""

    def __init__(self, c_r, c_w=None, c_o=None,
                 rng: Optional[Pcg32] = None,
                 visible: Optional[np.ndarray] = None):
        self.state = GreedyState(c_r, c_w, c_o, visible)
        self.rng = rng if rng is not None else Pcg32(0)

    def act(self, vision: np.ndarray) -> Action:
        self.state, action = greedy_policy(self.state, vision, self.rng)
        return action


def greedy_targets(config: WorldConfig, expr: RewardExpr):
    """Derive (c_r, c_w, c_o) for a greedy agent from a reward expression.

    c_r is the color of the item type with the largest positive net
    collect value (lowest type id on ties), c_o the color of the most
    negatively valued type if any, and c_w the stack of colors of every
    item type that blocks movement (None when nothing blocks).  Raises
    ValueError when nothing in the expression rewards collecting.
    """
    net: dict[int, float] = {}

    def walk(e):
        if isinstance(e, CombinedReward):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, CollectReward):
            net[e.type_id] = net.get(e.type_id, 0.0) + e.value

    walk(expr)
    rewarded = [t for t, v in net.items() if v > 0]
    if not rewarded:
        raise ValueError("reward expression never pays for collecting; "
                         "the greedy agent has no target color")
    target = max(rewarded, key=lambda t: (net[t], -t))
    avoided = [t for t, v in net.items() if v < 0]
    c_o = None
    if avoided:
        c_o = config.item_types[min(avoided, key=lambda t: (net[t], t))].color
    blockers = tuple(it.color for it in config.item_types
                     if it.blocks_movement)
    c_w = blockers if blockers else None
    return config.item_types[target].color, c_w, c_o


_ACTION_BY_KIND = {
    "MoveForward": MOVE_FORWARD,
    "TurnLeft": TURN_LEFT,
    "TurnRight": TURN_RIGHT,
    "Collect": COLLECT,
    "NoOp": NO_OP,
}


def random_policy(action_space: Sequence[Union[str, Action]],
                  rng: Pcg32) -> Action:
    """Uniform draw from the action space (one rng draw per call).

    Entries may be Action instances or kind names; "Drop" must be given
    as an Action because it needs an item type.
    """
    if not action_space:
        raise ValueError("action space is empty")
    choice = action_space[rng.next_below(len(action_space))]
    if isinstance(choice, Action):
        return choice
    action = _ACTION_BY_KIND.get(choice)
    if action is None:
        raise ValueError(f"cannot build an action from {choice!r}; "
                         "pass an Action instance")
    return action
