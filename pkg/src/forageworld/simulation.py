"""Turn-based simulator: agents, actions, constraints, and stepping.

The simulator owns a procedurally generated map, an event-sourced scent
field, and a registry of agents.  Each turn, every agent submits exactly
one action; when the last action arrives the step executes and time
advances by one.  A step resolves in fixed phases:

1. turns (direction changes),
2. moves, applied sequentially in action-arrival order (or in a random
   order under the random-winner policy), so cell conflicts resolve
   first-come-first-serve and swaps are impossible,
3. explicit Collect actions,
4. automatic collection for agents whose action space lacks Collect and
   that entered a new cell this step,
5. Drop actions (collections see the pre-drop map),
6. map expansion around every agent, scent bookkeeping, time increment.

All randomness flows through a single PCG stream, so a run is a pure
function of (config, seed, action sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .config import AgentConfig, ConfigError, WorldConfig
from .mapgen import Item, WorldMap
from .rng import Pcg32
from .scent import ScentField, diffusion_kernel
from .vision import DIR_DELTA, LEFT_OF, RIGHT_OF, render_egocentric


class ActionError(ValueError):
    """Raised for invalid action submissions (duplicate, out of space)."""


class SpawnError(RuntimeError):
    """Raised when no unblocked spawn cell is found after bounded retries."""


ACTION_KINDS = ("MoveForward", "TurnLeft", "TurnRight",
                "Collect", "Drop", "NoOp")


@dataclass(frozen=True)
class Action:
    """One agent action.  `item_type` is used by Drop only."""

    kind: str
    item_type: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ActionError(f"unknown action kind: {self.kind!r}")
        if self.kind == "Drop":
            if not isinstance(self.item_type, int):
                raise ActionError("Drop requires an item type index")
        elif self.item_type is not None:
            raise ActionError(f"{self.kind} takes no item type")


MOVE_FORWARD = Action("MoveForward")
TURN_LEFT = Action("TurnLeft")
TURN_RIGHT = Action("TurnRight")
COLLECT = Action("Collect")
NO_OP = Action("NoOp")


@dataclass
class AgentState:
    agent_id: int
    position: tuple[int, int]
    direction: str
    visual_range: int
    field_of_view: float
    color: tuple[float, ...]
    scent: tuple[float, ...]
    action_space: tuple[str, ...]
    spawn: tuple[int, int]
    inventory: dict[int, int] = field(default_factory=dict)
    pending_action: Optional[Action] = None
    distance_max: float = 0.0
    last_moved: bool = False


@dataclass(frozen=True)
class AgentTransition:
    """What one step did to one agent; sufficient input for reward terms."""

    agent_id: int
    prev_position: tuple[int, int]
    prev_direction: str
    position: tuple[int, int]
    direction: str
    action: Action
    items_collected: Mapping[int, int]
    items_dropped: Mapping[int, int]
    moved: bool
    time: int
    # Euclidean distance from spawn after the step, and the running
    # maximum before it was refreshed; the exploration reward compares
    # the two.
    distance: float = 0.0
    prev_distance_max: float = 0.0


class Observation:
    """Agent-centric view captured right after a step.

    `vision` and `scent` are computed from live simulator state on first
    access, so they must be read before the simulator advances again.
    Position, direction, time, and the moved flag are captured eagerly.
    """

    def __init__(self, sim: "Simulator", agent: AgentState):
        self._sim = sim
        self.agent_id = agent.agent_id
        self.time = sim.time
        self.position = agent.position
        self.direction = agent.direction
        self.moved = agent.last_moved
        self._visual_range = agent.visual_range
        self._field_of_view = agent.field_of_view
        self._vision: Optional[np.ndarray] = None
        self._scent: Optional[np.ndarray] = None

    @property
    def vision(self) -> np.ndarray:
        if self._vision is None:
            self._vision = self._sim.render_vision(
                self.position, self.direction,
                self._visual_range, self._field_of_view)
        return self._vision

    @property
    def scent(self) -> np.ndarray:
        if self._scent is None:
            self._scent = self._sim.scent_field.query(self.position, self.time)
        return self._scent


# Retry bound for spawn-cell draws, as a multiple of the patch cell count.
SPAWN_RETRY_FACTOR = 4


class Simulator:
    """One simulated world.  Externally synchronized: single writer."""

    def __init__(self, config: WorldConfig, rng: Optional[Pcg32] = None):
        self.config = config
        self.rng = rng if rng is not None else Pcg32(config.seed)
        self.world_map = WorldMap(config)
        self.kernel = diffusion_kernel(config.scent_decay,
                                       config.scent_diffusion)
        self.scent_field = ScentField(self.kernel, config.scent_dims)
        self.time = 0
        self.agents: dict[int, AgentState] = {}
        self.last_transitions: list[AgentTransition] = []
        self._next_agent_id = 0
        self._arrival: list[int] = []
        self._agents_at: dict[tuple[int, int], set[int]] = {}
        self._type_colors = np.array([t.color for t in config.item_types])
        self._type_occlusion = np.array([t.occlusion
                                         for t in config.item_types])

    # -- registry ----------------------------------------------------------

    def add_agent(self, agent_config: Optional[AgentConfig] = None,
                  position: Optional[tuple[int, int]] = None) -> int:
        """Register a new agent and generate the world around it.

        The first agent spawns at the origin; later agents draw uniform
        cells in the origin patch.  Cells holding a blocking item or
        another agent are re-drawn, with a bounded retry count.  An
        explicit `position` (test/tool hook) skips the draw entirely and
        consumes no randomness.
        """
        cfg = agent_config if agent_config is not None \
            else self.config.agent_defaults
        if len(cfg.color) != self.config.color_dims:
            raise ConfigError("agent color dimension mismatch")
        if len(cfg.scent) != self.config.scent_dims:
            raise ConfigError("agent scent dimension mismatch")
        for kind in cfg.action_space:
            if kind not in ACTION_KINDS:
                raise ConfigError(f"unknown action in action space: {kind!r}")

        radius = max(cfg.visual_range, self.kernel.cutoff)
        if position is not None:
            self._generate_around(position, radius, self.time)
            if not self._spawnable(position):
                raise SpawnError(f"cell {position} is blocked")
        else:
            self._generate_around((0, 0), radius, self.time)
            position = self._draw_spawn_cell(first=not self.agents)
            if position != (0, 0):
                self._generate_around(position, radius, self.time)

        agent_id = self._next_agent_id
        self._next_agent_id += 1
        agent = AgentState(
            agent_id=agent_id, position=position, direction="N",
            visual_range=cfg.visual_range, field_of_view=cfg.field_of_view,
            color=tuple(cfg.color), scent=tuple(cfg.scent),
            action_space=tuple(cfg.action_space), spawn=position)
        self.agents[agent_id] = agent
        self._agents_at.setdefault(position, set()).add(agent_id)
        if any(agent.scent):
            self.scent_field.add_event(self.time, position, 1, agent.scent)
        return agent_id

    def _draw_spawn_cell(self, first: bool) -> tuple[int, int]:
        p = self.config.patch_size
        if first and self._spawnable((0, 0)):
            return (0, 0)
        for _ in range(SPAWN_RETRY_FACTOR * p * p):
            cell = self.rng.next_below(p * p)
            position = (cell % p, cell // p)
            if self._spawnable(position):
                return position
        raise SpawnError("no unblocked spawn cell in the origin patch")

    def _spawnable(self, position: tuple[int, int]) -> bool:
        if self._agents_at.get(position):
            return False
        item = self.world_map.item_at(position)
        return item is None or \
            not self.config.item_types[item.type_id].blocks_movement

    def remove_agent(self, agent_id: int) -> Optional[list[AgentTransition]]:
        """Drop an agent from the world.

        If the removal leaves every remaining agent with a pending action,
        the blocked turn executes and its transitions are returned.
        """
        agent = self.agents.pop(agent_id)
        self._agents_at[agent.position].discard(agent_id)
        if agent_id in self._arrival:
            self._arrival.remove(agent_id)
        if any(agent.scent):
            self.scent_field.add_event(self.time, agent.position, -1,
                                       agent.scent)
        if self.agents and all(a.pending_action is not None
                               for a in self.agents.values()):
            return self._step()
        return None

    def discard_pending(self) -> None:
        """Forget uncommitted actions; the blocked turn never happens.

        Lets an operator save a quiescent state at shutdown even when
        some agents had already submitted actions for the next turn.
        """
        for agent in self.agents.values():
            agent.pending_action = None
        self._arrival.clear()

    # -- actions -----------------------------------------------------------

    def request_action(self, agent_id: int,
                       action: Action) -> Optional[list[AgentTransition]]:
        """Record one agent's action for this turn.

        Returns the step's transitions when this request releases the
        barrier (all agents pending), None otherwise.
        """
        if agent_id not in self.agents:
            raise KeyError(f"unknown agent {agent_id}")
        agent = self.agents[agent_id]
        if agent.pending_action is not None:
            raise ActionError(f"agent {agent_id} already acted this turn")
        if action.kind not in agent.action_space:
            raise ActionError(
                f"action {action.kind} not in the agent's action space "
                f"{agent.action_space}")
        if action.kind == "Drop" and not (
                0 <= action.item_type < len(self.config.item_types)):
            raise ActionError(f"unknown item type {action.item_type}")
        agent.pending_action = action
        self._arrival.append(agent_id)
        if all(a.pending_action is not None for a in self.agents.values()):
            return self._step()
        return None

    # -- stepping ----------------------------------------------------------

    def _step(self) -> list[AgentTransition]:
        new_time = self.time + 1
        agents = self.agents
        prev = {aid: (a.position, a.direction) for aid, a in agents.items()}
        moved: dict[int, bool] = {aid: False for aid in agents}
        collected: dict[int, dict[int, int]] = {}
        dropped: dict[int, dict[int, int]] = {}

        for aid in self._arrival:
            a = agents[aid]
            kind = a.pending_action.kind
            if kind == "TurnLeft":
                a.direction = LEFT_OF[a.direction]
            elif kind == "TurnRight":
                a.direction = RIGHT_OF[a.direction]

        movers = [aid for aid in self._arrival
                  if agents[aid].pending_action.kind == "MoveForward"]
        policy = self.config.collision_policy
        if policy == "random-winner":
            # Fisher-Yates on the arrival-ordered list.
            for i in range(len(movers) - 1, 0, -1):
                j = self.rng.next_below(i + 1)
                movers[i], movers[j] = movers[j], movers[i]
        for aid in movers:
            a = agents[aid]
            dx, dy = DIR_DELTA[a.direction]
            target = (a.position[0] + dx, a.position[1] + dy)
            if self._move_blocked(target, policy):
                continue
            self._agents_at[a.position].discard(aid)
            self._agents_at.setdefault(target, set()).add(aid)
            if any(a.scent):
                self.scent_field.add_event(new_time, a.position, -1, a.scent)
                self.scent_field.add_event(new_time, target, 1, a.scent)
            a.position = target
            moved[aid] = True

        for aid in self._arrival:
            a = agents[aid]
            if a.pending_action.kind == "Collect":
                self._try_collect(a, new_time, collected)
        for aid in self._arrival:
            a = agents[aid]
            if moved[aid] and "Collect" not in a.action_space:
                self._try_collect(a, new_time, collected)
        for aid in self._arrival:
            a = agents[aid]
            if a.pending_action.kind == "Drop":
                self._try_drop(a, a.pending_action.item_type, new_time,
                               dropped)

        for aid in self._arrival:
            a = agents[aid]
            if moved[aid]:
                radius = max(a.visual_range, self.kernel.cutoff)
                self._generate_around(a.position, radius, new_time)

        distances: dict[int, tuple[float, float]] = {}
        for aid, a in agents.items():
            ddx = a.position[0] - a.spawn[0]
            ddy = a.position[1] - a.spawn[1]
            # sqrt of an exact integer sum: correctly rounded, so the
            # stored running maximum is platform-independent.
            d = math.sqrt(ddx * ddx + ddy * ddy)
            distances[aid] = (d, a.distance_max)
            if d > a.distance_max:
                a.distance_max = d

        self.scent_field.compact(new_time)
        self.time = new_time

        transitions = []
        for aid in sorted(agents):
            a = agents[aid]
            d, prev_max = distances[aid]
            transitions.append(AgentTransition(
                agent_id=aid,
                prev_position=prev[aid][0], prev_direction=prev[aid][1],
                position=a.position, direction=a.direction,
                action=a.pending_action,
                items_collected=collected.get(aid, {}),
                items_dropped=dropped.get(aid, {}),
                moved=moved[aid], time=new_time,
                distance=d, prev_distance_max=prev_max))
            a.last_moved = moved[aid]
            a.pending_action = None
        self._arrival.clear()
        self.last_transitions = transitions
        return transitions

    def _move_blocked(self, target: tuple[int, int], policy: str) -> bool:
        item = self.world_map.item_at(target)
        if item is not None and \
                self.config.item_types[item.type_id].blocks_movement:
            return True
        if policy == "allow-overlap":
            return False
        return bool(self._agents_at.get(target))

    def _try_collect(self, agent: AgentState, new_time: int,
                     collected: dict[int, dict[int, int]]) -> None:
        item = self.world_map.item_at(agent.position)
        if item is None:
            return
        spec = self.config.item_types[item.type_id]
        if spec.blocks_movement:
            return
        inv = agent.inventory
        # Requirements are checked against the inventory before any cost
        # is deducted, and are not consumed themselves.
        for name, count in spec.collect_requirements.items():
            if inv.get(self.config.type_index(name), 0) < count:
                return
        costs = [(self.config.type_index(name), count)
                 for name, count in spec.collect_costs.items()]
        if any(inv.get(t, 0) < count for t, count in costs):
            return
        for t, count in costs:
            inv[t] -= count
            if inv[t] == 0:
                del inv[t]
        self.world_map.remove_item(item)
        inv[item.type_id] = inv.get(item.type_id, 0) + 1
        per_agent = collected.setdefault(agent.agent_id, {})
        per_agent[item.type_id] = per_agent.get(item.type_id, 0) + 1
        if any(spec.scent):
            self.scent_field.add_event(new_time, item.position, -1,
                                       spec.scent)

    def _try_drop(self, agent: AgentState, type_id: int, new_time: int,
                  dropped: dict[int, dict[int, int]]) -> None:
        # One item per cell; a failed drop is a recorded no-op.
        if agent.inventory.get(type_id, 0) < 1:
            return
        if self.world_map.item_at(agent.position) is not None:
            return
        agent.inventory[type_id] -= 1
        if agent.inventory[type_id] == 0:
            del agent.inventory[type_id]
        item = Item(agent.position, type_id, created_at=new_time)
        self.world_map.add_item(item)
        per_agent = dropped.setdefault(agent.agent_id, {})
        per_agent[type_id] = per_agent.get(type_id, 0) + 1
        spec = self.config.item_types[type_id]
        if any(spec.scent):
            self.scent_field.add_event(new_time, item.position, 1, spec.scent)

    # -- world upkeep ------------------------------------------------------

    def _generate_around(self, position: tuple[int, int], radius: int,
                         event_time: int) -> None:
        new_patches = self.world_map.ensure_generated(position, radius,
                                                      self.rng)
        for patch in new_patches:
            for i, item in enumerate(patch.items):
                stamped = replace(item, created_at=event_time)
                patch.items[i] = stamped
                self.world_map.occupancy[stamped.position] = stamped
                spec = self.config.item_types[stamped.type_id]
                if any(spec.scent):
                    self.scent_field.add_event(event_time, stamped.position,
                                               1, spec.scent)

    def place_item(self, position: tuple[int, int], type_id: int) -> Item:
        """Put an item on an empty cell of a fixed patch (test/tool hook)."""
        item = Item(position, type_id, created_at=self.time)
        self.world_map.add_item(item)
        spec = self.config.item_types[type_id]
        if any(spec.scent):
            self.scent_field.add_event(self.time, position, 1, spec.scent)
        return item

    # -- observation -------------------------------------------------------

    def observe(self, agent_id: int) -> Observation:
        return Observation(self, self.agents[agent_id])

    def render_vision(self, position: tuple[int, int], direction: str,
                      visual_range: int, field_of_view: float) -> np.ndarray:
        items = []
        x0, y0 = position
        occupancy = self.world_map.occupancy
        r = visual_range
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                item = occupancy.get((x0 + dx, y0 + dy))
                if item is not None:
                    items.append((dx, dy, item.type_id))
        agents = []
        for other in self.agents.values():
            dx = other.position[0] - x0
            dy = other.position[1] - y0
            if abs(dx) <= r and abs(dy) <= r:
                agents.append((dx, dy, other.color))
        return render_egocentric(items, agents, direction, r, field_of_view,
                                 self._type_colors, self._type_occlusion)

    # -- digests -----------------------------------------------------------

    def state_digest(self) -> str:
        """Stable hex digest of the complete serialized state."""
        from .persistence import state_digest
        return state_digest(self)
