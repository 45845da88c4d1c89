"""Shared world builders for tests: tiny configs that stage exact
scenarios (suppressed item fields, hand-placed items)."""

from forageworld.config import AgentConfig, ItemType, WorldConfig
from forageworld.functions import Constant
from forageworld.simulation import Simulator

MOVE_ONLY = ("MoveForward", "TurnLeft", "TurnRight")


def item_type(name, blocks=False, scent=(0.0, 0.0, 0.0), color=(1.0, 0.0, 0.0),
              intensity=None, requirements=None, costs=None, occlusion=0.0):
    return ItemType(name=name, scent=scent, color=color, occlusion=occlusion,
                    blocks_movement=blocks,
                    intensity=intensity or Constant(-50.0),
                    collect_requirements=requirements or {},
                    collect_costs=costs or {})


def make_config(item_types=None, action_space=MOVE_ONLY, seed=0,
                collision="first-come-first-serve", agent_scent=(0, 0, 0),
                decay=0.0, diffusion=0.0, patch_size=8, mh_iterations=50,
                visual_range=5, field_of_view=360.0):
    types = item_types if item_types is not None else [item_type("pellet")]
    return WorldConfig(
        scent_dims=3, color_dims=3, patch_size=patch_size,
        mh_iterations=mh_iterations, scent_decay=decay,
        scent_diffusion=diffusion, item_types=tuple(types),
        agent_defaults=AgentConfig(color=(0.0, 0.0, 1.0), scent=agent_scent,
                                   visual_range=visual_range,
                                   field_of_view=field_of_view,
                                   action_space=tuple(action_space)),
        collision_policy=collision, seed=seed)


def staged_sim(item_types=None, **kwargs):
    """Simulator over an empty (deeply suppressed) item field."""
    return Simulator(make_config(item_types=item_types, **kwargs))
