"""World configuration: item types, agent defaults, and world parameters.

Configurations are plain frozen dataclasses, loadable from a single JSON
document with top-level keys ``version``, ``map``, ``agent``, ``items``.
Ready-made configuration files live in the ``configs/`` package directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence, Union

from .functions import (
    Constant,
    Cross,
    CrossHash,
    IntensityFn,
    InteractionFn,
    PiecewiseBox,
    RadialHash,
    ZeroIntensity,
    ZeroInteraction,
)

CONFIG_VERSION = 1

COLLISION_POLICIES = ("allow-overlap", "first-come-first-serve", "random-winner")

ACTION_KINDS = ("MoveForward", "TurnLeft", "TurnRight", "Collect", "Drop", "NoOp")


class ConfigError(ValueError):
    """Raised when a configuration document is structurally invalid."""


@dataclass(frozen=True)
class AgentConfig:
    color: tuple[float, ...]
    scent: tuple[float, ...]
    visual_range: int = 8
    field_of_view: float = 360.0
    action_space: tuple[str, ...] = ("MoveForward", "TurnLeft", "TurnRight")


@dataclass(frozen=True)
class ItemType:
    name: str
    scent: tuple[float, ...]
    color: tuple[float, ...]
    occlusion: float = 0.0
    blocks_movement: bool = False
    intensity: IntensityFn = ZeroIntensity()
    interactions: Mapping[str, InteractionFn] = field(default_factory=dict)
    collect_requirements: Mapping[str, int] = field(default_factory=dict)
    collect_costs: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class WorldConfig:
    scent_dims: int
    color_dims: int
    patch_size: int
    mh_iterations: int
    scent_decay: float
    scent_diffusion: float
    item_types: tuple[ItemType, ...]
    agent_defaults: AgentConfig
    collision_policy: str = "first-come-first-serve"
    seed: int = 0

    def __post_init__(self):
        _validate(self)

    # -- lookups ----------------------------------------------------------

    def type_index(self, name: str) -> int:
        for i, t in enumerate(self.item_types):
            if t.name == name:
                return i
        raise KeyError(f"unknown item type: {name!r}")

    def interaction(self, t1: int, t2: int) -> InteractionFn:
        """Interaction of type index t1 with t2; Zero when unspecified."""
        name2 = self.item_types[t2].name
        return self.item_types[t1].interactions.get(name2, ZeroInteraction())

    def with_seed(self, seed: int) -> "WorldConfig":
        return replace(self, seed=seed)

    def digest(self) -> str:
        """Stable hex digest of the canonical JSON form."""
        text = json.dumps(config_to_dict(self), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _validate(cfg: WorldConfig) -> None:
    if cfg.scent_dims <= 0 or cfg.color_dims <= 0:
        raise ConfigError("scent and color dimensionalities must be positive")
    if cfg.patch_size <= 0:
        raise ConfigError("patch_size must be positive")
    if cfg.mh_iterations <= 0:
        raise ConfigError("mh_iterations must be positive")
    if not 0.0 <= cfg.scent_decay < 1.0:
        raise ConfigError("scent_decay must lie in [0, 1)")
    if cfg.scent_diffusion < 0.0:
        raise ConfigError("scent_diffusion must be nonnegative")
    if cfg.scent_decay + 4.0 * cfg.scent_diffusion >= 1.0:
        raise ConfigError(
            "scent_decay + 4 * scent_diffusion must be < 1 for the scent "
            "field to converge")
    if cfg.collision_policy not in COLLISION_POLICIES:
        raise ConfigError(f"unknown collision policy: {cfg.collision_policy!r}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")

    names = [t.name for t in cfg.item_types]
    if len(set(names)) != len(names):
        raise ConfigError("item type names must be unique")
    for t in cfg.item_types:
        if len(t.scent) != cfg.scent_dims:
            raise ConfigError(f"{t.name}: scent vector must have length "
                              f"{cfg.scent_dims}")
        if len(t.color) != cfg.color_dims:
            raise ConfigError(f"{t.name}: color vector must have length "
                              f"{cfg.color_dims}")
        if not 0.0 <= t.occlusion <= 1.0:
            raise ConfigError(f"{t.name}: occlusion must lie in [0, 1]")
        for table_name, table in (("interactions", t.interactions),
                                  ("collect_requirements", t.collect_requirements),
                                  ("collect_costs", t.collect_costs)):
            for other in table:
                if other not in names:
                    raise ConfigError(
                        f"{t.name}: {table_name} references unknown item "
                        f"type {other!r}")
        for table in (t.collect_requirements, t.collect_costs):
            if any(n < 0 for n in table.values()):
                raise ConfigError(f"{t.name}: collection counts must be >= 0")

    a = cfg.agent_defaults
    if len(a.scent) != cfg.scent_dims or len(a.color) != cfg.color_dims:
        raise ConfigError("agent scent/color dimensionalities do not match "
                          "the world")
    if a.visual_range <= 0:
        raise ConfigError("visual_range must be positive")
    if not 0.0 < a.field_of_view <= 360.0:
        raise ConfigError("field_of_view must lie in (0, 360]")
    if not a.action_space:
        raise ConfigError("action space must not be empty")
    for kind in a.action_space:
        if kind not in ACTION_KINDS:
            raise ConfigError(f"unknown action kind: {kind!r}")


# ---------------------------------------------------------------------------
# JSON serialization: function specs use tagged arrays whose parameter order
# matches the functional-form definitions, e.g. ["PiecewiseBox", 10, 100, 0, -6].

_INTENSITY_TAGS = {"Zero": 0, "Constant": 1, "RadialHash": 4}
_INTERACTION_TAGS = {"Zero": 0, "PiecewiseBox": 4, "Cross": 6, "CrossHash": 8}


def intensity_from_json(value: Sequence) -> IntensityFn:
    tag, args = _split_tagged(value, _INTENSITY_TAGS, "intensity")
    if tag == "Zero":
        return ZeroIntensity()
    if tag == "Constant":
        return Constant(*args)
    return RadialHash(*args)


def interaction_from_json(value: Sequence) -> InteractionFn:
    tag, args = _split_tagged(value, _INTERACTION_TAGS, "interaction")
    if tag == "Zero":
        return ZeroInteraction()
    if tag == "PiecewiseBox":
        return PiecewiseBox(*args)
    if tag == "Cross":
        return Cross(*args)
    return CrossHash(*args)


def _split_tagged(value, tags, kind):
    if (not isinstance(value, (list, tuple)) or not value
            or not isinstance(value[0], str)):
        raise ConfigError(f"{kind} function must be a tagged array, got "
                          f"{value!r}")
    tag = value[0]
    if tag not in tags:
        raise ConfigError(f"unknown {kind} function {tag!r}")
    args = [float(v) for v in value[1:]]
    if len(args) != tags[tag]:
        raise ConfigError(f"{tag} expects {tags[tag]} parameters, got "
                          f"{len(args)}")
    return tag, args


def _fn_to_json(fn: Union[IntensityFn, InteractionFn]) -> list:
    # Parameters are emitted as floats so the canonical JSON form is
    # byte-stable however the function object was constructed.
    if isinstance(fn, (ZeroIntensity, ZeroInteraction)):
        return ["Zero"]
    if isinstance(fn, Constant):
        return ["Constant", float(fn.value)]
    if isinstance(fn, RadialHash):
        params = (fn.shift, fn.scale, fn.base, fn.gain)
    elif isinstance(fn, PiecewiseBox):
        params = (fn.near_cutoff, fn.far_cutoff, fn.near_value, fn.far_value)
    elif isinstance(fn, Cross):
        params = (fn.near_cutoff, fn.far_cutoff, fn.aligned_near,
                  fn.aligned_far, fn.misaligned_near, fn.misaligned_far)
    elif isinstance(fn, CrossHash):
        params = (fn.scale, fn.base, fn.gain, fn.band, fn.aligned_near,
                  fn.aligned_far, fn.misaligned_near, fn.misaligned_far)
    else:
        raise TypeError(f"not a function spec: {fn!r}")
    return [type(fn).__name__] + [float(v) for v in params]


def config_from_dict(doc: Mapping) -> WorldConfig:
    try:
        version = doc["version"]
    except (KeyError, TypeError):
        raise ConfigError("config document must declare a version") from None
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")

    map_doc = doc.get("map", {})
    agent_doc = doc.get("agent", {})
    items_doc = doc.get("items", [])

    items = []
    for item in items_doc:
        try:
            name = item["name"]
        except (KeyError, TypeError):
            raise ConfigError("every item type needs a name") from None
        items.append(ItemType(
            name=name,
            scent=tuple(float(v) for v in item.get("scent", ())),
            color=tuple(float(v) for v in item.get("color", ())),
            occlusion=float(item.get("occlusion", 0.0)),
            blocks_movement=bool(item.get("blocks_movement", False)),
            intensity=intensity_from_json(item.get("intensity", ["Zero"])),
            interactions={
                other: interaction_from_json(fn)
                for other, fn in item.get("interactions", {}).items()
            },
            collect_requirements={k: int(v) for k, v in
                                  item.get("collect_requirements", {}).items()},
            collect_costs={k: int(v) for k, v in
                           item.get("collect_costs", {}).items()},
        ))

    agent = AgentConfig(
        color=tuple(float(v) for v in agent_doc.get("color", ())),
        scent=tuple(float(v) for v in agent_doc.get("scent", ())),
        visual_range=int(agent_doc.get("visual_range", 8)),
        field_of_view=float(agent_doc.get("field_of_view", 360.0)),
        action_space=tuple(agent_doc.get(
            "action_space", ("MoveForward", "TurnLeft", "TurnRight"))),
    )

    return WorldConfig(
        scent_dims=int(map_doc.get("scent_dims", 3)),
        color_dims=int(map_doc.get("color_dims", 3)),
        patch_size=int(map_doc.get("patch_size", 32)),
        mh_iterations=int(map_doc.get("mh_iterations", 4000)),
        scent_decay=float(map_doc.get("scent_decay", 0.4)),
        scent_diffusion=float(map_doc.get("scent_diffusion", 0.14)),
        item_types=tuple(items),
        agent_defaults=agent,
        collision_policy=map_doc.get("collision_policy",
                                     "first-come-first-serve"),
        seed=int(map_doc.get("seed", 0)),
    )


def config_to_dict(cfg: WorldConfig) -> dict:
    return {
        "version": CONFIG_VERSION,
        "map": {
            "scent_dims": cfg.scent_dims,
            "color_dims": cfg.color_dims,
            "patch_size": cfg.patch_size,
            "mh_iterations": cfg.mh_iterations,
            "scent_decay": float(cfg.scent_decay),
            "scent_diffusion": float(cfg.scent_diffusion),
            "collision_policy": cfg.collision_policy,
            "seed": cfg.seed,
        },
        "agent": {
            "color": [float(v) for v in cfg.agent_defaults.color],
            "scent": [float(v) for v in cfg.agent_defaults.scent],
            "visual_range": cfg.agent_defaults.visual_range,
            "field_of_view": float(cfg.agent_defaults.field_of_view),
            "action_space": list(cfg.agent_defaults.action_space),
        },
        "items": [
            {
                "name": t.name,
                "scent": [float(v) for v in t.scent],
                "color": [float(v) for v in t.color],
                "occlusion": float(t.occlusion),
                "blocks_movement": t.blocks_movement,
                "intensity": _fn_to_json(t.intensity),
                "interactions": {k: _fn_to_json(v)
                                 for k, v in sorted(t.interactions.items())},
                "collect_requirements": dict(sorted(
                    t.collect_requirements.items())),
                "collect_costs": dict(sorted(t.collect_costs.items())),
            }
            for t in cfg.item_types
        ],
    }


def load_config(path: Union[str, Path]) -> WorldConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
    return config_from_dict(doc)


def save_config(cfg: WorldConfig, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def builtin_config(name: str) -> WorldConfig:
    """Load one of the configuration files shipped with the package."""
    ref = resources.files("forageworld").joinpath(f"configs/{name}.json")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        available = sorted(p.name[:-5] for p in
                           resources.files("forageworld").joinpath("configs").iterdir()
                           if p.name.endswith(".json"))
        raise ConfigError(f"no built-in config named {name!r}; available: "
                          f"{', '.join(available)}") from None
    return config_from_dict(json.loads(text))
