"""Reward expressions, their small DSL, and reward schedules.

The grammar is `expr := term ('&' term)*` with
`term := NAME '[' args ']' | NAME`, where NAME is one of Action,
Collect, Avoid, or Explore.  An omitted value argument defaults to 1,
`Avoid[i,v]` is sugar for `Collect[i,-v]`, and `&` combines terms by
summation.  Expressions evaluate against a single AgentTransition, so
evaluation is constant-time regardless of world size.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .config import WorldConfig
from .simulation import AgentTransition


class RewardParseError(ValueError):
    """Parse failure; `position` is a character offset into the source."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class ActionReward:
    value: float = 1.0


@dataclass(frozen=True)
class CollectReward:
    item: str
    type_id: int
    value: float = 1.0


@dataclass(frozen=True)
class ExploreReward:
    value: float = 1.0


@dataclass(frozen=True)
class CombinedReward:
    left: "RewardExpr"
    right: "RewardExpr"


RewardExpr = Union[ActionReward, CollectReward, ExploreReward,
                   CombinedReward]


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
                    r"|(?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<punct>[&\[\],]))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise RewardParseError(f"unexpected character {stripped[0]!r}",
                                   at)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, config: WorldConfig):
        self.tokens = _tokenize(text)
        self.config = config
        self.index = 0

    def peek(self):
        return self.tokens[self.index]

    def take(self, kind: str, value: str = None):
        tok_kind, tok_value, pos = self.tokens[self.index]
        if tok_kind != kind or (value is not None and tok_value != value):
            expected = value if value is not None else kind
            raise RewardParseError(
                f"expected {expected}, found {tok_value or 'end of input'!r}",
                pos)
        self.index += 1
        return tok_value, pos

    def parse(self) -> RewardExpr:
        expr = self.term()
        while self.peek()[:2] == ("punct", "&"):
            self.take("punct", "&")
            expr = CombinedReward(expr, self.term())
        kind, value, pos = self.peek()
        if kind != "end":
            raise RewardParseError(f"unexpected trailing {value!r}", pos)
        return expr

    def term(self) -> RewardExpr:
        name, pos = self.take("name")
        if name not in ("Action", "Collect", "Avoid", "Explore"):
            raise RewardParseError(f"unknown reward primitive {name!r}", pos)
        args = []
        if self.peek()[:2] == ("punct", "["):
            self.take("punct", "[")
            while True:
                args.append(self.peek())
                if self.peek()[0] not in ("name", "number"):
                    raise RewardParseError("expected an argument",
                                           self.peek()[2])
                self.index += 1
                if self.peek()[:2] == ("punct", ","):
                    self.take("punct", ",")
                    continue
                break
            self.take("punct", "]")
        return self.build(name, args, pos)

    def build(self, name, args, pos) -> RewardExpr:
        if name in ("Action", "Explore"):
            if len(args) > 1:
                raise RewardParseError(f"{name} takes at most one value",
                                       args[1][2])
            value = self.number(args[0]) if args else 1.0
            return ActionReward(value) if name == "Action" \
                else ExploreReward(value)
        # Collect and Avoid: item name first, optional value second
        if not args:
            raise RewardParseError(f"{name} needs an item type", pos)
        if len(args) > 2:
            raise RewardParseError(f"{name} takes at most two arguments",
                                   args[2][2])
        kind, item, item_pos = args[0]
        if kind != "name":
            raise RewardParseError("expected an item type name", item_pos)
        try:
            type_id = self.config.type_index(item)
        except KeyError:
            raise RewardParseError(f"unknown item type {item!r}",
                                   item_pos) from None
        value = self.number(args[1]) if len(args) == 2 else 1.0
        if name == "Avoid":
            value = -value
        return CollectReward(item, type_id, value)

    @staticmethod
    def number(token) -> float:
        kind, value, pos = token
        if kind != "number":
            raise RewardParseError(f"expected a number, found {value!r}",
                                   pos)
        return float(value)


def parse_reward(text: str, config: WorldConfig) -> RewardExpr:
    """Parse DSL text; item names are resolved against `config`."""
    return _Parser(text, config).parse()


def print_reward(expr: RewardExpr) -> str:
    """Canonical text form; `parse . print . parse` equals `parse`."""
    if isinstance(expr, CombinedReward):
        return f"{print_reward(expr.left)} & {print_reward(expr.right)}"
    if isinstance(expr, ActionReward):
        return "Action" if expr.value == 1.0 else f"Action[{expr.value!r}]"
    if isinstance(expr, ExploreReward):
        return "Explore" if expr.value == 1.0 else f"Explore[{expr.value!r}]"
    if isinstance(expr, CollectReward):
        if expr.value == 1.0:
            return f"Collect[{expr.item}]"
        return f"Collect[{expr.item},{expr.value!r}]"
    raise TypeError(f"not a reward expression: {expr!r}")


# -- evaluation ---------------------------------------------------------------


def eval_reward(expr: RewardExpr, transition: AgentTransition) -> float:
    if isinstance(expr, CombinedReward):
        return eval_reward(expr.left, transition) + \
            eval_reward(expr.right, transition)
    if isinstance(expr, ActionReward):
        return expr.value if transition.action.kind != "NoOp" else 0.0
    if isinstance(expr, CollectReward):
        return expr.value * transition.items_collected.get(expr.type_id, 0)
    if isinstance(expr, ExploreReward):
        # strict new record of distance from the spawn position
        return expr.value \
            if transition.distance > transition.prev_distance_max else 0.0
    raise TypeError(f"not a reward expression: {expr!r}")


# -- schedules ----------------------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    expr: RewardExpr


@dataclass(frozen=True)
class Curriculum:
    """Windows of (expr, duration); the last expression holds forever."""

    stages: tuple[tuple[RewardExpr, int], ...]

    def __post_init__(self):
        _check_stages(self.stages)


@dataclass(frozen=True)
class Cyclical:
    """Windows of (expr, duration), repeating after the total elapses."""

    stages: tuple[tuple[RewardExpr, int], ...]

    def __post_init__(self):
        _check_stages(self.stages)


RewardSchedule = Union[Fixed, Curriculum, Cyclical]


def _check_stages(stages) -> None:
    if not stages:
        raise ValueError("a schedule needs at least one stage")
    for _, duration in stages:
        if duration < 1:
            raise ValueError("stage durations must be positive")


def schedule_at(schedule: RewardSchedule, time: int) -> RewardExpr:
    """The reward expression in force at simulation time `time`."""
    if time < 0:
        raise ValueError("time must be non-negative")
    if isinstance(schedule, Fixed):
        return schedule.expr
    stages = schedule.stages
    if isinstance(schedule, Cyclical):
        time = time % sum(duration for _, duration in stages)
    for expr, duration in stages:
        if time < duration:
            return expr
        time -= duration
    return stages[-1][0]  # Curriculum: terminal stage persists


# -- metrics ------------------------------------------------------------------


def reward_rate(history: Sequence[float], window: int) -> np.ndarray:
    """Moving average of reward per step.

    Element t averages the last `window` rewards, or all t+1 available
    ones while the run is shorter than the window.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    rewards = np.asarray(history, dtype=np.float64)
    if rewards.size == 0:
        return np.zeros(0)
    sums = np.cumsum(rewards)
    out = np.empty_like(sums)
    out[:window] = sums[:window] / (np.arange(min(window, sums.size)) + 1)
    if sums.size > window:
        out[window:] = (sums[window:] - sums[:-window]) / window
    return out
