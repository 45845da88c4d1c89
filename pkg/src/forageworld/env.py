"""Single-agent environments over independent simulators, with batching.

An Environment owns one simulator and one agent and exposes a step
interface returning (observation, reward).  There is no reset: worlds
are single-episode by construction, and continuing is the only option.
A batch holds fully independent environments (equal configs, distinct
seeds) and steps them in a deterministic order.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence, Union

from .config import WorldConfig
from .rewards import RewardSchedule, eval_reward, reward_rate, schedule_at
from .simulation import Action, Observation, Simulator


class Environment:
    """One agent in one world under a reward schedule."""

    def __init__(self, config: WorldConfig, schedule: RewardSchedule):
        self.config = config
        self.schedule = schedule
        self.simulator = Simulator(config)
        self.agent_id = self.simulator.add_agent()
        self.rewards: list[float] = []

    @property
    def time(self) -> int:
        return self.simulator.time

    @property
    def steps(self) -> int:
        return len(self.rewards)

    def observe(self) -> Observation:
        return self.simulator.observe(self.agent_id)

    def step(self, action: Action) -> tuple[Observation, float]:
        """Apply one action; returns the new observation and its reward.

        The reward expression in force is the one scheduled for the time
        at which the action was taken.
        """
        expr = schedule_at(self.schedule, self.simulator.time)
        transitions = self.simulator.request_action(self.agent_id, action)
        transition = transitions[0]
        reward = eval_reward(expr, transition)
        self.rewards.append(reward)
        return self.simulator.observe(self.agent_id), reward

    def reward_rates(self, window: int):
        return reward_rate(self.rewards, window)


class EnvBatch:
    """Independent environments with consecutive seeds."""

    def __init__(self, config: WorldConfig, schedule: RewardSchedule,
                 batch_size: int, base_seed: Optional[int] = None):
        if batch_size < 1:
            raise ValueError("batch size must be at least 1")
        seed = config.seed if base_seed is None else base_seed
        self.entries = [Environment(config.with_seed(seed + k), schedule)
                        for k in range(batch_size)]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def env_step(batch: EnvBatch, actions: Sequence[Action]):
    """Step every batch entry once, in batch order.

    Returns (observations, rewards, batch); the batch object itself is
    advanced in place.
    """
    if len(actions) != len(batch.entries):
        raise ValueError(f"{len(batch.entries)} entries need "
                         f"{len(batch.entries)} actions, got {len(actions)}")
    observations = []
    rewards = []
    for entry, action in zip(batch.entries, actions):
        obs, reward = entry.step(action)
        observations.append(obs)
        rewards.append(reward)
    return observations, rewards, batch


def write_metrics_csv(path: Union[str, Path], rewards: Sequence[float],
                      window: int, stride: int = 1,
                      start_time: int = 1) -> None:
    """Write `time,reward,reward_rate` rows, one per step (or per stride).

    `start_time` is the simulation time at which the first reward was
    earned, so resumed runs keep a consistent time column.
    """
    rates = reward_rate(rewards, window)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["time", "reward", "reward_rate"])
        for k in range(0, len(rewards), stride):
            writer.writerow([start_time + k, repr(float(rewards[k])),
                             repr(float(rates[k]))])
