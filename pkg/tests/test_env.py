"""Environment and batch behaviour: stepping, schedules, metrics CSV."""

import csv

import numpy as np
import pytest

from forageworld.env import EnvBatch, Environment, env_step, write_metrics_csv
from forageworld.functions import Constant
from forageworld.rewards import Cyclical, Fixed, parse_reward, reward_rate
from forageworld.simulation import MOVE_FORWARD, TURN_LEFT, TURN_RIGHT
from _worlds import item_type, make_config


def pellet_env(seed=0):
    """One suppressed-field pellet world; reward 1 per pellet collected."""
    config = make_config([item_type("pellet")], seed=seed)
    return Environment(config, Fixed(parse_reward("Collect[pellet]", config)))


def test_step_onto_pellet_pays_one():
    env = pellet_env()
    env.simulator.place_item((0, 1), 0)
    obs, reward = env.step(MOVE_FORWARD)
    assert reward == 1.0
    assert obs.moved
    assert obs.position == (0, 1)
    assert env.rewards == [1.0]


def test_step_without_pellet_pays_zero():
    env = pellet_env()
    _, reward = env.step(MOVE_FORWARD)
    assert reward == 0.0


def test_batch_of_one_matches_single_environment():
    config = make_config([item_type("pellet")], seed=7)
    schedule = Fixed(parse_reward("Collect[pellet]", config))
    batch = EnvBatch(config, schedule, 1)
    batch.entries[0].simulator.place_item((0, 1), 0)
    observations, rewards, batch = env_step(batch, [MOVE_FORWARD])
    assert rewards == [1.0]
    assert observations[0].position == (0, 1)

    single = Environment(config, schedule)
    single.simulator.place_item((0, 1), 0)
    _, single_reward = single.step(MOVE_FORWARD)
    assert single_reward == rewards[0]
    assert single.simulator.state_digest() == \
        batch.entries[0].simulator.state_digest()


def populated_config(seed):
    # Mild suppression so patches actually hold items and seeds matter.
    return make_config([item_type("pellet", intensity=Constant(-2.0))],
                       seed=seed)


def test_batch_seeds_are_consecutive_and_worlds_differ():
    config = populated_config(11)
    schedule = Fixed(parse_reward("Explore", config))
    batch = EnvBatch(config, schedule, 4)
    assert [e.config.seed for e in batch] == [11, 12, 13, 14]
    digests = {e.simulator.state_digest() for e in batch}
    assert len(digests) == 4


def test_batch_base_seed_overrides_config_seed():
    config = populated_config(11)
    schedule = Fixed(parse_reward("Explore", config))
    batch = EnvBatch(config, schedule, 2, base_seed=300)
    assert [e.config.seed for e in batch] == [300, 301]


def test_batch_entries_are_independent():
    config = populated_config(11)
    schedule = Fixed(parse_reward("Explore", config))
    batch = EnvBatch(config, schedule, 3)
    before = [e.simulator.state_digest() for e in batch]
    for _ in range(20):
        batch.entries[0].step(MOVE_FORWARD)
    after = [e.simulator.state_digest() for e in batch]
    assert after[0] != before[0]
    assert after[1:] == before[1:]


def test_batch_runs_reproduce():
    config = populated_config(23)
    schedule = Fixed(parse_reward("Explore & Action[0.25]", config))
    script = [MOVE_FORWARD, TURN_LEFT, MOVE_FORWARD, MOVE_FORWARD, TURN_RIGHT]

    def run():
        batch = EnvBatch(config, schedule, 3)
        rewards = []
        for k in range(30):
            actions = [script[k % len(script)]] * len(batch)
            _, step_rewards, _ = env_step(batch, actions)
            rewards.append(step_rewards)
        return rewards, [e.simulator.state_digest() for e in batch]

    first_rewards, first_digests = run()
    second_rewards, second_digests = run()
    assert first_rewards == second_rewards
    assert first_digests == second_digests


def test_env_step_rejects_wrong_action_count():
    config = make_config()
    batch = EnvBatch(config, Fixed(parse_reward("Explore", config)), 3)
    with pytest.raises(ValueError):
        env_step(batch, [MOVE_FORWARD, MOVE_FORWARD])


def test_batch_size_must_be_positive():
    config = make_config()
    with pytest.raises(ValueError):
        EnvBatch(config, Fixed(parse_reward("Explore", config)), 0)


def test_cyclical_schedule_switches_on_simulator_time():
    config = make_config()
    schedule = Cyclical([(parse_reward("Action[2]", config), 2),
                         (parse_reward("Action[3]", config), 2)])
    env = Environment(config, schedule)
    rewards = [env.step(TURN_LEFT)[1] for _ in range(6)]
    assert rewards == [2.0, 2.0, 3.0, 3.0, 2.0, 2.0]


def test_reward_rates_match_reference():
    config = make_config()
    schedule = Cyclical([(parse_reward("Action[2]", config), 2),
                         (parse_reward("Action[3]", config), 2)])
    env = Environment(config, schedule)
    for _ in range(6):
        env.step(TURN_LEFT)
    np.testing.assert_allclose(env.reward_rates(4),
                               [2.0, 2.0, 7 / 3, 2.5, 2.5, 2.5])
    np.testing.assert_allclose(env.reward_rates(4),
                               reward_rate(env.rewards, 4))


def test_time_and_steps_advance_one_per_step():
    env = pellet_env()
    assert env.time == 0 and env.steps == 0
    for k in range(1, 8):
        env.step(TURN_LEFT)
        assert env.time == k
        assert env.steps == k


def test_environment_has_no_reset():
    env = pellet_env()
    assert not hasattr(env, "reset")


# -- metrics CSV ---------------------------------------------------------------


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_metrics_csv_layout(tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, [1.0, 0.5, 0.0], window=2)
    rows = read_rows(path)
    assert rows[0] == ["time", "reward", "reward_rate"]
    assert rows[1:] == [["1", "1.0", "1.0"],
                        ["2", "0.5", "0.75"],
                        ["3", "0.0", "0.25"]]


def test_metrics_csv_one_row_per_step(tmp_path):
    env = pellet_env()
    for _ in range(25):
        env.step(TURN_RIGHT)
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, env.rewards, window=10)
    assert len(read_rows(path)) == 1 + 25


def test_metrics_csv_stride_and_start_time(tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, [0.0, 1.0, 2.0, 3.0, 4.0], window=3,
                      stride=2, start_time=101)
    rows = read_rows(path)
    assert [r[0] for r in rows[1:]] == ["101", "103", "105"]
    assert [r[1] for r in rows[1:]] == ["0.0", "2.0", "4.0"]
