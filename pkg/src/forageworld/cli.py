"""Operator entry point: run, bench, serve, and replay commands.

Every command is deterministic given its flags, seed, and input files;
only wall-clock figures (steps/sec, patches/sec) vary between runs and
those never end up in output files.

Exit codes: 0 success, 1 usage, 2 configuration or reward-DSL error,
3 runtime failure (I/O, bind, replay mismatch).
"""

from __future__ import annotations

import argparse
import base64
import json
import signal
import sys
import threading
import time
from pathlib import Path
from typing import Optional

from .baselines import GreedyAgent, greedy_targets, random_policy
from .config import ConfigError, WorldConfig, builtin_config, load_config
from .env import EnvBatch, write_metrics_csv
from .mapgen import WorldMap
from .persistence import (PersistenceError, load_file, save_file, save_state,
                          state_digest)
from .rewards import (Curriculum, Cyclical, Fixed, RewardParseError,
                      RewardSchedule, parse_reward, reward_rate, schedule_at)
from .rng import Pcg32
from .server import SimServer
from .simulation import Action, Simulator
from .vision import visible_mask

# Dedicated stream for baseline policies, distinct from the world's own
# generator so that policy draws never perturb map generation.
POLICY_SEQ = 0x9a11

LOG_FORMAT = "forageworld-log"


class CliError(Exception):
    """A failure with a chosen exit code."""

    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config_arg(value: str) -> WorldConfig:
    """A path when one exists, otherwise a built-in configuration name."""
    if Path(value).is_file():
        return load_config(value)
    return builtin_config(value)


def _read_reward_text(value: str) -> str:
    if Path(value).is_file():
        return Path(value).read_text(encoding="utf-8").strip()
    return value


def _build_schedule(args, config: WorldConfig) -> Optional[RewardSchedule]:
    if args.reward is not None and args.schedule is not None:
        raise CliError("--reward and --schedule are mutually exclusive", 1)
    if args.reward is not None:
        return Fixed(parse_reward(_read_reward_text(args.reward), config))
    if args.schedule is None:
        return None
    doc = json.loads(Path(args.schedule).read_text(encoding="utf-8"))
    kind = doc.get("kind")
    if kind == "fixed":
        return Fixed(parse_reward(doc["reward"], config))
    if kind in ("cyclical", "curriculum"):
        stages = tuple((parse_reward(text, config), int(duration))
                       for text, duration in doc["stages"])
        return Cyclical(stages) if kind == "cyclical" else Curriculum(stages)
    raise CliError(f"unknown schedule kind {kind!r} "
                   "(expected fixed, cyclical, or curriculum)", 2)


# -- agents ---------------------------------------------------------------------


class _GreedyRunner:
    """Greedy baseline that re-derives its targets on schedule changes."""

    def __init__(self, config: WorldConfig, schedule: RewardSchedule,
                 seed: int):
        self._config = config
        self._schedule = schedule
        self._rng = Pcg32(seed, POLICY_SEQ)
        defaults = config.agent_defaults
        self._visible = None
        if defaults.field_of_view < 360.0:
            self._visible = visible_mask(defaults.visual_range,
                                         defaults.field_of_view)
        self._expr = None
        self._agent: Optional[GreedyAgent] = None

    def act(self, vision, sim_time: int) -> Action:
        expr = schedule_at(self._schedule, sim_time)
        if expr != self._expr:
            c_r, c_w, c_o = greedy_targets(self._config, expr)
            self._agent = GreedyAgent(c_r, c_w, c_o, rng=self._rng,
                                      visible=self._visible)
            self._expr = expr
        return self._agent.act(vision)


class _RandomRunner:
    def __init__(self, config: WorldConfig, seed: int):
        self._space = config.agent_defaults.action_space
        self._rng = Pcg32(seed, POLICY_SEQ)

    def act(self, vision, sim_time: int) -> Action:
        return random_policy(self._space, self._rng)


def _make_runner(name: str, config: WorldConfig,
                 schedule: RewardSchedule, seed: int):
    if name == "greedy":
        return _GreedyRunner(config, schedule, seed)
    if "Drop" in config.agent_defaults.action_space:
        raise CliError("the random agent cannot use a Drop action "
                       "(no item choice policy)", 2)
    return _RandomRunner(config, seed)


# -- run ------------------------------------------------------------------------


def _log_line(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def cmd_run(args) -> int:
    config = _load_config_arg(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    schedule = _build_schedule(args, config)
    if schedule is None:
        raise CliError("run needs --reward or --schedule", 1)
    if args.batch < 1:
        raise CliError("--batch must be at least 1", 1)
    if args.batch > 1 and (args.save or args.log):
        raise CliError("--save/--log apply to single runs (--batch 1)", 1)

    batch = EnvBatch(config, schedule, args.batch)
    runners = [_make_runner(args.agent, entry.config, schedule,
                            entry.config.seed)
               for entry in batch.entries]

    log_lines: list[str] = []
    if args.log:
        env = batch.entries[0]
        start = base64.b64encode(save_state(env.simulator)).decode("ascii")
        log_lines.append(_log_line({"format": LOG_FORMAT, "v": 1,
                                    "agent": env.agent_id, "start": start}))

    start_time = batch.entries[0].time + 1
    mean_rewards: list[float] = []
    began = time.perf_counter()
    for _ in range(args.steps):
        total = 0.0
        for entry, runner in zip(batch.entries, runners):
            vision = entry.observe().vision
            action = runner.act(vision, entry.time)
            if args.log:
                log_lines.append(_log_line(
                    {"kind": action.kind, "item_type": action.item_type}))
            _, reward = entry.step(action)
            total += reward
        mean_rewards.append(total / len(batch.entries))
    elapsed = time.perf_counter() - began

    if args.out:
        write_metrics_csv(args.out, mean_rewards, args.window,
                          start_time=start_time)
    if args.save:
        save_file(batch.entries[0].simulator, args.save)
    if args.log:
        log_lines.append(_log_line(
            {"digest": state_digest(batch.entries[0].simulator)}))
        Path(args.log).write_text("".join(log_lines), encoding="utf-8")

    rates = reward_rate(mean_rewards, args.window)
    print(f"steps: {args.steps}")
    print(f"total_reward: {sum(mean_rewards)!r}")
    print(f"final_reward_rate: {float(rates[-1])!r}")
    steps_done = args.steps * args.batch
    print(f"steps_per_second: {steps_done / elapsed:.1f}")
    return 0


# -- bench ----------------------------------------------------------------------


def _spiral(n: int):
    """First n cells of a counterclockwise square spiral from the origin."""
    coords = [(0, 0)]
    x = y = 0
    dx, dy = 1, 0
    run = 1
    while len(coords) < n:
        for _ in range(2):
            for _ in range(run):
                if len(coords) >= n:
                    return coords
                x += dx
                y += dy
                coords.append((x, y))
            dx, dy = -dy, dx
        run += 1
    return coords


def bench(config: WorldConfig, patches: int) -> dict:
    """Generate patches along a spiral; report throughput and item counts.

    The origin patch is generated untimed first so that one-time jit and
    table setup never lands in the measurement; the n timed patches are
    the next spiral cells.
    """
    world_map = WorldMap(config)
    rng = Pcg32(config.seed)
    coords = _spiral(patches + 1)
    world_map.generate_patch(coords[0], rng)

    counts = []
    began = time.perf_counter()
    for coord in coords[1:]:
        patch = world_map.generate_patch(coord, rng)
        counts.append(len(patch.items))
    elapsed = time.perf_counter() - began

    return {
        "patches": patches,
        "patch_size": config.patch_size,
        "mh_iterations": config.mh_iterations,
        "seconds": elapsed,
        "patches_per_second": patches / elapsed,
        "items_per_patch_mean": sum(counts) / len(counts),
        "items_per_patch_min": min(counts),
        "items_per_patch_max": max(counts),
    }


def cmd_bench(args) -> int:
    if args.patches < 1:
        raise CliError("--patches must be at least 1", 1)
    config = _load_config_arg(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    stats = bench(config, args.patches)
    for key, value in stats.items():
        if isinstance(value, float):
            print(f"{key}: {value:.4f}")
        else:
            print(f"{key}: {value}")
    return 0


# -- serve ----------------------------------------------------------------------


def cmd_serve(args) -> int:
    config = _load_config_arg(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    schedule = _build_schedule(args, config)
    simulator = load_file(args.load) if args.load else Simulator(config)

    try:
        server = SimServer(simulator, host=args.host, port=args.port,
                           ws_port=args.ws_port, schedule=schedule)
    except OSError as exc:
        raise CliError(f"cannot bind: {exc}", 3)

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())

    with server:
        print(f"listening on tcp://{args.host}:{server.port}", flush=True)
        if server.ws_port is not None:
            print(f"listening on ws://{args.host}:{server.ws_port}",
                  flush=True)
        print(f"world time {server.simulator.time}", flush=True)
        stop.wait()

    # the command thread is down; the simulator is ours again
    if args.save:
        server.simulator.discard_pending()
        save_file(server.simulator, args.save)
        print(f"saved {args.save}")
    return 0


# -- replay ---------------------------------------------------------------------


def cmd_replay(args) -> int:
    lines = Path(args.log).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CliError("empty action log", 3)
    header = json.loads(lines[0])
    if header.get("format") != LOG_FORMAT or header.get("v") != 1:
        raise CliError("not a recognized action log", 3)

    if args.load:
        simulator = load_file(args.load)
    elif "start" in header:
        from .persistence import load_state
        simulator = load_state(base64.b64decode(header["start"]))
    else:
        raise CliError("log has no embedded start state; pass --load", 1)

    agent_id = int(header["agent"])
    recorded: Optional[str] = None
    for line in lines[1:]:
        doc = json.loads(line)
        if "digest" in doc:
            recorded = doc["digest"]
            continue
        simulator.request_action(
            agent_id, Action(doc["kind"], doc.get("item_type")))

    digest = state_digest(simulator)
    print(digest)
    if recorded is not None and recorded != digest:
        print(f"digest mismatch: log recorded {recorded}", file=sys.stderr)
        return 3
    return 0


# -- argument plumbing ----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forageworld",
        description="Procedural foraging worlds: run, serve, benchmark, "
                    "replay.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_schedule=True):
        p.add_argument("--config", required=True,
                       help="config JSON path, or a built-in name "
                            "(woodland, meadow, radial, woodland_occlusion)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed")
        if with_schedule:
            p.add_argument("--reward", default=None,
                           help="reward expression text or file")
            p.add_argument("--schedule", default=None,
                           help="JSON schedule file (fixed/cyclical/"
                                "curriculum stages)")

    run = sub.add_parser("run", help="run a baseline agent and export "
                                     "metrics")
    common(run)
    run.add_argument("--agent", choices=("greedy", "random"),
                     default="greedy")
    run.add_argument("--steps", type=int, required=True)
    run.add_argument("--window", type=int, default=100000,
                     help="reward-rate window (default 100000)")
    run.add_argument("--out", default=None, help="metrics CSV path")
    run.add_argument("--save", default=None, help="final save file path")
    run.add_argument("--log", default=None,
                     help="write a replayable action log")
    run.add_argument("--batch", type=int, default=1,
                     help="independent environments on seeds seed+i")
    run.set_defaults(fn=cmd_run)

    ben = sub.add_parser("bench", help="measure patch generation "
                                       "throughput")
    common(ben, with_schedule=False)
    ben.add_argument("--patches", type=int, default=16)
    ben.set_defaults(fn=cmd_bench)

    srv = sub.add_parser("serve", help="host the world over TCP and "
                                       "web sockets")
    common(srv)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=9466)
    srv.add_argument("--ws-port", type=int, default=None)
    srv.add_argument("--load", default=None, help="resume from a save file")
    srv.add_argument("--save", default=None,
                     help="write a save file on shutdown")
    srv.set_defaults(fn=cmd_serve)

    rep = sub.add_parser("replay", help="re-apply an action log and print "
                                        "the final state digest")
    rep.add_argument("--log", required=True, help="action log from run "
                                                  "--log")
    rep.add_argument("--load", default=None,
                     help="initial save (overrides the log's embedded "
                          "start)")
    rep.set_defaults(fn=cmd_replay)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, RewardParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PersistenceError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
