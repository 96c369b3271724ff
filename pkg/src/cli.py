import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import torch

from .algos.gradcheck_suite import LOSSES, METHOD_LOSSES, THRESHOLD, run_gradcheck
from .configuration import METHODS, RunConfig, apply_overrides, load_run_config
from .envs import gridcraft, pointmaze
from .goals.goal_set import save_goal_set
from .goals.quantization import QuantGrid
from .rollout.evaluation import evaluate
from .trainer import build_env, build_learner, train
from .utils.checkpoint import load_checkpoint
from .utils.errors import AgrlError, ConfigError, NumericError, OutputError
from .utils.throughput import BENCH_METHODS, bench_throughput

logger = logging.getLogger(__name__)

THREADS_ENV = "AGRL_THREADS"


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def cmd_train(args: argparse.Namespace) -> int:
    overrides = list(args.set)
    if args.out_dir:
        overrides.append(f"out_dir={args.out_dir}")
    config = load_run_config(args.config, overrides)
    logger.info(f"run configuration:\n{config.to_json()}")

    result = train(config, show_progress=not args.no_progress)
    if result.final_report is not None:
        print(f"final mean success {result.final_report.mean_success:.4f} "
              f"({result.tracker.num_seen}/{len(result.tracker)} goals seen), outputs in {config.out_dir}")
    return 0


def _eval_config(args: argparse.Namespace, metadata) -> RunConfig:
    if args.config:
        config = load_run_config(args.config, args.set)
    else:
        if "config" not in metadata:
            raise ConfigError("checkpoint carries no run configuration, pass --config")
        config = RunConfig.from_dict(apply_overrides(dict(metadata["config"]), args.set))

    for key in ("method", "env"):
        if key in metadata and metadata[key] != getattr(config, key):
            raise ConfigError(f"{key}: checkpoint was trained with {metadata[key]!r}, "
                              f"configuration says {getattr(config, key)!r}")
    return config


def cmd_eval(args: argparse.Namespace) -> int:
    nets, metadata = load_checkpoint(args.checkpoint)
    config = _eval_config(args, metadata)

    env = build_env(config)
    learner = build_learner(config, env)
    learner.load_nets(nets)

    policies = learner.eval_policies()
    name = args.policy or next(iter(policies))
    if name not in policies:
        raise ConfigError(f"policy: {config.method} evaluates {sorted(policies)}, got {name!r}")

    goal_ids = [env.goal_set.index(args.goal)] if args.goal else None
    episodes = args.episodes or config.episodes_per_goal
    report = evaluate(policies[name], env, episodes, np.random.default_rng(args.seed), goal_ids)

    print(report.to_table())
    payload = {"checkpoint": args.checkpoint, "policy": name, **report.to_dict()}
    if args.out:
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2)
        logger.info(f"evaluation report written to {args.out}")
    else:
        print(json.dumps(payload, indent=2))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.threads_per_method:
        torch.set_num_threads(args.threads_per_method)

    rows = bench_throughput(args.methods, args.goal_counts, repeats=args.repeats, num_envs=args.num_envs,
                            num_steps=args.steps, hidden_size=args.width, minibatch_size=args.minibatch_size,
                            update_only=args.update_only, seed=args.seed)
    lines = ["goal_count,method,sps"] + [row.to_csv() for row in rows]
    print("\n".join(lines))
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("\n".join(lines) + "\n")
        logger.info(f"throughput table written to {args.csv}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    names = args.loss or (METHOD_LOSSES[args.method] if args.method else None)
    errors = run_gradcheck(args.seed, names)

    width = max(len(n) for n in errors)
    for name, err in errors.items():
        print(f"{name:<{width}}  {err:.3e}  {'ok' if err <= THRESHOLD else 'FAIL'}")

    failed = [name for name, err in errors.items() if err > THRESHOLD]
    if failed:
        logger.error(f"finite-difference check above {THRESHOLD:g} for: {', '.join(failed)}")
        return NumericError.exit_code
    return 0


def cmd_list_goals(args: argparse.Namespace) -> int:
    if args.config:
        goal_set = build_env(load_run_config(args.config, args.set)).goal_set
    elif args.env == "pointmaze":
        goal_set = QuantGrid.from_maze(pointmaze.load_maze(args.maze), args.grid_spacing,
                                       strict=args.strict_grid).goal_set()
    else:
        goal_set = gridcraft.build_goal_set(args.preset or {"gridcraft_small": "small"}.get(args.env, "full"))

    print(goal_set.to_table())
    if args.json:
        save_goal_set(goal_set, args.json)
        logger.info(f"{len(goal_set)} goals written to {args.json}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="agrl", description="All-goals reinforcement learning toolkit")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_train = sub.add_parser("train", help="Train a learner from a run configuration")
    p_train.add_argument("--config", default=None, help="JSON or YAML run configuration")
    p_train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="Dotted override, e.g. train.alpha=0.5 (repeatable)")
    p_train.add_argument("--out-dir", default=None, help="Overrides out_dir")
    p_train.add_argument("--no-progress", action="store_true", help="Disable the progress bar")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="Evaluate a checkpoint on every goal")
    p_eval.add_argument("--checkpoint", required=True, help="Checkpoint prefix, or its .json/.bin file")
    p_eval.add_argument("--config", default=None, help="Run configuration (defaults to the checkpoint's)")
    p_eval.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_eval.add_argument("--goal", default=None, help="Evaluate a single goal by name")
    p_eval.add_argument("--episodes", type=int, default=None, help="Episodes per goal")
    p_eval.add_argument("--policy", default=None, help="Eval policy of the learner (e.g. mixed, leo, uvfa)")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default=None, help="Write the JSON report here instead of stdout")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="Training throughput against the number of goals")
    p_bench.add_argument("--methods", nargs="+", default=list(BENCH_METHODS), choices=list(BENCH_METHODS))
    p_bench.add_argument("--goal-counts", nargs="+", type=int, default=[1, 4, 16, 64])
    p_bench.add_argument("--steps", type=int, default=8, help="Segment length")
    p_bench.add_argument("--num-envs", type=int, default=16)
    p_bench.add_argument("--width", type=int, default=256, help="Hidden layer width shared by every method")
    p_bench.add_argument("--minibatch-size", type=int, default=128)
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--update-only", action="store_true", help="Time the update alone, no environment steps")
    p_bench.add_argument("--threads-per-method", type=int, default=0)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--csv", default=None, help="Also write the table to this file")
    p_bench.set_defaults(func=cmd_bench)

    p_grad = sub.add_parser("gradcheck", help="Finite-difference check of every analytic gradient")
    p_grad.add_argument("--method", default=None, choices=list(METHODS), help="Only the losses of one method")
    p_grad.add_argument("--loss", action="append", default=None, choices=sorted(LOSSES))
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_goals = sub.add_parser("list-goals", help="Print a goal set")
    p_goals.add_argument("--env", default="gridcraft_full", choices=["gridcraft_small", "gridcraft_full", "pointmaze"])
    p_goals.add_argument("--preset", default=None, choices=["small", "full", "extended"])
    p_goals.add_argument("--maze", default="umaze")
    p_goals.add_argument("--grid-spacing", type=float, default=0.5)
    p_goals.add_argument("--strict-grid", action="store_true", help="Fail instead of warning on a misaligned grid")
    p_goals.add_argument("--config", default=None, help="List the goal set of a run configuration")
    p_goals.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_goals.add_argument("--json", default=None, help="Also save the goal set definition here")
    p_goals.set_defaults(func=cmd_list_goals)

    return parser


def _configure_threads():
    threads = os.environ.get(THREADS_ENV)
    if threads is None:
        return
    try:
        torch.set_num_threads(max(1, int(threads)))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}") from None


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s - %(levelname)s - %(message)s')
    try:
        _configure_threads()
        return args.func(args)
    except AgrlError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return OutputError.exit_code
