"""
The training loop: collect a segment on every lane, update the learner, evaluate and
checkpoint on step boundaries. Metrics go to `metrics.jsonl` (one record per evaluation,
deterministic in the configuration), wall-clock throughput to `timing.jsonl`, and the final
per-goal success to `summary.csv`.
"""
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from optimization import create_schedule
from .agents.base import Learner
from .agents.leo_dpg import LeoDpg
from .agents.ppo import DualLeoPpo, Ppo
from .agents.pqn import DualLeoPqn, Leo, UvfaPqn, UvfaPqnHer
from .configuration import RunConfig, save_run_config
from .envs import gridcraft, pointmaze
from .goals.curriculum import SeenGoalTracker
from .goals.goal_set import GoalSet, load_goal_set, save_goal_set, subsample_goals
from .rollout.collector import collect, init_lanes
from .rollout.evaluation import EvalReport, evaluate, evaluate_continuous
from .rollout.vec_env import GridcraftEnv, PointMazeEnv
from .utils.checkpoint import save_checkpoint
from .utils.errors import ConfigError

logger = logging.getLogger(__name__)

LEARNERS = {
    "uvfa_pqn": UvfaPqn,
    "uvfa_pqn_her": UvfaPqnHer,
    "leo": Leo,
    "dual_leo_pqn": DualLeoPqn,
    "ppo": Ppo,
    "dual_leo_ppo": DualLeoPpo,
    "leo_dpg": LeoDpg,
}

GRIDCRAFT_PRESETS = {"gridcraft_small": "small", "gridcraft_full": "full"}
EVAL_SEED_SALT = 7919


def build_goal_set(config: RunConfig) -> GoalSet:
    if config.env == "pointmaze":
        raise ConfigError("env: the point maze goal set is its quantization grid, built by the environment")
    goal_set = load_goal_set(config.goal_set_path) if config.goal_set_path else \
        gridcraft.build_goal_set(GRIDCRAFT_PRESETS[config.env])
    if config.goal_subsample is not None:
        sub = config.goal_subsample
        goal_set = subsample_goals(goal_set, sub.k, config.seed, sub.must_include)
    return goal_set


def build_env(config: RunConfig):
    if config.env == "pointmaze":
        if config.goal_subsample is not None or config.goal_set_path:
            raise ConfigError("goal_subsample: the point maze goal set cannot be subsampled or replaced")
        spec = pointmaze.load_maze(config.maze, t_max=config.t_max)
        return PointMazeEnv(spec, config.train.grid_spacing, config.train.eps_reach)
    return GridcraftEnv(build_goal_set(config), config.world_size, config.view_radius, config.t_max)


def build_learner(config: RunConfig, env) -> Learner:
    return LEARNERS[config.method](config, env)


@dataclass
class MetricsRecord:
    step: int
    mean_success: float
    per_goal_success: Dict[str, float]  # goals with a non-zero success rate only
    losses: Dict[str, float]
    seen_goals: int
    policies: Dict[str, float] = field(default_factory=dict)  # mean success of every eval policy
    continuous: Optional[Dict[str, float]] = None
    sps: Optional[float] = None

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if k != "sps" and v is not None}
        return json.dumps(d, sort_keys=True)


@dataclass
class TrainResult:
    learner: Learner
    records: List[MetricsRecord]
    tracker: SeenGoalTracker
    checkpoints: List[str]
    final_report: Optional[EvalReport] = None


def _eval_rng(config: RunConfig, step: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, EVAL_SEED_SALT, step])


def run_evaluation(config: RunConfig, env, learner: Learner, step: int):
    """Evaluates every greedy policy of the learner, the first one is reported as the run's success."""
    reports = {name: evaluate(policy, env, config.episodes_per_goal, _eval_rng(config, step))
               for name, policy in learner.eval_policies().items()}
    continuous = None
    if not env.discrete:
        policy = next(iter(learner.eval_policies().values()))
        continuous = evaluate_continuous(policy, env, config.episodes_per_goal * 4, _eval_rng(config, step)).to_dict()
    return reports, continuous


def _crossed(before: int, after: int, every: int) -> bool:
    return every > 0 and after // every > before // every


def train(config: RunConfig, show_progress: bool = True) -> TrainResult:
    os.makedirs(config.out_dir, exist_ok=True)
    save_run_config(config, os.path.join(config.out_dir, "config.json"))

    env = build_env(config)
    save_goal_set(env.goal_set, os.path.join(config.out_dir, "goals.json"))
    learner = build_learner(config, env)
    logger.info(f"training {config.method} on {config.env}: {env.num_goals} goals, {config.num_iterations} iterations "
                f"of {config.steps_per_iteration} steps")

    rng = np.random.default_rng(config.seed)
    tracker = SeenGoalTracker.empty(env.num_goals)
    lanes = init_lanes(env, config.train.num_envs, tracker, rng, config.autocurriculum)

    records, checkpoints = [], []
    final_report = None
    metrics_path = os.path.join(config.out_dir, "metrics.jsonl")
    timing_path = os.path.join(config.out_dir, "timing.jsonl")
    open(metrics_path, "w").close()
    open(timing_path, "w").close()

    def checkpoint(name: str, step: int):
        prefix = os.path.join(config.out_dir, "checkpoints", name)
        metadata = {"method": config.method, "env": config.env, "step": step, "goals": env.goal_set.names,
                    "config": config.to_dict()}
        manifest, _ = save_checkpoint(prefix, learner.nets(), metadata)
        checkpoints.append(manifest)

    bar = tqdm(range(config.num_iterations), desc=f"{config.method}", disable=not show_progress)
    step = 0
    for iteration in bar:
        learner.schedule = create_schedule(config.train, step, config.total_steps)

        start = time.perf_counter()
        segment, lanes, tracker = collect(env, lanes, learner.act, config.train.num_steps, tracker, rng,
                                          config.autocurriculum)
        losses = learner.update(segment, rng)
        elapsed = time.perf_counter() - start

        previous, step = step, step + config.steps_per_iteration
        sps = config.steps_per_iteration / max(elapsed, 1e-9)
        last = iteration == config.num_iterations - 1

        if _crossed(previous, step, config.eval_every) or last:
            reports, continuous = run_evaluation(config, env, learner, step)
            main = next(iter(reports.values()))
            final_report = main
            record = MetricsRecord(
                step=step,
                mean_success=main.mean_success,
                per_goal_success={n: float(s) for n, s in zip(main.names, main.per_goal_success) if s > 0.0},
                losses=losses,
                seen_goals=tracker.num_seen,
                policies={name: r.mean_success for name, r in reports.items()},
                continuous=continuous,
                sps=sps,
            )
            records.append(record)
            with open(metrics_path, "a") as f:
                f.write(record.to_json() + "\n")
            bar.set_postfix(sps=f"{sps:.0f}", success=f"{main.mean_success:.3f}")
            logger.info(f"step {step}: mean success {main.mean_success:.4f}, {tracker.num_seen} goals seen")

        with open(timing_path, "a") as f:
            f.write(json.dumps({"step": step, "sps": sps}) + "\n")

        if _crossed(previous, step, config.checkpoint_every):
            checkpoint(f"step_{step}", step)

    checkpoint("final", step)
    if final_report is not None:
        write_summary(final_report, os.path.join(config.out_dir, "summary.csv"))

    return TrainResult(learner, records, tracker, checkpoints, final_report)


def write_summary(report: EvalReport, path: str):
    with open(path, "w") as f:
        f.write("goal_id,name,success\n")
        for goal_id, name, success in zip(report.goal_ids, report.names, report.per_goal_success):
            f.write(f"{goal_id},{name},{float(success):.6f}\n")
