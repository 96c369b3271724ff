"""Steps-per-second measurement of the training loop, for the all-goals scaling comparison."""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np
import torch
import torch.utils.benchmark as benchmark

from ..agents.pqn import Leo, NaiveRelabelPqn, UvfaPqn
from ..configuration import RunConfig, TrainConfig
from ..envs.gridcraft import build_goal_set
from ..goals.curriculum import SeenGoalTracker
from ..goals.goal_set import subsample_goals
from ..rollout.collector import collect, init_lanes
from ..rollout.vec_env import GridcraftEnv

logger = logging.getLogger(__name__)

BENCH_METHODS = ("single_goal", "leo", "naive_relabel")


def time_call(fn: Callable[[], object], repeats: int = 5, warmup: int = 1) -> float:
    """Mean seconds per call of `fn` measured with the PyTorch benchmark timer."""
    for _ in range(warmup):
        fn()
    t = benchmark.Timer(stmt="fn()", globals={"fn": fn}, num_threads=torch.get_num_threads())
    return t.timeit(repeats).mean


@dataclass(frozen=True)
class BenchRow:
    goal_count: int
    method: str
    sps: float

    def to_csv(self) -> str:
        return f"{self.goal_count},{self.method},{self.sps:.1f}"


def make_workload(method: str, goal_count: int, num_envs: int = 16, num_steps: int = 8, hidden_size: int = 256,
                  minibatch_size: int = 128, update_only: bool = False, seed: int = 0) -> Callable[[], object]:
    """
    One training iteration (collect a segment, then update) of `method` on a gridcraft goal
    set of `goal_count` goals, or the update alone. Every method shares the network width,
    minibatch size, lanes and goal set.
    """

    learners = {"single_goal": UvfaPqn, "leo": Leo, "naive_relabel": NaiveRelabelPqn}
    if method not in learners:
        raise ValueError(f"Unknown bench method: {method} - choose from {BENCH_METHODS}")

    goal_set = subsample_goals(build_goal_set("extended"), goal_count, seed)
    env = GridcraftEnv(goal_set, world_size=9)
    train = TrainConfig(num_envs=num_envs, num_steps=num_steps, hidden_size=hidden_size, minibatch_size=minibatch_size)
    config = RunConfig(method="uvfa_pqn", env="gridcraft_full", train=train, seed=seed)
    learner = learners[method](config, env)

    rng = np.random.default_rng(seed)
    state = {"tracker": SeenGoalTracker.empty(len(goal_set))}
    state["lanes"] = init_lanes(env, num_envs, state["tracker"], rng)

    def collect_segment():
        segment, state["lanes"], state["tracker"] = collect(env, state["lanes"], learner.act, num_steps,
                                                            state["tracker"], rng)
        return segment

    if update_only:
        segment = collect_segment()
        return lambda: learner.update(segment, rng)
    return lambda: learner.update(collect_segment(), rng)


def bench_throughput(
    methods: Sequence[str] = BENCH_METHODS,
    goal_counts: Sequence[int] = (1, 4, 16, 64),
    repeats: int = 3,
    **workload_kwargs,
) -> List[BenchRow]:
    num_envs = workload_kwargs.get("num_envs", 16)
    num_steps = workload_kwargs.get("num_steps", 8)
    rows = []
    for goal_count in goal_counts:
        for method in methods:
            seconds = time_call(make_workload(method, goal_count, **workload_kwargs), repeats=repeats)
            rows.append(BenchRow(goal_count, method, num_envs * num_steps / seconds))
            logger.info(f"bench {method} |G|={goal_count}: {rows[-1].sps:.1f} steps/s")
    return rows


def rows_by_method(rows: Sequence[BenchRow]) -> Dict[str, Dict[int, float]]:
    out: Dict[str, Dict[int, float]] = {}
    for row in rows:
        out.setdefault(row.method, {})[row.goal_count] = row.sps
    return out
