import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .collector import SEED_BOUND, Policy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    per_goal_success: np.ndarray  # float64 [K], one row per evaluated goal
    mean_success: float
    episodes_per_goal: int
    goal_ids: Sequence[int] = ()
    names: Sequence[str] = ()

    def sorted_rows(self) -> List[tuple]:
        """`(goal_id, name, success)` rows, best first, ties in id order."""
        rows = list(zip(self.goal_ids, self.names, (float(x) for x in self.per_goal_success)))
        return sorted(rows, key=lambda row: (-row[2], row[0]))

    def to_table(self) -> str:
        width = max([len(n) for n in self.names] + [4])
        lines = [f"{'id':>4}  {'name':<{width}}  success", f"{'-' * 4}  {'-' * width}  {'-' * 7}"]
        lines += [f"{i:>4}  {n:<{width}}  {s:7.3f}" for i, n, s in self.sorted_rows()]
        lines.append(f"mean success {self.mean_success:.4f} over {len(self.goal_ids)} goals, "
                     f"{self.episodes_per_goal} episodes each")
        return "\n".join(lines)

    def to_dict(self) -> Dict:
        return {
            "mean_success": self.mean_success,
            "episodes_per_goal": self.episodes_per_goal,
            "per_goal_success": {n: float(s) for n, s in zip(self.names, self.per_goal_success)},
        }


def evaluate(
    policy: Policy,
    env,
    episodes_per_goal: int,
    rng: np.random.Generator,
    goal_ids: Optional[Sequence[int]] = None,
) -> EvalReport:
    """
    Runs `episodes_per_goal` full episodes per goal with that goal commanded throughout, all
    episodes batched as lanes. An episode succeeds when its goal holds at any step before the
    time limit, judged by `env.succeeded` (the continuous goal for the point maze). `policy`
    should act greedily; nothing here touches a tracker or parameters.
    """

    if episodes_per_goal < 1:
        raise ValueError(f"episodes_per_goal must be >= 1, got {episodes_per_goal}")

    goal_ids = list(range(env.num_goals)) if goal_ids is None else [int(g) for g in goal_ids]
    commanded = np.repeat(np.asarray(goal_ids, dtype=np.int64), episodes_per_goal)
    n = commanded.shape[0]

    states = [env.reset(int(rng.integers(SEED_BOUND))) for _ in range(n)]
    targets = [env.eval_target(int(g), rng) for g in commanded]
    success = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)

    for _ in range(env.t_max):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        obs = np.stack([env.observe(states[i]) for i in idx])
        actions = policy(obs, commanded[idx], rng).actions
        for k, i in enumerate(idx):
            states[i] = env.step(states[i], actions[k])
            if env.succeeded(states[i], int(commanded[i]), targets[i]):
                success[i] = True
                active[i] = False
            elif states[i].step_count >= env.t_max:
                active[i] = False

    per_goal = success.reshape(len(goal_ids), episodes_per_goal).mean(axis=1)
    names = [env.goal_set[g].name for g in goal_ids]
    report = EvalReport(per_goal, float(per_goal.mean()), episodes_per_goal, tuple(goal_ids), tuple(names))
    logger.info(f"evaluation: mean success {report.mean_success:.4f} over {len(goal_ids)} goals")
    return report


@dataclass(frozen=True)
class ContinuousEvalReport:
    """
    Point-maze episodes on uniformly drawn continuous goals. `violations` counts episodes that
    reached the commanded grid goal without ever reaching the continuous goal.
    """

    success: float
    quantized_success: float
    violations: int
    episodes: int

    def to_dict(self) -> Dict:
        return {"success": self.success, "quantized_success": self.quantized_success,
                "violations": self.violations, "episodes": self.episodes}


def evaluate_continuous(policy: Policy, env, episodes: int, rng: np.random.Generator) -> ContinuousEvalReport:
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")

    states = [env.reset(int(rng.integers(SEED_BOUND))) for _ in range(episodes)]
    commands = [env.command_goal(None, rng) for _ in range(episodes)]
    commanded = np.array([g for g, _ in commands], dtype=np.int64)
    success = np.zeros(episodes, dtype=bool)
    quantized = np.zeros(episodes, dtype=bool)

    for _ in range(env.t_max):
        obs = np.stack([env.observe(s) for s in states])
        actions = policy(obs, commanded, rng).actions
        for i in range(episodes):
            states[i] = env.step(states[i], actions[i])
            success[i] |= env.succeeded(states[i], int(commanded[i]), commands[i][1])
            quantized[i] |= bool(env.achieved(states[i])[commanded[i]])

    return ContinuousEvalReport(float(success.mean()), float(quantized.mean()),
                                int((quantized & ~success).sum()), episodes)
