import logging
from dataclasses import dataclass
from typing import List

import numpy as np
import torch

from .pqn import q_lambda_targets
from .types import RelabelBatch, SegmentBatch, uvfa_input
from ..model.mlp import mlp_apply
from ..utils.errors import ConfigError

logger = logging.getLogger(__name__)

PER_TRANSITION = "per_transition"
PER_TRAJECTORY = "per_trajectory"


@dataclass(frozen=True)
class HerStrategy:
    """
    Hindsight relabelling strategy: `n` extra transitions relabelled with uniformly random goals
    and `m` with goals achieved at the anchor timestep.

        none          n = m = 0
        random(n)     m = 0
        positive(m)   n = 0
        mixed(n, m)
    """

    n: int = 0
    m: int = 0

    @classmethod
    def from_config(cls, name: str, n: int = 1, m: int = 1) -> "HerStrategy":
        if name == "none":
            return cls(0, 0)
        if name == "random":
            return cls(n, 0)
        if name == "positive":
            return cls(0, m)
        if name == "mixed":
            return cls(n, m)
        raise ConfigError(f"her_strategy: unknown strategy {name!r}")

    @property
    def is_none(self) -> bool:
        return self.n == 0 and self.m == 0


def _entries(segment: SegmentBatch, time: np.ndarray, lane: np.ndarray, goals: np.ndarray, trajectory: bool) -> RelabelBatch:
    achieved = segment.achieved.numpy()
    episode_dones = segment.episode_dones.numpy()
    hit = achieved[time, lane, goals]
    return RelabelBatch(
        time.astype(np.int64),
        lane.astype(np.int64),
        goals.astype(np.int64),
        hit.astype(np.float32),
        hit | episode_dones[time, lane],
        trajectory,
    )


def her_relabel(segment: SegmentBatch, strategy: HerStrategy, level: str, rng: np.random.Generator) -> RelabelBatch:
    """
    Synthesizes relabelled transitions from a segment. Rewards and dones are re-derived from the
    stored achievement mask of the relabel goal, never copied from the commanded channel.

    `per_transition` draws fresh goals for every transition, positives among the goals achieved
    by that transition. `per_trajectory` draws the goals once per lane, positives among the
    goals achieved by the final transition, and relabels the whole sub-trajectory with them.
    A positive slot with nothing achieved at its anchor is skipped. At most
    `(n + m) * T * B` entries are produced.
    """

    if level not in (PER_TRANSITION, PER_TRAJECTORY):
        raise ConfigError(f"her_level: unknown level {level!r}")
    if strategy.is_none:
        return RelabelBatch.empty(trajectory=level == PER_TRAJECTORY)

    t_len, b_len, g_len = segment.num_steps, segment.num_lanes, segment.num_goals
    achieved = segment.achieved.numpy()

    if level == PER_TRANSITION:
        time, lane, goals = [], [], []
        for t in range(t_len):
            for b in range(b_len):
                if strategy.n:
                    time += [t] * strategy.n
                    lane += [b] * strategy.n
                    goals += list(rng.integers(g_len, size=strategy.n))
                positives = np.flatnonzero(achieved[t, b])
                if strategy.m and positives.size:
                    time += [t] * strategy.m
                    lane += [b] * strategy.m
                    goals += list(positives[rng.integers(positives.size, size=strategy.m)])
        if not time:
            return RelabelBatch.empty()
        return _entries(segment, np.asarray(time), np.asarray(lane), np.asarray(goals), trajectory=False)

    # per trajectory: one column per (lane, relabel goal), entries time-major
    columns_lane: List[int] = []
    columns_goal: List[int] = []
    for b in range(b_len):
        for g in rng.integers(g_len, size=strategy.n):
            columns_lane.append(b)
            columns_goal.append(int(g))
        positives = np.flatnonzero(achieved[-1, b])
        if strategy.m and positives.size:
            for g in positives[rng.integers(positives.size, size=strategy.m)]:
                columns_lane.append(b)
                columns_goal.append(int(g))

    if not columns_lane:
        return RelabelBatch.empty(trajectory=True)

    c = len(columns_lane)
    time = np.repeat(np.arange(t_len), c)
    lane = np.tile(np.asarray(columns_lane), t_len)
    goals = np.tile(np.asarray(columns_goal), t_len)
    return _entries(segment, time, lane, goals, trajectory=True)


def naive_all_goals_relabel(segment: SegmentBatch, goal_set=None) -> RelabelBatch:
    """
    The full cross product of transitions and goals, `G * T * B` entries, as whole sub-trajectories:
    column `b * G + g` is lane `b` relabelled with goal `g`.
    """

    g_len = segment.num_goals if goal_set is None else goal_set if isinstance(goal_set, int) else len(goal_set)
    if g_len != segment.num_goals:
        raise ConfigError(f"goal set has {g_len} goals, segment carries {segment.num_goals}")

    t_len, b_len = segment.num_steps, segment.num_lanes
    c = b_len * g_len
    time = np.repeat(np.arange(t_len), c)
    lane = np.tile(np.repeat(np.arange(b_len), g_len), t_len)
    goals = np.tile(np.arange(g_len), t_len * b_len)
    return _entries(segment, time, lane, goals, trajectory=True)


def relabel_q_targets(segment: SegmentBatch, relabel: RelabelBatch, params, cfg) -> torch.Tensor:
    """
    UVFA targets `[K]` for relabelled entries: Q(lambda) along each column of a trajectory-level
    batch, 1-step targets for per-transition entries.
    """

    if len(relabel) == 0:
        return torch.zeros(0)

    time, lane = torch.from_numpy(relabel.time), torch.from_numpy(relabel.lane)
    goals = torch.from_numpy(relabel.goals)
    inputs = uvfa_input(segment.next_obs[time, lane], goals, segment.num_goals)
    next_q = mlp_apply(params, inputs)[:, 0, :].max(dim=-1).values

    rewards = torch.from_numpy(relabel.rewards).to(next_q.dtype)
    dones = torch.from_numpy(relabel.dones)

    if relabel.trajectory:
        t = segment.num_steps
        targets = q_lambda_targets(rewards.reshape(t, -1), dones.reshape(t, -1), next_q.reshape(t, -1),
                                   cfg.gamma, cfg.lambda_q)
        return targets.reshape(-1)

    return rewards + cfg.gamma * (1.0 - dones.to(next_q.dtype)) * next_q
