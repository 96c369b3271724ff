import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, List, Optional, Tuple

import numpy as np
import torch

from ..algos.types import SegmentBatch
from ..goals.curriculum import SeenGoalTracker, tracker_update
from ..goals.goal_set import reward_term_vector
from ..utils.errors import NumericError

logger = logging.getLogger(__name__)

SEED_BOUND = 2 ** 31 - 1


@dataclass(frozen=True)
class LaneState:
    """
    One environment lane. `episode_step` and `episode_return` count from the last commanded
    episode start (full reset or pseudo-termination), the environment state keeps its own
    step counter since the last full reset.
    """

    env_state: Any
    commanded: int
    episode_step: int = 0
    episode_return: float = 0.0
    target: Any = None  # continuous goal behind `commanded`, when there is one


@dataclass(frozen=True)
class PolicyStep:
    actions: np.ndarray  # int64 [B] or float32 [B, action_dim]
    log_probs: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None


Policy = Callable[[np.ndarray, np.ndarray, np.random.Generator], PolicyStep]


def _fresh_lane(env, tracker: SeenGoalTracker, rng: np.random.Generator, autocurriculum: bool) -> LaneState:
    state = env.reset(int(rng.integers(SEED_BOUND)))
    commanded, target = env.command_goal(tracker, rng, autocurriculum)
    return LaneState(state, commanded, 0, 0.0, target)


def init_lanes(env, num_lanes: int, tracker: SeenGoalTracker, rng: np.random.Generator,
               autocurriculum: bool = True) -> List[LaneState]:
    return [_fresh_lane(env, tracker, rng, autocurriculum) for _ in range(num_lanes)]


def collect(
    env,
    lanes: List[LaneState],
    policy: Policy,
    num_steps: int,
    tracker: SeenGoalTracker,
    rng: np.random.Generator,
    autocurriculum: bool = True,
) -> Tuple[SegmentBatch, List[LaneState], SeenGoalTracker]:
    """
    Steps every lane `num_steps` times and assembles a time-major segment.

    Achieving the commanded goal ends the commanded episode in place ("first return, then
    explore"): a new goal is commanded and the environment state carries over. Reaching the
    time limit ends the episode with a full reset on a fresh world seed. Goals are commanded
    from `tracker` as it was on entry, the returned tracker folds in every achievement of the
    segment.
    """

    b_len, g_len = len(lanes), env.num_goals
    obs_buf, act_buf, cmd_buf, ach_buf, ep_done_buf, cmd_done_buf, next_buf = [], [], [], [], [], [], []
    logp_buf, value_buf = [], []

    obs = np.stack([env.observe(lane.env_state) for lane in lanes])
    for _ in range(num_steps):
        commanded = np.array([lane.commanded for lane in lanes], dtype=np.int64)
        out = policy(obs, commanded, rng)

        next_lanes, next_obs, boot_obs = [], [], []
        achieved = np.zeros((b_len, g_len), dtype=bool)
        episode_done = np.zeros(b_len, dtype=bool)
        commanded_done = np.zeros(b_len, dtype=bool)

        for b, lane in enumerate(lanes):
            state = env.step(lane.env_state, out.actions[b])
            achieved[b] = env.achieved(state)
            episode_done[b] = state.step_count >= env.t_max
            hit = bool(achieved[b, lane.commanded])
            commanded_done[b] = hit or episode_done[b]

            episode_return = lane.episode_return + float(hit)
            if episode_return > 1.0:
                raise NumericError(f"lane {b} collected a return of {episode_return} in one commanded episode")

            boot_obs.append(env.observe(state))
            if episode_done[b]:
                new_lane = _fresh_lane(env, tracker, rng, autocurriculum)
                next_obs.append(env.observe(new_lane.env_state))
            elif hit:
                goal, target = env.command_goal(tracker, rng, autocurriculum)
                new_lane = LaneState(state, goal, 0, 0.0, target)
                next_obs.append(boot_obs[-1])
            else:
                new_lane = replace(lane, env_state=state, episode_step=lane.episode_step + 1,
                                   episode_return=episode_return)
                next_obs.append(boot_obs[-1])
            next_lanes.append(new_lane)

        obs_buf.append(obs)
        act_buf.append(np.asarray(out.actions))
        cmd_buf.append(commanded)
        ach_buf.append(achieved)
        ep_done_buf.append(episode_done)
        cmd_done_buf.append(commanded_done)
        next_buf.append(np.stack(boot_obs))
        if out.log_probs is not None:
            logp_buf.append(np.asarray(out.log_probs, dtype=np.float32))
        if out.values is not None:
            value_buf.append(np.asarray(out.values, dtype=np.float32))

        lanes, obs = next_lanes, np.stack(next_obs)

    achieved = np.stack(ach_buf)
    episode_dones = np.stack(ep_done_buf)
    rv = reward_term_vector(achieved, episode_dones, g_len)

    segment = SegmentBatch(
        obs=torch.from_numpy(np.stack(obs_buf)),
        actions=torch.from_numpy(np.stack(act_buf)),
        commanded=torch.from_numpy(np.stack(cmd_buf)),
        achieved=torch.from_numpy(achieved),
        rewards=torch.from_numpy(rv.rewards),
        dones=torch.from_numpy(rv.dones),
        episode_dones=torch.from_numpy(episode_dones),
        commanded_done=torch.from_numpy(np.stack(cmd_done_buf)),
        next_obs=torch.from_numpy(np.stack(next_buf)),
        log_probs=torch.from_numpy(np.stack(logp_buf)) if len(logp_buf) == num_steps else None,
        values=torch.from_numpy(np.stack(value_buf)) if len(value_buf) == num_steps else None,
    )
    return segment, lanes, tracker_update(tracker, achieved)
