from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..utils.errors import ShapeError


@dataclass(frozen=True)
class SegmentBatch:
    """
    `num_steps` time-contiguous transitions for each of `B` lanes, time-major (`[T, B, ...]`).

    `achieved`, `rewards` and `dones` describe the state entered by each transition, for every
    goal of the set, whatever the commanded goal was. `commanded_done` marks the end of a
    commanded episode (commanded goal achieved, or a full reset).
    """

    obs: torch.Tensor  # float32 [T, B, D]
    actions: torch.Tensor  # int64 [T, B] or float32 [T, B, action_dim]
    commanded: torch.Tensor  # int64 [T, B]
    achieved: torch.Tensor  # bool [T, B, G]
    rewards: torch.Tensor  # float32 [T, B, G]
    dones: torch.Tensor  # bool [T, B, G]
    episode_dones: torch.Tensor  # bool [T, B]
    commanded_done: torch.Tensor  # bool [T, B]
    next_obs: torch.Tensor  # float32 [T, B, D]
    log_probs: Optional[torch.Tensor] = None  # [T, B], stochastic policies only
    values: Optional[torch.Tensor] = None  # [T, B]

    def __post_init__(self):
        t, b = self.obs.shape[:2]
        for name in ("actions", "commanded", "achieved", "rewards", "dones", "episode_dones", "commanded_done", "next_obs"):
            if tuple(getattr(self, name).shape[:2]) != (t, b):
                raise ShapeError(f"segment field '{name}' has leading shape {tuple(getattr(self, name).shape[:2])}, "
                                 f"expected {(t, b)}")
        if self.rewards.shape != self.dones.shape or self.rewards.shape != self.achieved.shape:
            raise ShapeError("rewards, dones and achieved must share the shape [T, B, G]")

    @property
    def num_steps(self) -> int:
        return self.obs.shape[0]

    @property
    def num_lanes(self) -> int:
        return self.obs.shape[1]

    @property
    def num_goals(self) -> int:
        return self.rewards.shape[-1]

    @property
    def bootstrap_obs(self) -> torch.Tensor:
        return self.next_obs[-1]

    def commanded_rewards(self) -> torch.Tensor:
        return self.rewards.gather(-1, self.commanded.unsqueeze(-1)).squeeze(-1)

    def commanded_dones(self) -> torch.Tensor:
        return self.dones.gather(-1, self.commanded.unsqueeze(-1)).squeeze(-1)

    def flat(self, name: str) -> torch.Tensor:
        x = getattr(self, name)
        return x.reshape(self.num_steps * self.num_lanes, *x.shape[2:])


@dataclass(frozen=True)
class RelabelBatch:
    """
    Synthesized (transition, goal) pairs. Entry `k` reuses transition `(time[k], lane[k])` of a
    segment under goal `goals[k]` with reward and done re-derived from the stored achievement mask.

    With `trajectory=True` the entries form whole columns: `K = T * C`, laid out time-major so
    that `reshape(T, C)` gives `C` sub-trajectories, each relabelled with one goal.
    """

    time: np.ndarray  # int64 [K]
    lane: np.ndarray  # int64 [K]
    goals: np.ndarray  # int64 [K]
    rewards: np.ndarray  # float32 [K]
    dones: np.ndarray  # bool [K]
    trajectory: bool = False

    def __len__(self) -> int:
        return self.time.shape[0]

    @classmethod
    def empty(cls, trajectory: bool = False) -> "RelabelBatch":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), np.zeros(0, dtype=np.float32), np.zeros(0, dtype=bool), trajectory)


def one_hot_goals(goals: torch.Tensor, num_goals: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    out = torch.zeros(goals.shape[0], num_goals, dtype=dtype)
    out[torch.arange(goals.shape[0]), goals.long()] = 1.0
    return out


def uvfa_input(obs: torch.Tensor, goals: torch.Tensor, num_goals: int) -> torch.Tensor:
    """Early fusion: the observation concatenated with the one-hot commanded goal."""
    obs = torch.as_tensor(obs)
    goals = torch.as_tensor(goals).reshape(-1)
    if obs.shape[0] != goals.shape[0]:
        raise ShapeError(f"{obs.shape[0]} observations for {goals.shape[0]} goals")
    return torch.cat([obs, one_hot_goals(goals, num_goals, obs.dtype)], dim=-1)
