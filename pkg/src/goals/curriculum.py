from dataclasses import dataclass

import numpy as np

from .goal_set import GoalSet
from ..utils.errors import GoalError

FALLBACK_GOAL = 0


@dataclass(frozen=True)
class SeenGoalTracker:
    """Which goals were achieved at least once so far, with achievement counts."""

    seen: np.ndarray  # bool [G]
    counts: np.ndarray  # int64 [G]

    @classmethod
    def empty(cls, num_goals: int) -> "SeenGoalTracker":
        return cls(np.zeros(num_goals, dtype=bool), np.zeros(num_goals, dtype=np.int64))

    def __len__(self) -> int:
        return self.seen.shape[0]

    @property
    def num_seen(self) -> int:
        return int(self.seen.sum())


def tracker_update(tracker: SeenGoalTracker, achieved_batch: np.ndarray) -> SeenGoalTracker:
    achieved = np.asarray(achieved_batch, dtype=bool).reshape(-1, len(tracker))
    if achieved.shape[0] == 0:
        return tracker
    counts = tracker.counts + achieved.sum(axis=0)
    return SeenGoalTracker(tracker.seen | achieved.any(axis=0), counts)


def sample_command_goal(
    tracker: SeenGoalTracker,
    goal_set: GoalSet,
    rng: np.random.Generator,
    fallback: int = FALLBACK_GOAL,
    autocurriculum: bool = True,
) -> int:
    """
    Uniform over previously achieved goals, `fallback` while nothing has been achieved.
    With `autocurriculum=False` the draw is uniform over the whole set.
    """

    if len(tracker) != len(goal_set):
        raise GoalError(f"tracker covers {len(tracker)} goals, goal set has {len(goal_set)}")

    if not autocurriculum:
        return int(rng.integers(len(goal_set)))

    candidates = np.flatnonzero(tracker.seen)
    if candidates.size == 0:
        return fallback
    return int(candidates[rng.integers(candidates.size)])
