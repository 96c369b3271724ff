import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import GoalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Goal:
    id: int
    name: str
    category: str
    predicate: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)


@dataclass(frozen=True)
class GoalSet:
    """
    Finite, ordered goal universe. Ids are dense in `0..len-1` and follow list order.
    The predicate parameters are interpreted by the environment the set is compiled against.
    """

    goals: Tuple[Goal, ...]

    def __post_init__(self):
        goals = tuple(self.goals)
        object.__setattr__(self, "goals", goals)
        names = [g.name for g in goals]
        if len(set(names)) != len(names):
            raise GoalError("goal names must be unique")
        for i, g in enumerate(goals):
            if g.id != i:
                raise GoalError(f"goal ids must be dense and ordered, got id {g.id} at position {i}")
        object.__setattr__(self, "_index", {g.name: g.id for g in goals})

    @classmethod
    def from_specs(cls, specs: Sequence[Dict[str, Any]]) -> "GoalSet":
        return cls(tuple(Goal(i, s["name"], s.get("category", s["name"].split("/")[0]), dict(s.get("predicate", {})))
                         for i, s in enumerate(specs)))

    def __len__(self) -> int:
        return len(self.goals)

    def __iter__(self) -> Iterator[Goal]:
        return iter(self.goals)

    def __getitem__(self, goal_id: int) -> Goal:
        if not 0 <= goal_id < len(self.goals):
            raise GoalError(f"unknown goal id {goal_id} (goal set has {len(self.goals)} goals)")
        return self.goals[goal_id]

    @property
    def size(self) -> int:
        return len(self.goals)

    @property
    def names(self) -> List[str]:
        return [g.name for g in self.goals]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GoalError(f"unknown goal name {name!r}") from None

    def to_specs(self) -> List[Dict[str, Any]]:
        return [{"name": g.name, "category": g.category, "predicate": dict(g.predicate)} for g in self.goals]

    def to_table(self) -> str:
        width = max([len(g.name) for g in self.goals] + [4])
        lines = [f"{'id':>4}  {'name':<{width}}  category", f"{'-' * 4}  {'-' * width}  {'-' * 8}"]
        lines += [f"{g.id:>4}  {g.name:<{width}}  {g.category}" for g in self.goals]
        return "\n".join(lines)


def load_goal_set(path: str) -> GoalSet:
    with open(path, "r") as f:
        data = json.load(f)
    specs = data["goals"] if isinstance(data, dict) else data
    return GoalSet.from_specs(specs)


def save_goal_set(goal_set: GoalSet, path: str):
    with open(path, "w") as f:
        json.dump({"goals": goal_set.to_specs()}, f, indent=2)


def subsample_goals(goal_set: GoalSet, k: int, seed: int, must_include: Sequence[str] = ()) -> GoalSet:
    """
    Uniform sample of `k` goals without replacement, forced to contain `must_include`.
    The kept goals stay in their original relative order and get re-densified ids.
    """

    must_include = list(dict.fromkeys(must_include))
    if not 0 <= k <= len(goal_set):
        raise GoalError(f"cannot subsample {k} goals from a set of {len(goal_set)}")
    if len(must_include) > k:
        raise GoalError(f"{len(must_include)} forced goals do not fit in a subsample of {k}")

    forced = [goal_set.index(name) for name in must_include]
    pool = np.array([g.id for g in goal_set if g.id not in set(forced)], dtype=np.int64)

    rng = np.random.default_rng(seed)
    drawn = rng.choice(pool, size=k - len(forced), replace=False) if k > len(forced) else np.array([], np.int64)

    keep = sorted(set(forced) | set(int(x) for x in drawn))
    return GoalSet.from_specs([goal_set.to_specs()[i] for i in keep])


@dataclass(frozen=True)
class RewardTermVector:
    rewards: np.ndarray  # float32 [..., G], entries in {0, 1}
    dones: np.ndarray  # bool [..., G]


def reward_term_vector(achieved_now: np.ndarray, episode_done, num_goals: Optional[int] = None) -> RewardTermVector:
    """
    Binary reward per goal on entering a state, and the per-goal termination flags.
    Works on a single mask `[G]` or a batch `[B, G]` with `episode_done` of shape `[B]`.
    """

    achieved_now = np.asarray(achieved_now, dtype=bool)
    if num_goals is not None and achieved_now.shape[-1] != num_goals:
        raise GoalError(f"achievement mask has length {achieved_now.shape[-1]}, goal set has {num_goals} goals")

    episode_done = np.asarray(episode_done, dtype=bool)
    rewards = achieved_now.astype(np.float32)
    dones = achieved_now | episode_done[..., None]

    return RewardTermVector(rewards, dones)
