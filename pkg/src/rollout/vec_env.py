"""
Environment adapters driven by the collector and the evaluator. Both wrap pure environment
functions behind one interface: `reset(seed)`, `step(state, action)`, `observe(state)`,
`achieved(state)` and `command_goal(tracker, rng, autocurriculum)`.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from ..envs import gridcraft, pointmaze
from ..goals.curriculum import SeenGoalTracker, sample_command_goal
from ..goals.goal_set import GoalSet
from ..goals.quantization import QuantGrid, achieved_grid_goals, quantization_adequacy, quantize_goal

logger = logging.getLogger(__name__)


class GridcraftEnv:
    discrete = True

    def __init__(self, goal_set: GoalSet, world_size: int = 9, view_radius: int = gridcraft.DEFAULT_VIEW_RADIUS,
                 t_max: int = gridcraft.DEFAULT_T_MAX):
        self.goal_set = goal_set
        self.goals = gridcraft.GridcraftGoals(goal_set)
        self.world_size = world_size
        self.view_radius = view_radius
        self.t_max = t_max

    @property
    def num_goals(self) -> int:
        return len(self.goal_set)

    @property
    def obs_dim(self) -> int:
        return gridcraft.observation_size(self.view_radius)

    @property
    def num_actions(self) -> int:
        return gridcraft.NUM_ACTIONS

    def reset(self, seed: int) -> gridcraft.WorldState:
        return gridcraft.generate_world(seed, self.world_size)

    def step(self, state: gridcraft.WorldState, action) -> gridcraft.WorldState:
        return gridcraft.step(state, int(action))

    def observe(self, state: gridcraft.WorldState) -> np.ndarray:
        return gridcraft.observe(state, self.view_radius)

    def achieved(self, state: gridcraft.WorldState) -> np.ndarray:
        return self.goals.achieved(state)

    def command_goal(self, tracker: SeenGoalTracker, rng: np.random.Generator,
                     autocurriculum: bool = True) -> Tuple[int, None]:
        return sample_command_goal(tracker, self.goal_set, rng, autocurriculum=autocurriculum), None

    def eval_target(self, goal: int, rng: np.random.Generator) -> None:
        return None

    def succeeded(self, state, goal: int, target) -> bool:
        return bool(self.goals.is_achieved(state, goal))


class PointMazeEnv:
    """
    Point-mass maze with the quantized goal set of a `QuantGrid`. Training lanes draw a
    continuous goal uniformly over free space and command its grid cell; grid goals are
    achieved within `eps_reach` of their center.
    """

    discrete = False

    def __init__(self, spec: pointmaze.MazeSpec, grid_spacing: float = 0.5, eps_reach: float = 0.1,
                 t_max: Optional[int] = None):
        self.spec = spec
        self.grid = QuantGrid.from_maze(spec, grid_spacing)
        self.goal_set = self.grid.goal_set()
        self.eps_reach = eps_reach
        self.t_max = spec.t_max if t_max is None else t_max
        if not quantization_adequacy(self.grid, spec.success_eps, eps_reach):
            logger.warning(f"grid spacing {grid_spacing} with eps_reach {eps_reach} does not guarantee "
                           f"continuous success within {spec.success_eps} when a grid goal is reached")

    @property
    def num_goals(self) -> int:
        return len(self.goal_set)

    @property
    def obs_dim(self) -> int:
        return pointmaze.OBS_DIM

    @property
    def action_dim(self) -> int:
        return pointmaze.ACTION_DIM

    def reset(self, seed: int) -> pointmaze.PointState:
        return pointmaze.reset(self.spec, seed)[0]

    def step(self, state: pointmaze.PointState, action) -> pointmaze.PointState:
        return pointmaze.step(self.spec, state, action)

    def observe(self, state: pointmaze.PointState) -> np.ndarray:
        return pointmaze.observe(self.spec, state)

    def achieved(self, state: pointmaze.PointState) -> np.ndarray:
        return achieved_grid_goals(state.pos, self.grid, self.eps_reach)

    def sample_goal(self, rng: np.random.Generator) -> pointmaze.ContGoal:
        return pointmaze.ContGoal(pointmaze.sample_free_point(self.spec, rng))

    def command_goal(self, tracker: SeenGoalTracker, rng: np.random.Generator,
                     autocurriculum: bool = True) -> Tuple[int, pointmaze.ContGoal]:
        goal = self.sample_goal(rng)
        return quantize_goal(goal, self.grid), goal

    def eval_target(self, goal: int, rng: np.random.Generator) -> pointmaze.ContGoal:
        return pointmaze.ContGoal(self.grid.centers[goal].copy())

    def succeeded(self, state, goal: int, target: pointmaze.ContGoal) -> bool:
        return pointmaze.success(state, target, self.spec.success_eps)
