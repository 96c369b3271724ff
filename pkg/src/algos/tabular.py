"""
Tabular all-goals Q-learning on a tiny fixed gridcraft world, and the per-goal learners it must
match. Every episode restarts the same world, states are enumerated lazily as they are visited.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Hashable, List, Tuple

import numpy as np

from ..envs import gridcraft
from ..envs.gridcraft import GridcraftGoals, WorldState
from ..goals.goal_set import GoalSet
from ..utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ExperienceStream:
    """Every transition of a tabular run, in update order."""

    states: List[int]
    actions: List[int]
    next_states: List[int]
    achieved: List[np.ndarray]  # bool [G] at the next state
    episode_dones: List[bool]

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class TabularResult:
    q: np.ndarray  # float64 [S, G, A]
    stream: ExperienceStream
    num_states: int


class StateIndex:
    """Dense ids for visited world states, bounded by `max_states`."""

    def __init__(self, max_states: int):
        self.max_states = max_states
        self._ids: Dict[Hashable, int] = {}

    def __len__(self) -> int:
        return len(self._ids)

    @staticmethod
    def key(state: WorldState) -> Hashable:
        return (state.grid.tobytes(), state.agent_pos, int(state.agent_facing), state.inventory, state.tools)

    def __call__(self, state: WorldState) -> int:
        key = self.key(state)
        idx = self._ids.get(key)
        if idx is None:
            if len(self._ids) >= self.max_states:
                raise ConfigError(f"tabular state space exceeds max_states={self.max_states}, "
                                  f"use a smaller world or fewer steps per episode")
            idx = self._ids[key] = len(self._ids)
        return idx


class _GrowingTable:
    """Q-table over lazily enumerated states, zero-initialized."""

    def __init__(self, shape_tail: Tuple[int, ...], max_states: int):
        self.q = np.zeros((min(max_states, 64),) + shape_tail, dtype=np.float64)
        self.max_states = max_states

    def ensure(self, idx: int):
        if idx >= self.q.shape[0]:
            grown = np.zeros((min(self.max_states, 2 * self.q.shape[0] + idx),) + self.q.shape[1:], dtype=np.float64)
            grown[:self.q.shape[0]] = self.q
            self.q = grown


def _epsilon_greedy(q_row: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return int(rng.integers(q_row.shape[0]))
    return int(np.argmax(q_row))


def tabular_leo_q_learn(
    world: WorldState,
    goal_set: GoalSet,
    episodes: int,
    gamma: float,
    lr: float,
    eps: float,
    seed: int = 0,
    t_max: int = 50,
    max_states: int = 200_000,
) -> TabularResult:
    """
    All-goals tabular Q-learning. Episode `e` restarts from `world` and commands goal `e mod G`,
    acting epsilon-greedily on that goal's slice. Every transition updates every goal slice:

        Q[s, :, a] += lr * (r + gamma * (1 - d) * max_a' Q[s', :, a'] - Q[s, :, a])

    with `r`, `d` the per-goal reward and done vectors of the entered state.
    """

    goals = GridcraftGoals(goal_set)
    g_len, a_len = len(goal_set), gridcraft.NUM_ACTIONS
    index = StateIndex(max_states)
    table = _GrowingTable((g_len, a_len), max_states)
    stream = ExperienceStream([], [], [], [], [])
    rng = np.random.default_rng(seed)

    for episode in range(episodes):
        commanded = episode % g_len
        state = world
        s = index(state)
        table.ensure(s)

        for t in range(t_max):
            a = _epsilon_greedy(table.q[s, commanded], eps, rng)
            next_state = gridcraft.step(state, a)
            s2 = index(next_state)
            table.ensure(s2)

            achieved = goals.achieved(next_state)
            episode_done = t == t_max - 1
            r = achieved.astype(np.float64)
            d = (achieved | episode_done).astype(np.float64)

            q = table.q
            q[s, :, a] = q[s, :, a] + lr * (r + gamma * (1.0 - d) * q[s2].max(axis=-1) - q[s, :, a])

            stream.states.append(s)
            stream.actions.append(a)
            stream.next_states.append(s2)
            stream.achieved.append(achieved)
            stream.episode_dones.append(episode_done)

            state, s = next_state, s2

    logger.info(f"tabular all-goals learning: {len(stream)} transitions, {len(index)} states, {g_len} goals")
    return TabularResult(table.q[:len(index)].copy(), stream, len(index))


def per_goal_q_learn(stream: ExperienceStream, goal: int, num_states: int, gamma: float, lr: float) -> np.ndarray:
    """Standard single-goal tabular Q-learning replayed over a recorded stream. Returns `[S, A]`."""

    q = np.zeros((num_states, gridcraft.NUM_ACTIONS), dtype=np.float64)
    for s, a, s2, achieved, episode_done in zip(stream.states, stream.actions, stream.next_states,
                                                stream.achieved, stream.episode_dones):
        r = float(achieved[goal])
        d = float(achieved[goal] or episode_done)
        q[s, a] = q[s, a] + lr * (r + gamma * (1.0 - d) * q[s2].max() - q[s, a])
    return q


def tabular_q_learn(
    world: WorldState,
    goal_set: GoalSet,
    goal: int,
    episodes: int,
    gamma: float,
    lr: float,
    eps: float,
    seed: int = 0,
    t_max: int = 50,
    max_states: int = 200_000,
) -> Tuple[np.ndarray, List[int]]:
    """Single-goal tabular Q-learning acting on its own table. Returns `(Q [S, A], actions taken)`."""

    goals = GridcraftGoals(goal_set)
    index = StateIndex(max_states)
    table = _GrowingTable((gridcraft.NUM_ACTIONS,), max_states)
    rng = np.random.default_rng(seed)
    actions = []

    for _ in range(episodes):
        state = world
        s = index(state)
        table.ensure(s)
        for t in range(t_max):
            a = _epsilon_greedy(table.q[s], eps, rng)
            next_state = gridcraft.step(state, a)
            s2 = index(next_state)
            table.ensure(s2)

            hit = bool(goals.is_achieved(next_state, goal))
            r = float(hit)
            d = float(hit or t == t_max - 1)
            q = table.q
            q[s, a] = q[s, a] + lr * (r + gamma * (1.0 - d) * q[s2].max() - q[s, a])

            actions.append(a)
            state, s = next_state, s2

    return table.q[:len(index)].copy(), actions
