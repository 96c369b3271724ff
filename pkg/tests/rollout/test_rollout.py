import logging

import numpy as np
import pytest
import torch

from src.envs import gridcraft, pointmaze
from src.goals.curriculum import SeenGoalTracker
from src.rollout.collector import PolicyStep, collect, init_lanes
from src.rollout.evaluation import EvalReport, evaluate, evaluate_continuous
from src.rollout.vec_env import GridcraftEnv, PointMazeEnv


def random_policy(num_actions):
    def policy(obs, commanded, rng):
        return PolicyStep(rng.integers(num_actions, size=obs.shape[0]))
    return policy


def continuous_random_policy(obs, commanded, rng):
    return PolicyStep(rng.uniform(-1.0, 1.0, size=(obs.shape[0], 2)).astype(np.float32))


def steer_to_center(env):
    """Drives the point towards the center of the commanded grid cell."""
    x_min, x_max, y_min, y_max = env.spec.bounds
    scale = np.array([x_max - x_min, y_max - y_min]) / 2.0
    origin = np.array([x_min, y_min])

    def policy(obs, commanded, rng):
        pos = (obs[:, :2] + 1.0) * scale + origin
        vel = obs[:, 2:] * env.spec.v_max
        error = env.grid.centers[commanded] - pos
        return PolicyStep(np.clip(error - vel, -1.0, 1.0).astype(np.float32))

    return policy


@pytest.fixture
def grid_env():
    return GridcraftEnv(gridcraft.build_goal_set("small"), world_size=8, t_max=5)


def test_collect_gridcraft(grid_env):
    rng = np.random.default_rng(0)
    tracker = SeenGoalTracker.empty(grid_env.num_goals)
    lanes = init_lanes(grid_env, 3, tracker, rng)

    segment, lanes, new_tracker = collect(grid_env, lanes, random_policy(6), 12, tracker, rng)

    assert segment.obs.shape == (12, 3, grid_env.obs_dim)
    assert segment.actions.shape == (12, 3)
    assert segment.rewards.shape == (12, 3, 20)
    assert segment.log_probs is None and segment.values is None
    assert len(lanes) == 3

    # every lane starts together, full resets land on the time limit
    resets = segment.episode_dones.numpy()
    assert resets[[4, 9]].all()
    assert not resets[[0, 1, 2, 3, 5, 6, 7, 8, 10, 11]].any()

    assert torch.equal(segment.rewards, segment.achieved.float())
    assert torch.equal(segment.dones, segment.achieved | segment.episode_dones.unsqueeze(-1))
    assert torch.equal(segment.commanded_done, segment.commanded_dones())
    assert np.array_equal(new_tracker.seen, segment.achieved.numpy().reshape(-1, 20).any(axis=0))
    assert tracker.num_seen == 0


def test_collect_carries_state_within_an_episode(grid_env):
    rng = np.random.default_rng(1)
    tracker = SeenGoalTracker.empty(grid_env.num_goals)
    lanes = init_lanes(grid_env, 4, tracker, rng)
    segment, _, _ = collect(grid_env, lanes, random_policy(6), 10, tracker, rng)

    for t in range(9):
        for b in range(4):
            if not segment.episode_dones[t, b]:
                assert torch.equal(segment.obs[t + 1, b], segment.next_obs[t, b])
                if not segment.commanded_done[t, b]:
                    assert segment.commanded[t + 1, b] == segment.commanded[t, b]


def test_collect_records_policy_statistics(grid_env):
    def policy(obs, commanded, rng):
        n = obs.shape[0]
        return PolicyStep(np.zeros(n, dtype=np.int64), np.full(n, -1.5), np.full(n, 0.25))

    rng = np.random.default_rng(0)
    tracker = SeenGoalTracker.empty(grid_env.num_goals)
    segment, _, _ = collect(grid_env, init_lanes(grid_env, 2, tracker, rng), policy, 3, tracker, rng)
    assert torch.equal(segment.log_probs, torch.full((3, 2), -1.5))
    assert torch.equal(segment.values, torch.full((3, 2), 0.25))


def test_collect_pointmaze():
    env = PointMazeEnv(pointmaze.load_maze("umaze", t_max=10))
    rng = np.random.default_rng(0)
    tracker = SeenGoalTracker.empty(env.num_goals)
    segment, _, _ = collect(env, init_lanes(env, 2, tracker, rng), continuous_random_policy, 6, tracker, rng)

    assert segment.obs.shape == (6, 2, pointmaze.OBS_DIM)
    assert segment.actions.shape == (6, 2, 2)
    assert segment.rewards.shape == (6, 2, env.num_goals)
    assert ((segment.commanded >= 0) & (segment.commanded < env.num_goals)).all()


def test_evaluate_gridcraft(grid_env):
    report = evaluate(random_policy(6), grid_env, 3, np.random.default_rng(0), goal_ids=[0, 6, 8])
    assert report.per_goal_success.shape == (3,)
    assert report.goal_ids == (0, 6, 8)
    assert report.names == ("inventory/wood_1", "tools/wood_pickaxe", "block_map/tree_left")
    assert ((report.per_goal_success >= 0.0) & (report.per_goal_success <= 1.0)).all()

    again = evaluate(random_policy(6), grid_env, 3, np.random.default_rng(0), goal_ids=[0, 6, 8])
    assert np.array_equal(report.per_goal_success, again.per_goal_success)

    with pytest.raises(ValueError):
        evaluate(random_policy(6), grid_env, 0, np.random.default_rng(0))


def test_evaluate_pointmaze_reaches_near_goals():
    env = PointMazeEnv(pointmaze.load_maze("umaze"))
    near = [g for g in range(env.num_goals) if env.grid.centers[g][1] < 3.0]
    report = evaluate(steer_to_center(env), env, 2, np.random.default_rng(0), goal_ids=near[:6])
    assert report.mean_success == 1.0


def test_evaluate_continuous_has_no_violations():
    env = PointMazeEnv(pointmaze.load_maze("umaze", t_max=80))
    report = evaluate_continuous(steer_to_center(env), env, 12, np.random.default_rng(0))
    assert report.episodes == 12
    assert report.violations == 0
    assert report.quantized_success > 0.0
    assert report.success >= report.quantized_success


def test_eval_report_table():
    report = EvalReport(np.array([0.5, 1.0, 0.5]), 2.0 / 3.0, 2, (0, 1, 2), ("a/x", "a/y", "b/z"))
    assert [row[0] for row in report.sorted_rows()] == [1, 0, 2]
    assert "mean success 0.6667" in report.to_table()
    assert report.to_dict()["per_goal_success"] == {"a/x": 0.5, "a/y": 1.0, "b/z": 0.5}


def test_env_adapters(caplog):
    grid_env = GridcraftEnv(gridcraft.build_goal_set("full"))
    state = grid_env.reset(3)
    assert grid_env.observe(state).shape == (grid_env.obs_dim,)
    assert grid_env.achieved(state).shape == (49,)
    assert grid_env.command_goal(SeenGoalTracker.empty(49), np.random.default_rng(0)) == (0, None)

    maze_env = PointMazeEnv(pointmaze.load_maze("umaze"), 0.5, 0.1)
    goal, target = maze_env.command_goal(None, np.random.default_rng(0))
    assert np.linalg.norm(maze_env.grid.centers[goal] - target.target) <= 0.5 * np.sqrt(2.0) / 2.0 + 1e-9

    with caplog.at_level(logging.WARNING):
        PointMazeEnv(pointmaze.load_maze("umaze"), 1.0, 0.2)
    assert "does not guarantee" in caplog.text
