import logging
import math
import os

import numpy as np
import pytest

from src.envs.gridcraft import build_goal_set
from src.envs.pointmaze import MazeSpec, Rect, load_maze, sample_free_point
from src.goals.curriculum import SeenGoalTracker, sample_command_goal, tracker_update
from src.goals.goal_set import Goal, GoalSet, load_goal_set, reward_term_vector, save_goal_set, subsample_goals
from src.goals.quantization import QuantGrid, achieved_grid_goals, quantization_adequacy, quantize_goal
from src.utils.errors import GoalError

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "..", "src", "goals", "data")


@pytest.mark.parametrize("preset", ["small", "full"])
def test_goal_data_matches_presets(preset):
    goal_set = load_goal_set(os.path.join(DATA_DIR, f"gridcraft_{preset}.json"))
    assert goal_set.to_specs() == build_goal_set(preset).to_specs()


def test_goal_set_save_load(tmp_path):
    goal_set = build_goal_set("extended")
    save_goal_set(goal_set, str(tmp_path / "goals.json"))
    loaded = load_goal_set(str(tmp_path / "goals.json"))
    assert loaded == goal_set
    assert [g.predicate for g in loaded] == [g.predicate for g in goal_set]


def test_goal_set_lookup():
    goal_set = build_goal_set("small")
    assert goal_set.index("tools/stone_pickaxe") == 7
    assert goal_set[7].category == "tools"
    assert goal_set.size == 20 and len(goal_set.names) == 20
    assert "block_map/water_down" in goal_set.to_table()

    with pytest.raises(GoalError):
        goal_set.index("tools/diamond_pickaxe")
    with pytest.raises(GoalError):
        goal_set[20]


def test_goal_set_validation():
    with pytest.raises(GoalError):
        GoalSet.from_specs([{"name": "a/x"}, {"name": "a/x"}])
    with pytest.raises(GoalError):
        GoalSet((Goal(1, "a/x", "a"),))
    assert GoalSet.from_specs([{"name": "a/x"}])[0].category == "a"


def test_subsample_goals():
    full = build_goal_set("full")
    sub = subsample_goals(full, 16, seed=3, must_include=["tools/stone_pickaxe"])

    assert len(sub) == 16
    assert "tools/stone_pickaxe" in sub.names
    assert [g.id for g in sub] == list(range(16))
    positions = [full.index(name) for name in sub.names]
    assert positions == sorted(positions)

    assert subsample_goals(full, 16, seed=3, must_include=["tools/stone_pickaxe"]) == sub
    assert any(subsample_goals(full, 16, seed=s).names != sub.names for s in range(4, 8))


def test_subsample_goals_errors():
    full = build_goal_set("full")
    with pytest.raises(GoalError):
        subsample_goals(full, 50, seed=0)
    with pytest.raises(GoalError):
        subsample_goals(full, 1, seed=0, must_include=["tools/wood_pickaxe", "tools/stone_pickaxe"])
    with pytest.raises(GoalError):
        subsample_goals(full, 4, seed=0, must_include=["tools/diamond_pickaxe"])


def test_reward_term_vector():
    out = reward_term_vector(np.array([True, False, True]), False)
    assert out.rewards.tolist() == [1.0, 0.0, 1.0]
    assert out.dones.tolist() == [True, False, True]

    batch = reward_term_vector(np.array([[False, True], [False, False]]), np.array([False, True]), num_goals=2)
    assert batch.rewards.shape == (2, 2)
    assert batch.dones.tolist() == [[False, True], [True, True]]

    with pytest.raises(GoalError):
        reward_term_vector(np.zeros(3, dtype=bool), False, num_goals=4)


def test_command_goal_curriculum():
    goal_set = build_goal_set("small")
    rng = np.random.default_rng(0)
    tracker = SeenGoalTracker.empty(len(goal_set))

    assert sample_command_goal(tracker, goal_set, rng) == 0
    assert sample_command_goal(tracker, goal_set, rng, fallback=5) == 5

    achieved = np.zeros((3, len(goal_set)), dtype=bool)
    achieved[0, 2] = achieved[2, 2] = achieved[1, 11] = True
    tracker = tracker_update(tracker, achieved)
    assert tracker.num_seen == 2
    assert tracker.counts[2] == 2 and tracker.counts[11] == 1

    draws = {sample_command_goal(tracker, goal_set, rng) for _ in range(100)}
    assert draws == {2, 11}

    uniform = {sample_command_goal(tracker, goal_set, rng, autocurriculum=False) for _ in range(500)}
    assert uniform == set(range(len(goal_set)))


# chi-square critical values at p = 0.001
CHI2_CRITICAL = {4: 18.467, 19: 43.820}


def _chi_square(counts, expected):
    return float(((counts - expected) ** 2 / expected).sum())


@pytest.mark.parametrize("autocurriculum", [True, False])
def test_command_goal_draws_are_uniform(autocurriculum):
    goal_set = build_goal_set("small")
    achieved = np.zeros((1, len(goal_set)), dtype=bool)
    achieved[0, [1, 4, 7, 12, 19]] = True
    tracker = tracker_update(SeenGoalTracker.empty(len(goal_set)), achieved)
    rng = np.random.default_rng(42)

    draws = [sample_command_goal(tracker, goal_set, rng, autocurriculum=autocurriculum) for _ in range(20_000)]
    counts = np.bincount(draws, minlength=len(goal_set)).astype(np.float64)

    support = np.flatnonzero(tracker.seen) if autocurriculum else np.arange(len(goal_set))
    assert counts.sum() == counts[support].sum()
    expected = np.full(support.size, 20_000 / support.size)
    assert _chi_square(counts[support], expected) < CHI2_CRITICAL[support.size - 1]


def test_tracker_mismatch():
    with pytest.raises(GoalError):
        sample_command_goal(SeenGoalTracker.empty(3), build_goal_set("small"), np.random.default_rng(0))


@pytest.fixture
def umaze_grid():
    return QuantGrid.from_maze(load_maze("umaze"), 0.5)


def test_quant_grid(umaze_grid):
    # 16 x 16 cells, 11 x 2 of them inside the wall
    assert umaze_grid.dims == (16, 16)
    assert len(umaze_grid) == 256 - 22
    goal_set = umaze_grid.goal_set()
    assert len(goal_set) == len(umaze_grid)
    assert goal_set[0].name == "grid/x0_y0"
    assert goal_set[0].predicate == {"kind": "ball", "x": 0.25, "y": 0.25}


def test_quantize_goal(umaze_grid):
    assert quantize_goal(np.array([0.3, 0.3]), umaze_grid) == 0
    # inside the wall: snaps to the nearest free cell center below it
    goal_id = quantize_goal(np.array([2.6, 3.9]), umaze_grid)
    assert np.allclose(umaze_grid.centers[goal_id], [2.75, 3.25])


def test_quantization_error_is_bounded(umaze_grid):
    spec = load_maze("umaze")
    rng = np.random.default_rng(0)
    bound = umaze_grid.spacing * math.sqrt(2.0) / 2.0
    for _ in range(300):
        p = sample_free_point(spec, rng)
        center = umaze_grid.centers[quantize_goal(p, umaze_grid)]
        assert np.linalg.norm(center - p) <= bound + 1e-9


def test_quantization_adequacy(umaze_grid):
    assert quantization_adequacy(umaze_grid, eps=0.5, eps_reach=0.1)
    assert not quantization_adequacy(umaze_grid, eps=0.5, eps_reach=0.2)
    with pytest.raises(ValueError):
        quantization_adequacy(umaze_grid, eps=0.0, eps_reach=0.1)


def test_achieved_grid_goals(umaze_grid):
    at_center = achieved_grid_goals(np.array([0.25, 0.25]), umaze_grid, 0.1)
    assert np.flatnonzero(at_center).tolist() == [0]

    # closed ball: the two neighbouring centers lie exactly at distance h
    wide = achieved_grid_goals(np.array([0.25, 0.25]), umaze_grid, 0.5)
    assert wide.sum() == 3


def test_misaligned_grid_warns(caplog):
    with caplog.at_level(logging.WARNING):
        QuantGrid.from_maze(load_maze("umaze"), 1.0)
    assert "walls of maze 'umaze' are not aligned" in caplog.text

    caplog.clear()
    open_room = MazeSpec(walls=(), bounds=(0.0, 2.25, 0.0, 2.0), start_region=Rect(0.0, 0.0, 0.5, 0.5))
    with caplog.at_level(logging.WARNING):
        grid = QuantGrid.from_maze(open_room, 0.5)
    assert "bounds of maze 'custom' are not aligned" in caplog.text
    assert grid.dims == (5, 4) and len(grid) == 20

    caplog.clear()
    with caplog.at_level(logging.WARNING):
        QuantGrid.from_maze(load_maze("umaze"), 0.5, strict=True)
        QuantGrid.from_maze(load_maze("bigmaze"), 0.5, strict=True)
    assert "not aligned" not in caplog.text


@pytest.mark.parametrize("spacing", [0.3, 1.0])
def test_misaligned_grid_strict(spacing):
    with pytest.raises(GoalError, match="not aligned"):
        QuantGrid.from_maze(load_maze("umaze"), spacing, strict=True)
    open_room = MazeSpec(walls=(), bounds=(0.0, 2.25, 0.0, 2.0), start_region=Rect(0.0, 0.0, 0.5, 0.5))
    with pytest.raises(GoalError, match="bounds"):
        QuantGrid.from_maze(open_room, 0.5, strict=True)


def test_invalid_grid():
    with pytest.raises(GoalError):
        QuantGrid((0.0, 0.0), 0.0, (1, 1), np.ones((1, 1), dtype=bool))
    with pytest.raises(GoalError):
        QuantGrid((0.0, 0.0), 0.5, (2, 2), np.zeros((2, 2), dtype=bool))
