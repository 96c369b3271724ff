import numpy as np
import pytest

from src.envs.gridcraft import (Action, Block, Direction, GridcraftGoals, MAX_COUNT, WorldState, achieved_goals,
                                build_goal_set, check_world, generate_world, observation_size, observe, step)
from src.goals.goal_set import GoalSet
from src.utils.errors import GoalError

WORKSHOP = [
    ".....",
    ".T@S.",
    "..+..",
    ".....",
]


def test_collect_and_craft():
    s0 = WorldState.from_ascii(WORKSHOP, facing=Direction.RIGHT)

    s1 = step(s0, Action.LEFT)  # tree blocks the move
    assert s1.agent_pos == (1, 2) and s1.agent_facing == Direction.LEFT

    s2 = step(s1, Action.DO)
    assert s2.inventory == (1, 0, 0)
    assert s2.block_at(1, 1) == Block.GRASS
    assert s0.block_at(1, 1) == Block.TREE

    s3 = step(step(s2, Action.RIGHT), Action.DO)  # stone needs a wood pickaxe
    assert s3.inventory == (1, 0, 0) and s3.block_at(1, 3) == Block.STONE

    s4 = step(s3, Action.CRAFT)
    assert s4.tools == (True, False) and s4.inventory == (0, 0, 0)

    s5 = step(s4, Action.DO)
    assert s5.inventory == (0, 1, 0) and s5.block_at(1, 3) == Block.PATH

    assert step(s5, Action.CRAFT).tools == (True, False)  # no wood left for the stone pickaxe

    s6 = step(s5, Action.RIGHT)
    assert s6.agent_pos == (1, 3)
    assert s6.step_count == 7


def test_stone_pickaxe_recipe():
    s = WorldState.from_ascii(["@+"], facing=Direction.RIGHT, inventory=(2, 1, 0), tools=(True, False))
    s = step(s, Action.CRAFT)
    assert s.tools == (True, True) and s.inventory == (1, 0, 0)


def test_crafting_needs_a_table():
    s = WorldState.from_ascii(["@.", ".+"], inventory=(3, 0, 0))
    assert step(s, Action.CRAFT).tools == (False, False)


@pytest.mark.parametrize("tools", [(False, False), (True, False), (True, True)])
def test_coal_needs_stone_pickaxe(tools):
    s = step(WorldState.from_ascii(["@C"], facing=Direction.RIGHT, tools=tools), Action.DO)
    assert s.inventory[2] == (1 if tools[1] else 0)


def test_inventory_is_capped():
    s = WorldState.from_ascii(["@T"], facing=Direction.RIGHT, inventory=(MAX_COUNT, 0, 0))
    s = step(s, Action.DO)
    assert s.inventory == (MAX_COUNT, 0, 0)
    assert s.block_at(0, 1) == Block.TREE


def test_moves_stay_on_the_map():
    s = WorldState.from_ascii(["@~"])
    for action in (Action.UP, Action.LEFT, Action.DOWN, Action.RIGHT):
        s = step(s, action)
        assert s.agent_pos == (0, 0)
    assert s.agent_facing == Direction.RIGHT


@pytest.mark.parametrize("seed", [0, 1, 17, 12345])
@pytest.mark.parametrize("size", [8, 10, 16])
def test_generate_world(seed, size):
    a = generate_world(seed, size)
    b = generate_world(seed, size)

    assert a.grid.shape == (size, size)
    assert np.array_equal(a.grid, b.grid)
    assert a.agent_pos == b.agent_pos and a.agent_facing == b.agent_facing
    assert check_world(a.grid, a.agent_pos)
    assert a.inventory == (0, 0, 0) and a.tools == (False, False)


def test_generate_world_varies_with_seed():
    grids = [generate_world(seed).grid for seed in range(8)]
    assert any(not np.array_equal(grids[0], g) for g in grids[1:])


def test_generate_world_rejects_tiny_maps():
    with pytest.raises(ValueError):
        generate_world(0, size=3)


def test_render_round_trip():
    s = generate_world(3)
    rows = s.render().split("\n")[:-1]
    t = WorldState.from_ascii(rows, facing=s.agent_facing)
    assert np.array_equal(s.grid, t.grid) and s.agent_pos == t.agent_pos


def test_check_world_rejects_reachable_coal():
    reachable = WorldState.from_ascii([".T~.", "S@.C", ".+.."])
    assert not check_world(reachable.grid, reachable.agent_pos)

    walled = WorldState.from_ascii([".T~.", "S@.S", ".+.."])
    assert check_world(walled.grid, walled.agent_pos)


@pytest.mark.parametrize("preset,size", [("small", 20), ("full", 49), ("extended", 157)])
def test_goal_presets(preset, size):
    goal_set = build_goal_set(preset)
    assert len(goal_set) == size
    assert len(GridcraftGoals(goal_set)) == size


def test_unknown_preset():
    with pytest.raises(GoalError):
        build_goal_set("huge")


def test_achieved_goals():
    goal_set = build_goal_set("full")
    s = WorldState.from_ascii(["T@~"], inventory=(3, 1, 0), tools=(True, False))

    achieved = achieved_goals(s, goal_set)
    names = {goal_set[i].name for i in np.flatnonzero(achieved)}
    assert names == {"inventory/wood_3", "inventory/stone_1", "tools/wood_pickaxe",
                     "block_map/tree_left", "block_map/water_right"}


def test_inventory_range_goals():
    goal_set = build_goal_set("extended")
    s = WorldState.from_ascii(["@."], inventory=(4, 0, 0))
    achieved = achieved_goals(s, goal_set)
    assert achieved[goal_set.index("inventory/wood_2-5")]
    assert achieved[goal_set.index("inventory/wood_4")]
    assert not achieved[goal_set.index("inventory/wood_5-9")]


@pytest.mark.parametrize("preset", ["small", "extended"])
def test_vectorized_goals_match_scalar(preset):
    goals = GridcraftGoals(build_goal_set(preset))
    rng = np.random.default_rng(0)
    s = generate_world(5)
    for _ in range(200):
        s = step(s, int(rng.integers(len(Action))))
        mask = goals.achieved(s)
        assert mask.tolist() == [goals.is_achieved(s, g) for g in range(len(goals))]


def test_bad_predicate():
    goal_set = GoalSet.from_specs([{"name": "inventory/gold_1",
                                    "predicate": {"kind": "inventory", "item": "gold", "min": 1, "max": 1}}])
    with pytest.raises(GoalError):
        GridcraftGoals(goal_set)


@pytest.mark.parametrize("view_radius", [1, 3])
def test_observe(view_radius):
    s = WorldState.from_ascii(["T@~", "..."], facing=Direction.DOWN, inventory=(3, 0, 0), tools=(False, True))
    obs = observe(s, view_radius)

    assert obs.shape == (observation_size(view_radius),)
    assert obs.dtype == np.float32
    assert set(np.unique(obs).tolist()) <= {0.0, 1.0}

    tail = obs[-(3 * MAX_COUNT + 2 + 4):]
    assert tail[:MAX_COUNT].tolist() == [1.0] * 3 + [0.0] * (MAX_COUNT - 3)
    assert tail[3 * MAX_COUNT:3 * MAX_COUNT + 2].tolist() == [0.0, 1.0]
    assert tail[-4:].tolist() == [0.0, 1.0, 0.0, 0.0]


def test_observation_size():
    assert observation_size(3) == 49 * 7 + 27 + 2 + 4


DENSE = [
    "TSTST",
    "S.+.T",
    "T.@.S",
    "C...C",
    "TSCST",
]


def _count(state, block):
    return int((state.grid == block).sum())


@pytest.mark.parametrize("world", ["dense", 0, 1, 2])
def test_inventory_is_conserved(world):
    s = WorldState.from_ascii(DENSE) if world == "dense" else generate_world(world, 8)
    start = {b: _count(s, b) for b in (Block.TREE, Block.STONE, Block.COAL_ORE)}
    rng = np.random.default_rng(world if isinstance(world, int) else 99)

    for _ in range(3000):
        action = int(rng.integers(len(Action)))
        t = step(s, action)
        dw, ds, dc = (b - a for a, b in zip(s.inventory, t.inventory))
        facing = s.block_at(*s.facing_cell())

        assert dw in (-1, 0, 1) and ds in (-1, 0, 1) and dc in (0, 1)
        if dw == 1:
            assert action == Action.DO and facing == Block.TREE
        if ds == 1:
            assert action == Action.DO and facing == Block.STONE and s.tools[0]
        if dc == 1:
            assert action == Action.DO and facing == Block.COAL_ORE and s.tools[1]
        if dw == -1 or ds == -1:
            assert action == Action.CRAFT and t.tools != s.tools
        assert all(0 <= n <= MAX_COUNT for n in t.inventory)

        # tools never go away, and the stone pickaxe needs the wood one
        assert t.tools[0] >= s.tools[0] and t.tools[1] >= s.tools[1]
        assert t.tools[0] or not t.tools[1]

        # every mined block is either held or spent on a tool
        wood, stone, coal = t.inventory
        assert start[Block.TREE] - _count(t, Block.TREE) == wood + t.tools[0] + t.tools[1]
        assert start[Block.STONE] - _count(t, Block.STONE) == stone + t.tools[1]
        assert start[Block.COAL_ORE] - _count(t, Block.COAL_ORE) == coal
        s = t


# Every goal of the full preset along one scripted run: trees and stones along the top edge,
# coal ore under them, and one block of each kind to walk around on row 5.
EVERY_GOAL_MAP = [
    "TTTTTTTTT.SSSSSSSSSS.",
    "@....................",
    ".........+.CCCCCCCCC.",
    ".....................",
    ".....................",
    "..T...S...~...C...+..",
    ".....................",
]


@pytest.fixture
def every_goal_script():
    up, down, left, right, do, craft = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT, Action.DO, Action.CRAFT)
    actions = [up, do, right] * 9  # wood 1..9
    actions += [craft]  # wood pickaxe from the table below
    actions += [right, up, do, left, craft]  # one stone, then the stone pickaxe
    actions += [right] + [right, up, do] * 9  # stone 1..9
    actions += [down, do, left] * 9  # coal 1..9
    actions += [down] * 3 + [left] * 9 + [down]
    ring = [up, right, right, down, down, left, left, up]
    for i in range(5):
        actions += ring
        if i < 4:
            actions += [up] + [right] * 4 + [down]
    return actions


def _replay(rows, actions):
    states = [WorldState.from_ascii(rows)]
    for action in actions:
        states.append(step(states[-1], action))
    return states


@pytest.mark.parametrize("preset", ["small", "full"])
def test_every_goal_is_achievable(preset, every_goal_script):
    goals = GridcraftGoals(build_goal_set(preset))
    states = _replay(EVERY_GOAL_MAP, every_goal_script)
    masks = np.stack([goals.achieved(s) for s in states])

    missing = [goals.goal_set[g].name for g in np.flatnonzero(~masks.any(axis=0))]
    assert missing == []

    for g in range(len(goals)):
        first = int(np.argmax(masks[:, g]))
        assert goals.is_achieved(_replay(EVERY_GOAL_MAP, every_goal_script[:first])[-1], g)
    assert states[-1].agent_pos == (5, 17) and states[-1].tools == (True, True)
    assert states[-1].inventory == (7, 9, 9)


STONE_PICKAXE_MAP = ["TT...S", "@.....", ".+...."]
STONE_PICKAXE_SCRIPT = [
    Action.UP, Action.DO, Action.RIGHT, Action.UP, Action.DO, Action.CRAFT,
    Action.RIGHT, Action.RIGHT, Action.RIGHT, Action.RIGHT, Action.UP, Action.DO,
    Action.LEFT, Action.LEFT, Action.LEFT, Action.LEFT, Action.CRAFT, Action.DOWN, Action.CRAFT, Action.DO,
]
ORACLE_MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1)}


def oracle_replay(rows, actions):
    """Plain char-map interpreter of the gridcraft rules: yields (pos, facing, inventory, tools, rows) per action."""
    cells = [list(row.replace("@", ".")) for row in rows]
    pos = next((r, row.index("@")) for r, row in enumerate(rows) if "@" in row)
    facing, inv, tools = 0, [0, 0, 0], [False, False]

    def at(r, c):
        return cells[r][c] if 0 <= r < len(cells) and 0 <= c < len(cells[0]) else None

    for a in map(int, actions):
        r, c = pos
        if a < 4:
            facing = a
            dr, dc = ORACLE_MOVES[a]
            if at(r + dr, c + dc) in (".", "_"):
                pos = (r + dr, c + dc)
        elif a == 4:
            dr, dc = ORACLE_MOVES[facing]
            fr, fc = r + dr, c + dc
            ch = at(fr, fc)
            if ch == "T" and inv[0] < MAX_COUNT:
                inv[0] += 1
                cells[fr][fc] = "."
            elif ch == "S" and tools[0] and inv[1] < MAX_COUNT:
                inv[1] += 1
                cells[fr][fc] = "_"
            elif ch == "C" and tools[1] and inv[2] < MAX_COUNT:
                inv[2] += 1
                cells[fr][fc] = "_"
        elif "+" in (at(r + dr, c + dc) for dr, dc in ORACLE_MOVES.values()):
            if not tools[0] and inv[0] >= 1:
                inv[0] -= 1
                tools[0] = True
            elif tools[0] and not tools[1] and inv[0] >= 1 and inv[1] >= 1:
                inv[0] -= 1
                inv[1] -= 1
                tools[1] = True

        rendered = ["".join(row) for row in cells]
        rendered[pos[0]] = rendered[pos[0]][:pos[1]] + "@" + rendered[pos[0]][pos[1] + 1:]
        yield pos, facing, tuple(inv), tuple(tools), rendered


def test_stone_pickaxe_script_matches_oracle():
    assert len(STONE_PICKAXE_SCRIPT) == 20
    states = _replay(STONE_PICKAXE_MAP, STONE_PICKAXE_SCRIPT)[1:]

    for s, (pos, facing, inv, tools, rows) in zip(states, oracle_replay(STONE_PICKAXE_MAP, STONE_PICKAXE_SCRIPT)):
        assert s.agent_pos == pos and int(s.agent_facing) == facing
        assert s.inventory == inv and s.tools == tools
        assert s.render().split("\n")[:-1] == rows

    final = states[-1]
    assert final.tools == (True, True) and final.inventory == (0, 0, 0)
    assert final.agent_pos == (1, 1) and final.agent_facing == Direction.DOWN and final.step_count == 20
    assert final.block_at(0, 0) == final.block_at(0, 1) == Block.GRASS and final.block_at(0, 5) == Block.PATH
    small = build_goal_set("small")
    assert GridcraftGoals(small).is_achieved(final, small.index("tools/stone_pickaxe"))
