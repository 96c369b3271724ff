"""
Gridcraft
---------
A deterministic, procedurally generated N x N crafting gridworld.

The agent walks on grass and path cells, collects wood from trees, mines stone with a wood
pickaxe and coal with a stone pickaxe, and crafts pickaxes next to a crafting table. Goals are
predicates over a single state (inventory counts, tools held, blocks adjacent to the agent) so
every goal can be verified from an observation. Worlds are regenerated from a seed each episode.

All operations are pure: `step` returns a new `WorldState` and never mutates its input.
"""
import enum
import logging
from collections import deque
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..goals.goal_set import GoalSet
from ..utils.errors import GoalError, WorldGenerationError

logger = logging.getLogger(__name__)

MIN_SIZE = 6
MAX_COUNT = 9
DEFAULT_T_MAX = 200
DEFAULT_VIEW_RADIUS = 3
MAX_GENERATION_ATTEMPTS = 100


class Block(enum.IntEnum):
    GRASS = 0
    TREE = 1
    STONE = 2
    WATER = 3
    COAL_ORE = 4
    CRAFTING_TABLE = 5
    PATH = 6


class Direction(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    DO = 4
    CRAFT = 5


class Item(enum.IntEnum):
    WOOD = 0
    STONE = 1
    COAL = 2


class Tool(enum.IntEnum):
    WOOD_PICKAXE = 0
    STONE_PICKAXE = 1


NUM_BLOCKS = len(Block)
NUM_ACTIONS = len(Action)
WALKABLE = (Block.GRASS, Block.PATH)
DELTAS = {Direction.UP: (-1, 0), Direction.DOWN: (1, 0), Direction.LEFT: (0, -1), Direction.RIGHT: (0, 1)}

BLOCK_CHARS = {Block.GRASS: ".", Block.TREE: "T", Block.STONE: "S", Block.WATER: "~",
               Block.COAL_ORE: "C", Block.CRAFTING_TABLE: "+", Block.PATH: "_"}
FACING_CHARS = {Direction.UP: "^", Direction.DOWN: "v", Direction.LEFT: "<", Direction.RIGHT: ">"}


@dataclass(frozen=True)
class WorldState:
    grid: np.ndarray  # int8 [N, N] of Block, read-only
    agent_pos: Tuple[int, int]
    agent_facing: Direction
    inventory: Tuple[int, int, int]  # wood, stone, coal
    tools: Tuple[bool, bool]  # wood_pickaxe, stone_pickaxe
    step_count: int = 0
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def block_at(self, row: int, col: int) -> Optional[Block]:
        if 0 <= row < self.grid.shape[0] and 0 <= col < self.grid.shape[1]:
            return Block(int(self.grid[row, col]))
        return None

    def facing_cell(self) -> Tuple[int, int]:
        dr, dc = DELTAS[self.agent_facing]
        return self.agent_pos[0] + dr, self.agent_pos[1] + dc

    def render(self) -> str:
        rows = []
        for r in range(self.size):
            row = "".join(BLOCK_CHARS[Block(int(b))] for b in self.grid[r])
            if r == self.agent_pos[0]:
                c = self.agent_pos[1]
                row = row[:c] + "@" + row[c + 1:]
            rows.append(row)
        wood, stone, coal = self.inventory
        tools = [t.name.lower() for t in Tool if self.tools[t]]
        rows.append(f"facing {FACING_CHARS[self.agent_facing]}  wood={wood} stone={stone} coal={coal}  "
                    f"tools=[{', '.join(tools)}]  step={self.step_count}")
        return "\n".join(rows)

    @classmethod
    def from_ascii(
        cls,
        rows: Sequence[str],
        facing: Direction = Direction.UP,
        inventory: Tuple[int, int, int] = (0, 0, 0),
        tools: Tuple[bool, bool] = (False, False),
    ) -> "WorldState":
        """Builds a state from the `render` block characters, the agent marked '@' (standing on grass)."""
        char_to_block = {v: k for k, v in BLOCK_CHARS.items()}
        grid = np.zeros((len(rows), len(rows[0])), dtype=np.int8)
        agent = None
        for r, row in enumerate(rows):
            for c, ch in enumerate(row):
                if ch == "@":
                    agent = (r, c)
                    grid[r, c] = Block.GRASS
                else:
                    grid[r, c] = char_to_block[ch]
        if agent is None:
            raise ValueError("no agent '@' in the map")
        grid.setflags(write=False)
        return cls(grid, agent, Direction(facing), tuple(inventory), tuple(tools))


def _reachable(grid: np.ndarray, start: Tuple[int, int]) -> np.ndarray:
    n, m = grid.shape
    walkable = np.isin(grid, WALKABLE)
    seen = np.zeros_like(walkable)
    seen[start] = True
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in DELTAS.values():
            a, b = r + dr, c + dc
            if 0 <= a < n and 0 <= b < m and walkable[a, b] and not seen[a, b]:
                seen[a, b] = True
                queue.append((a, b))
    return seen


def _adjacent_to(mask: np.ndarray) -> np.ndarray:
    """Cells 4-adjacent to at least one True cell of `mask`."""
    out = np.zeros_like(mask)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def check_world(grid: np.ndarray, agent_pos: Tuple[int, int]) -> bool:
    """
    Layout constraints: the agent stands on a walkable cell, and a tree, stone, water and crafting
    table are each adjacent to the agent's walkable region. Coal ore, when present, is only
    reachable after mining stone.
    """
    if grid[agent_pos] not in WALKABLE:
        return False

    region = _reachable(grid, agent_pos)
    touch = _adjacent_to(region)
    for block in (Block.TREE, Block.STONE, Block.WATER, Block.CRAFTING_TABLE):
        if not (touch & (grid == block)).any():
            return False

    coal = grid == Block.COAL_ORE
    if (touch & coal).any():
        return False
    return True


def generate_world(seed: int, size: int = 10, coal_prob: float = 0.8) -> WorldState:
    """
    Procedural world, deterministic in `seed`. Retries internally until the layout
    constraints of `check_world` hold.
    """

    if size < MIN_SIZE:
        raise ValueError(f"world size must be >= {MIN_SIZE}, got {size}")

    for attempt in range(MAX_GENERATION_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        grid = np.full((size, size), Block.GRASS, dtype=np.int8)
        n_cells = size * size

        # water pond
        h, w = rng.integers(1, 3), rng.integers(2, 4)
        r, c = rng.integers(0, size - h + 1), rng.integers(0, size - w + 1)
        grid[r:r + h, c:c + w] = Block.WATER

        # stone clusters, some of them around a coal ore
        for _ in range(max(1, n_cells // 25)):
            r, c = rng.integers(0, size - 1), rng.integers(0, size - 1)
            grid[r:r + 2, c:c + 2] = np.where(grid[r:r + 2, c:c + 2] == Block.GRASS, Block.STONE, grid[r:r + 2, c:c + 2])
        if rng.random() < coal_prob:
            r, c = rng.integers(1, size - 1), rng.integers(1, size - 1)
            grid[r - 1:r + 2, c - 1:c + 2] = np.where(grid[r - 1:r + 2, c - 1:c + 2] == Block.WATER,
                                                      Block.WATER, Block.STONE)
            grid[r, c] = Block.COAL_ORE

        # trees
        grass = np.argwhere(grid == Block.GRASS)
        n_trees = max(2, n_cells // 12)
        for r, c in grass[rng.choice(len(grass), size=min(n_trees, len(grass)), replace=False)]:
            grid[r, c] = Block.TREE

        # crafting table
        grass = np.argwhere(grid == Block.GRASS)
        if len(grass) < 2:
            continue
        r, c = grass[rng.integers(len(grass))]
        grid[r, c] = Block.CRAFTING_TABLE

        grass = np.argwhere(grid == Block.GRASS)
        if len(grass) == 0:
            continue
        agent = tuple(int(x) for x in grass[rng.integers(len(grass))])

        if check_world(grid, agent):
            grid.setflags(write=False)
            facing = Direction(int(rng.integers(len(Direction))))
            return WorldState(grid, agent, facing, (0, 0, 0), (False, False), 0, seed)

        logger.debug(f"world seed {seed} attempt {attempt} rejected")

    raise WorldGenerationError(f"could not generate a valid {size}x{size} world for seed {seed} "
                               f"after {MAX_GENERATION_ATTEMPTS} attempts")


def _with_block(state: WorldState, cell: Tuple[int, int], block: Block) -> np.ndarray:
    grid = state.grid.copy()
    grid[cell] = block
    grid.setflags(write=False)
    return grid


def _adjacent_blocks(state: WorldState) -> List[Optional[Block]]:
    r, c = state.agent_pos
    return [state.block_at(r + dr, c + dc) for dr, dc in (DELTAS[d] for d in Direction)]


def step(state: WorldState, action: int) -> WorldState:
    action = Action(int(action))
    state = replace(state, step_count=state.step_count + 1)

    if action <= Action.RIGHT:
        direction = Direction(int(action))
        dr, dc = DELTAS[direction]
        target = (state.agent_pos[0] + dr, state.agent_pos[1] + dc)
        block = state.block_at(*target)
        if block is not None and block in WALKABLE:
            return replace(state, agent_pos=target, agent_facing=direction)
        return replace(state, agent_facing=direction)

    wood, stone, coal = state.inventory
    has_wood_pickaxe, has_stone_pickaxe = state.tools

    if action == Action.DO:
        cell = state.facing_cell()
        block = state.block_at(*cell)
        if block == Block.TREE and wood < MAX_COUNT:
            return replace(state, grid=_with_block(state, cell, Block.GRASS), inventory=(wood + 1, stone, coal))
        if block == Block.STONE and has_wood_pickaxe and stone < MAX_COUNT:
            return replace(state, grid=_with_block(state, cell, Block.PATH), inventory=(wood, stone + 1, coal))
        if block == Block.COAL_ORE and has_stone_pickaxe and coal < MAX_COUNT:
            return replace(state, grid=_with_block(state, cell, Block.PATH), inventory=(wood, stone, coal + 1))
        return state

    # Craft
    if Block.CRAFTING_TABLE not in _adjacent_blocks(state):
        return state
    if not has_wood_pickaxe and wood >= 1:
        return replace(state, inventory=(wood - 1, stone, coal), tools=(True, has_stone_pickaxe))
    if has_wood_pickaxe and not has_stone_pickaxe and wood >= 1 and stone >= 1:
        return replace(state, inventory=(wood - 1, stone - 1, coal), tools=(True, True))
    return state


# Goal predicates -----------------------------------------------------------------------------

INVENTORY, TOOL, BLOCK_ADJACENT = 0, 1, 2

BLOCK_GOAL_NAMES = {Block.TREE: "tree", Block.STONE: "stone", Block.WATER: "water",
                    Block.COAL_ORE: "coal_ore", Block.CRAFTING_TABLE: "crafting_table"}


class GridcraftGoals:
    """
    A goal set compiled against gridcraft predicates, evaluated with one vectorized lookup.

    Predicates (the `predicate` field of each goal):
        {"kind": "inventory", "item": "wood", "min": k, "max": k}   count in [min, max]
        {"kind": "tool", "tool": "stone_pickaxe"}                    tool held
        {"kind": "block_adjacent", "block": "tree", "direction": "left"}
    """

    def __init__(self, goal_set: GoalSet):
        self.goal_set = goal_set
        g = len(goal_set)
        self.kind = np.zeros(g, dtype=np.int64)
        self.arg0 = np.zeros(g, dtype=np.int64)
        self.lo = np.zeros(g, dtype=np.int64)
        self.hi = np.zeros(g, dtype=np.int64)

        block_by_name = {v: k for k, v in BLOCK_GOAL_NAMES.items()}
        for goal in goal_set:
            p = goal.predicate
            try:
                if p["kind"] == "inventory":
                    self.kind[goal.id] = INVENTORY
                    self.arg0[goal.id] = Item[p["item"].upper()]
                    self.lo[goal.id], self.hi[goal.id] = int(p["min"]), int(p["max"])
                elif p["kind"] == "tool":
                    self.kind[goal.id] = TOOL
                    self.arg0[goal.id] = Tool[p["tool"].upper()]
                elif p["kind"] == "block_adjacent":
                    self.kind[goal.id] = BLOCK_ADJACENT
                    self.arg0[goal.id] = block_by_name[p["block"]]
                    self.lo[goal.id] = Direction[p["direction"].upper()]
                else:
                    raise KeyError(p["kind"])
            except KeyError as e:
                raise GoalError(f"goal {goal.name!r} has a predicate gridcraft cannot evaluate: {e}") from None

        self._inv = self.kind == INVENTORY
        self._tool = self.kind == TOOL
        self._block = self.kind == BLOCK_ADJACENT

    def __len__(self) -> int:
        return len(self.goal_set)

    def achieved(self, state: WorldState) -> np.ndarray:
        out = np.zeros(len(self.goal_set), dtype=bool)

        inv = np.asarray(state.inventory)[self.arg0[self._inv]]
        out[self._inv] = (inv >= self.lo[self._inv]) & (inv <= self.hi[self._inv])
        out[self._tool] = np.asarray(state.tools)[self.arg0[self._tool]]

        adjacent = np.array([-1 if b is None else int(b) for b in _adjacent_blocks(state)])
        out[self._block] = adjacent[self.lo[self._block]] == self.arg0[self._block]
        return out

    def is_achieved(self, state: WorldState, goal_id: int) -> bool:
        """Scalar evaluation of one predicate."""
        goal = self.goal_set[goal_id]
        p = goal.predicate
        if p["kind"] == "inventory":
            count = state.inventory[Item[p["item"].upper()]]
            return int(p["min"]) <= count <= int(p["max"])
        if p["kind"] == "tool":
            return bool(state.tools[Tool[p["tool"].upper()]])
        dr, dc = DELTAS[Direction[p["direction"].upper()]]
        block = state.block_at(state.agent_pos[0] + dr, state.agent_pos[1] + dc)
        return block is not None and BLOCK_GOAL_NAMES.get(block) == p["block"]


def achieved_goals(state: WorldState, goal_set) -> np.ndarray:
    """Bitmask over the goal set of the predicates that hold in `state`."""
    goals = goal_set if isinstance(goal_set, GridcraftGoals) else GridcraftGoals(goal_set)
    return goals.achieved(state)


# Goal presets ---------------------------------------------------------------------------------

def _inventory_goal(item: str, lo: int, hi: int):
    name = f"inventory/{item}_{lo}" if lo == hi else f"inventory/{item}_{lo}-{hi}"
    return {"name": name, "category": "inventory", "predicate": {"kind": "inventory", "item": item, "min": lo, "max": hi}}


def _tool_goal(tool: str):
    return {"name": f"tools/{tool}", "category": "tools", "predicate": {"kind": "tool", "tool": tool}}


def _block_goal(block: str, direction: str):
    return {"name": f"block_map/{block}_{direction}", "category": "block_map",
            "predicate": {"kind": "block_adjacent", "block": block, "direction": direction}}


DIRECTION_NAMES = ("left", "right", "up", "down")


def build_goal_set(preset: str = "full") -> GoalSet:
    """
    Built-in goal sets:
        small    - 20 goals: low inventory counts, both tools, tree/stone/water adjacency
        full     - 49 goals: exact counts 1..9 of each item, both tools, adjacency of 5 block types in 4 directions
        extended - full plus every inventory range [a, b], 1 <= a < b <= 9 (157 goals)
    """
    items = ("wood", "stone", "coal")
    blocks = ("tree", "stone", "water", "coal_ore", "crafting_table")

    if preset == "small":
        specs = [_inventory_goal(i, k, k) for i, n in zip(items, (3, 2, 1)) for k in range(1, n + 1)]
        specs += [_tool_goal("wood_pickaxe"), _tool_goal("stone_pickaxe")]
        specs += [_block_goal(b, d) for b in ("tree", "stone", "water") for d in DIRECTION_NAMES]
    elif preset in ("full", "extended"):
        specs = [_inventory_goal(i, k, k) for i in items for k in range(1, MAX_COUNT + 1)]
        specs += [_tool_goal("wood_pickaxe"), _tool_goal("stone_pickaxe")]
        specs += [_block_goal(b, d) for b in blocks for d in DIRECTION_NAMES]
        if preset == "extended":
            specs += [_inventory_goal(i, a, b) for i in items
                      for a in range(1, MAX_COUNT + 1) for b in range(a + 1, MAX_COUNT + 1)]
    else:
        raise GoalError(f"unknown gridcraft goal preset {preset!r}")

    return GoalSet.from_specs(specs)


# Observations ---------------------------------------------------------------------------------

def observation_size(view_radius: int = DEFAULT_VIEW_RADIUS) -> int:
    side = 2 * view_radius + 1
    return side * side * NUM_BLOCKS + len(Item) * MAX_COUNT + len(Tool) + len(Direction)


def observe(state: WorldState, view_radius: int = DEFAULT_VIEW_RADIUS) -> np.ndarray:
    """
    Flat {0, 1} vector: one-hot blocks of the (2k+1)^2 window around the agent (out-of-bounds
    cells all zero), thermometer-coded inventory, tool flags, one-hot facing.
    """
    k = view_radius
    n, m = state.grid.shape
    padded = np.full((n + 2 * k, m + 2 * k), -1, dtype=np.int64)
    padded[k:k + n, k:k + m] = state.grid
    r, c = state.agent_pos
    window = padded[r:r + 2 * k + 1, c:c + 2 * k + 1]

    view = (window[..., None] == np.arange(NUM_BLOCKS)).reshape(-1)
    inventory = (np.arange(1, MAX_COUNT + 1)[None, :] <= np.asarray(state.inventory)[:, None]).reshape(-1)
    tools = np.asarray(state.tools, dtype=bool)
    facing = np.arange(len(Direction)) == int(state.agent_facing)

    return np.concatenate([view, inventory, tools, facing]).astype(np.float32)
