"""
Point-mass maze
---------------
A continuous 2D point mass driven by bounded accelerations inside axis-aligned walls.
Goals are points of the free space; a goal is reached when the point is within a closed
ball of radius `success_eps` around it. All operations are pure functions of their inputs.
"""
import json
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from ..utils.errors import ConfigError

MAZE_DIR = os.path.join(os.path.dirname(__file__), "mazes")


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ConfigError(f"rectangle width and height must be > 0, got {self.w}x{self.h}")

    @property
    def x_max(self) -> float:
        return self.x + self.w

    @property
    def y_max(self) -> float:
        return self.y + self.h

    def interior_contains(self, px, py):
        """Strict interior; a point on a face is outside. Vectorized over numpy inputs."""
        return (px > self.x) & (px < self.x_max) & (py > self.y) & (py < self.y_max)

    def overlaps(self, other: "Rect") -> bool:
        return self.x < other.x_max and other.x < self.x_max and self.y < other.y_max and other.y < self.y_max

    @classmethod
    def from_dict(cls, d: Dict[str, float]) -> "Rect":
        return cls(float(d["x"]), float(d["y"]), float(d["w"]), float(d["h"]))

    def to_dict(self) -> Dict[str, float]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class MazeSpec:
    """
    Static description of a maze and of the point-mass dynamics.

    Parameters:
        walls (`Tuple[Rect]`): axis-aligned wall rectangles.
        bounds (`Tuple[float, float, float, float]`): `(x_min, x_max, y_min, y_max)`.
        start_region (`Rect`): where episodes start, must be wall-free.
        success_eps (`float`): radius of the goal ball.
        dt, a_scale, drag, v_max (`float`): integration step, acceleration scale, velocity drag
            and per-axis speed limit.
        t_max (`int`): episode length.
    """

    walls: Tuple[Rect, ...]
    bounds: Tuple[float, float, float, float]
    start_region: Rect
    success_eps: float = 0.5
    dt: float = 0.1
    a_scale: float = 1.0
    drag: float = 0.1
    v_max: float = 2.0
    t_max: int = 200
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        x_min, x_max, y_min, y_max = self.bounds

        if not (x_min < x_max and y_min < y_max):
            raise ConfigError(f"invalid maze bounds {self.bounds}")
        if self.success_eps <= 0:
            raise ConfigError(f"success_eps must be > 0, got {self.success_eps}")
        s = self.start_region
        if s.x < x_min or s.x_max > x_max or s.y < y_min or s.y_max > y_max:
            raise ConfigError("start region must lie inside the maze bounds")
        if any(s.overlaps(w) for w in self.walls):
            raise ConfigError("start region intersects a wall")
        if not _free_space_connected(self):
            raise ConfigError(f"free space of maze '{self.name}' is not connected")

    def in_free_space(self, px, py):
        """Inside the (closed) bounds and outside every wall interior. Vectorized."""
        px, py = np.asarray(px, dtype=np.float64), np.asarray(py, dtype=np.float64)
        x_min, x_max, y_min, y_max = self.bounds
        free = (px >= x_min) & (px <= x_max) & (py >= y_min) & (py <= y_max)
        for wall in self.walls:
            free = free & ~wall.interior_contains(px, py)
        return free

    @classmethod
    def from_dict(cls, d: Dict[str, Any], **overrides) -> "MazeSpec":
        try:
            return cls(
                walls=tuple(Rect.from_dict(w) for w in d.get("walls", [])),
                bounds=tuple(d["bounds"]),
                start_region=Rect.from_dict(d["start_region"]),
                success_eps=float(d.get("success_eps", 0.5)),
                name=d.get("name", "custom"),
                **overrides,
            )
        except KeyError as e:
            raise ConfigError(f"maze specification is missing field {e}") from None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "bounds": list(self.bounds),
            "walls": [w.to_dict() for w in self.walls],
            "start_region": self.start_region.to_dict(),
            "success_eps": self.success_eps,
        }


def _free_space_connected(spec: MazeSpec, resolution: float = 0.25) -> bool:
    x_min, x_max, y_min, y_max = spec.bounds
    nx = max(1, int(np.ceil((x_max - x_min) / resolution)))
    ny = max(1, int(np.ceil((y_max - y_min) / resolution)))
    cx = x_min + (np.arange(nx) + 0.5) * (x_max - x_min) / nx
    cy = y_min + (np.arange(ny) + 0.5) * (y_max - y_min) / ny
    free = spec.in_free_space(cx[:, None], cy[None, :])

    cells = np.argwhere(free)
    if cells.shape[0] == 0:
        return False

    visited = np.zeros_like(free)
    queue = deque([tuple(cells[0])])
    visited[tuple(cells[0])] = True
    while queue:
        i, j = queue.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < nx and 0 <= b < ny and free[a, b] and not visited[a, b]:
                visited[a, b] = True
                queue.append((a, b))

    return bool(visited.sum() == free.sum())


def load_maze(name_or_path: str, **overrides) -> MazeSpec:
    """Loads a maze from a JSON document, or one of the built-in layouts by name ("umaze", "bigmaze")."""
    path = name_or_path
    if not os.path.exists(path):
        path = os.path.join(MAZE_DIR, f"{name_or_path}.json")
    if not os.path.exists(path):
        raise ConfigError(f"unknown maze {name_or_path!r}")
    with open(path, "r") as f:
        return MazeSpec.from_dict(json.load(f), **overrides)


@dataclass(frozen=True)
class PointState:
    """
    Point-mass state. Each velocity component lies in [-v_max, v_max] (an infinity-norm bound), so the
    speed |vel| itself can reach sqrt(2) * v_max on a diagonal.
    """

    pos: np.ndarray  # (x, y)
    vel: np.ndarray  # (vx, vy)
    step_count: int = 0


@dataclass(frozen=True)
class ContGoal:
    target: np.ndarray  # (x, y)


def sample_free_point(spec: MazeSpec, rng: np.random.Generator) -> np.ndarray:
    x_min, x_max, y_min, y_max = spec.bounds
    while True:
        p = np.array([rng.uniform(x_min, x_max), rng.uniform(y_min, y_max)])
        if spec.in_free_space(p[0], p[1]):
            return p


def reset(spec: MazeSpec, seed) -> Tuple[PointState, ContGoal]:
    rng = np.random.default_rng(seed)
    s = spec.start_region
    pos = np.array([s.x + rng.random() * s.w, s.y + rng.random() * s.h])
    goal = ContGoal(sample_free_point(spec, rng))
    return PointState(pos, np.zeros(2), 0), goal


def _sweep_axis(spec: MazeSpec, start: float, end: float, other: float, axis: int) -> Tuple[float, bool]:
    """Moves along one axis from `start` towards `end`, stopping at the first wall face or bound crossed."""

    lo_bound, hi_bound = (spec.bounds[0], spec.bounds[1]) if axis == 0 else (spec.bounds[2], spec.bounds[3])
    stop, hit = end, False

    if end > start:
        if end > hi_bound:
            stop, hit = hi_bound, True
        for w in spec.walls:
            lo, hi = (w.x, w.x_max) if axis == 0 else (w.y, w.y_max)
            o_lo, o_hi = (w.y, w.y_max) if axis == 0 else (w.x, w.x_max)
            if o_lo < other < o_hi and start <= lo < stop:
                stop, hit = lo, True
    elif end < start:
        if end < lo_bound:
            stop, hit = lo_bound, True
        for w in spec.walls:
            lo, hi = (w.x, w.x_max) if axis == 0 else (w.y, w.y_max)
            o_lo, o_hi = (w.y, w.y_max) if axis == 0 else (w.x, w.x_max)
            if o_lo < other < o_hi and stop < hi <= start:
                stop, hit = hi, True

    return stop, hit


def step(spec: MazeSpec, state: PointState, action) -> PointState:
    """
    One integration step. The action is clipped to [-1, 1] per axis, the damped velocity is clipped to
    [-v_max, v_max] per axis (not by its Euclidean norm), then x and y are swept in turn and the velocity
    component of an axis that hits a wall face or a bound is zeroed.
    """

    action = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)
    vel = np.clip(state.vel * (1.0 - spec.drag) + action * spec.a_scale, -spec.v_max, spec.v_max)

    x, y = float(state.pos[0]), float(state.pos[1])
    vx, vy = float(vel[0]), float(vel[1])

    x, hit = _sweep_axis(spec, x, x + vx * spec.dt, y, axis=0)
    if hit:
        vx = 0.0
    y, hit = _sweep_axis(spec, y, y + vy * spec.dt, x, axis=1)
    if hit:
        vy = 0.0

    return PointState(np.array([x, y]), np.array([vx, vy]), state.step_count + 1)


def success(state: PointState, goal: ContGoal, eps: float) -> bool:
    if eps <= 0:
        raise ValueError(f"Invalid epsilon value: {eps} - should be > 0.0")
    return bool(np.linalg.norm(state.pos - goal.target) <= eps)


def observe(spec: MazeSpec, state: PointState) -> np.ndarray:
    """Position scaled to [-1, 1] over the bounds and velocity scaled by v_max."""
    x_min, x_max, y_min, y_max = spec.bounds
    px = 2.0 * (state.pos[0] - x_min) / (x_max - x_min) - 1.0
    py = 2.0 * (state.pos[1] - y_min) / (y_max - y_min) - 1.0
    return np.array([px, py, state.vel[0] / spec.v_max, state.vel[1] / spec.v_max], dtype=np.float32)


OBS_DIM = 4
ACTION_DIM = 2
