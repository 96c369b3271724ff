import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .goal_set import GoalSet
from ..envs.pointmaze import MazeSpec
from ..utils.errors import GoalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantGrid:
    """
    Regular grid of candidate goal positions. Cell (i, j) is centered at
    `origin + ((i + 0.5) * h, (j + 0.5) * h)`; valid cells (center in free space)
    get dense goal ids in row-major (i, then j) order.
    """

    origin: Tuple[float, float]
    spacing: float
    dims: Tuple[int, int]
    valid_mask: np.ndarray  # bool [nx, ny]

    def __post_init__(self):
        if self.spacing <= 0:
            raise GoalError(f"grid spacing must be > 0, got {self.spacing}")
        if self.valid_mask.shape != tuple(self.dims):
            raise GoalError(f"valid mask shape {self.valid_mask.shape} does not match dims {self.dims}")
        if not self.valid_mask.any():
            raise GoalError("quantization grid has no valid cell")

        cells = np.argwhere(self.valid_mask)  # row-major order
        ids = -np.ones(self.dims, dtype=np.int64)
        ids[cells[:, 0], cells[:, 1]] = np.arange(cells.shape[0])
        centers = np.asarray(self.origin) + (cells + 0.5) * self.spacing

        object.__setattr__(self, "_cell_ids", ids)
        object.__setattr__(self, "_cells", cells)
        object.__setattr__(self, "centers", centers)

    @classmethod
    def from_maze(cls, spec: MazeSpec, spacing: float, strict: bool = False) -> "QuantGrid":
        """
        Uniform grid of cell size `spacing` over the maze bounds, keeping the cells whose center is free.

        The bound extents and every wall face should sit on a multiple of `spacing` from the origin,
        otherwise goals next to a wall or a bound may snap further than h/2 per axis. A misaligned grid is
        a warning, or a `GoalError` when `strict` is set.
        """

        if spacing <= 0:
            raise GoalError(f"grid spacing must be > 0, got {spacing}")
        x_min, x_max, y_min, y_max = spec.bounds
        nx = int(math.ceil((x_max - x_min) / spacing - 1e-9))
        ny = int(math.ceil((y_max - y_min) / spacing - 1e-9))
        cx = x_min + (np.arange(nx) + 0.5) * spacing
        cy = y_min + (np.arange(ny) + 0.5) * spacing
        valid = spec.in_free_space(cx[:, None], cy[None, :])

        def on_grid(offsets):
            return all(abs(v / spacing - round(v / spacing)) < 1e-9 for v in offsets)

        misaligned = []
        if not on_grid((x_max - x_min, y_max - y_min)):
            misaligned.append("bounds")
        if not on_grid(v for w in spec.walls for v in (w.x - x_min, w.x_max - x_min, w.y - y_min, w.y_max - y_min)):
            misaligned.append("walls")
        if misaligned:
            msg = (f"{' and '.join(misaligned)} of maze '{spec.name}' are not aligned with a grid of spacing "
                   f"{spacing}: goals next to them may snap further than h/2 per axis")
            if strict:
                raise GoalError(msg)
            logger.warning(msg)

        return cls((x_min, y_min), float(spacing), (nx, ny), valid)

    def __len__(self) -> int:
        return self._cells.shape[0]

    def goal_set(self) -> GoalSet:
        specs = []
        for (i, j), (x, y) in zip(self._cells, self.centers):
            specs.append({"name": f"grid/x{i}_y{j}", "category": "position",
                          "predicate": {"kind": "ball", "x": float(x), "y": float(y)}})
        return GoalSet.from_specs(specs)


def quantize_goal(target, grid: QuantGrid) -> int:
    """Id of the valid cell whose center is nearest (Euclidean) to `target`."""

    if len(grid) == 0:
        raise GoalError("quantization grid has no valid cell")

    target = np.asarray(getattr(target, "target", target), dtype=np.float64)
    i, j = np.floor((target - np.asarray(grid.origin)) / grid.spacing).astype(np.int64)

    # The containing cell is the nearest center of the unconstrained grid.
    if 0 <= i < grid.dims[0] and 0 <= j < grid.dims[1] and grid._cell_ids[i, j] >= 0:
        return int(grid._cell_ids[i, j])

    dist = ((grid.centers - target) ** 2).sum(axis=1)
    return int(np.argmin(dist))


def quantization_adequacy(grid: QuantGrid, eps: float, eps_reach: float) -> bool:
    """
    True when reaching the quantized goal within `eps_reach` guarantees reaching any continuous
    goal of that cell within `eps`: h * sqrt(2) / 2 + eps_reach <= eps.
    """
    if eps <= 0:
        raise ValueError(f"Invalid epsilon value: {eps} - should be > 0.0")
    return grid.spacing * math.sqrt(2.0) / 2.0 + eps_reach <= eps


def achieved_grid_goals(pos: np.ndarray, grid: QuantGrid, eps_reach: float) -> np.ndarray:
    """Bitmask over grid goals whose center lies within `eps_reach` of `pos` (closed ball)."""
    pos = np.asarray(pos, dtype=np.float64)
    return ((grid.centers - pos) ** 2).sum(axis=-1) <= eps_reach * eps_reach
