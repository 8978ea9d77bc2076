"""Grid geometry, mission spawning and UAV kinematics.

Axis convention: origin at the top-left cell, x grows to the right and y grows
downward, so ``up`` decreases y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

Cell = Tuple[int, int]


class Direction(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


# (dx, dy) per Direction value
DIRECTION_DELTAS = np.array([(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)], dtype=np.int64)


@dataclass(frozen=True)
class GridSpec:
    width_cells: int = 12
    height_cells: int = 12
    cell_size_m: float = 50.0
    depot_cells: Tuple[Cell, ...] = ((0, 0),)

    def __post_init__(self) -> None:
        if self.width_cells < 1 or self.height_cells < 1:
            raise ConfigError("grid must be at least 1x1")
        if not self.cell_size_m > 0:
            raise ConfigError("cell_size_m must be positive")
        depots = tuple(tuple(int(v) for v in c) for c in self.depot_cells)
        if not depots:
            raise ConfigError("at least one depot cell is required")
        for c in depots:
            if not self.contains(c):
                raise ConfigError(f"depot {c} lies outside the {self.width_cells}x{self.height_cells} grid")
        if len(set(depots)) != len(depots):
            raise ConfigError("duplicate depot cells")
        object.__setattr__(self, "depot_cells", depots)

    @property
    def n_cells(self) -> int:
        return self.width_cells * self.height_cells

    def contains(self, cell: Sequence[int]) -> bool:
        x, y = cell
        return 0 <= x < self.width_cells and 0 <= y < self.height_cells

    def cell_index(self, cell: Sequence[int]) -> int:
        return int(cell[1]) * self.width_cells + int(cell[0])


@dataclass
class UavState:
    cell: Cell
    battery_kwh: float
    pilot_density: float
    returning_to_base: bool = False
    inert: bool = False


@dataclass
class Hotspot:
    cell: Cell
    detected_at: Optional[int] = None
    informed_at: Optional[int] = None

    @property
    def detected(self) -> bool:
        return self.detected_at is not None

    @property
    def informed(self) -> bool:
        return self.informed_at is not None


@dataclass
class WorldState:
    grid: GridSpec
    uavs: List[UavState]
    hotspots: List[Hotspot]
    t: int = 0

    @property
    def n_uavs(self) -> int:
        return len(self.uavs)

    @property
    def n_targets(self) -> int:
        return len(self.hotspots)

    def uav_cells(self) -> np.ndarray:
        return np.array([u.cell for u in self.uavs], dtype=np.int64).reshape(-1, 2)

    def hotspot_cells(self) -> np.ndarray:
        return np.array([h.cell for h in self.hotspots], dtype=np.int64).reshape(-1, 2)


def spawn_mission(seed: int, grid: GridSpec, n_uavs: int, n_targets: int,
                  b_max_kwh: float = 0.20, pilot_min: float = 0.01) -> WorldState:
    """Place hotspots uniformly on distinct non-depot cells; park every UAV at the first depot."""
    if n_uavs < 1:
        raise ConfigError("need at least one UAV")
    depots = set(grid.depot_cells)
    free = [(x, y) for y in range(grid.height_cells) for x in range(grid.width_cells)
            if (x, y) not in depots]
    if not 0 <= n_targets <= len(free):
        raise ConfigError(f"cannot place {n_targets} hotspots on {len(free)} free cells")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(free), size=n_targets, replace=False) if n_targets else []
    hotspots = [Hotspot(cell=free[int(k)]) for k in picks]
    start = grid.depot_cells[0]
    uavs = [UavState(cell=start, battery_kwh=b_max_kwh, pilot_density=pilot_min) for _ in range(n_uavs)]
    return WorldState(grid=grid, uavs=uavs, hotspots=hotspots)


def apply_move(cell: Cell, direction: Direction, grid: GridSpec) -> Cell:
    dx, dy = DIRECTION_DELTAS[int(direction)]
    nx, ny = cell[0] + int(dx), cell[1] + int(dy)
    if not grid.contains((nx, ny)):
        return (int(cell[0]), int(cell[1]))
    return (nx, ny)


def cell_distance_m(a: Sequence[int], b: Sequence[int], d: float) -> float:
    return d * math.hypot(a[0] - b[0], a[1] - b[1])


def pairwise_distance_m(a: np.ndarray, b: np.ndarray, d: float) -> np.ndarray:
    """Euclidean distances between two cell arrays of shape (n, 2) and (m, 2)."""
    diff = a[:, None, :].astype(float) - b[None, :, :].astype(float)
    return d * np.sqrt((diff**2).sum(axis=-1))


def manhattan(a: Sequence[int], b: Sequence[int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def nearest_depot(cell: Cell, grid: GridSpec) -> Cell:
    return min(grid.depot_cells, key=lambda c: (manhattan(cell, c), c[1], c[0]))


def step_toward(cell: Cell, target: Cell) -> Direction:
    """Greedy Manhattan step, horizontal first."""
    if target[0] < cell[0]:
        return Direction.LEFT
    if target[0] > cell[0]:
        return Direction.RIGHT
    if target[1] < cell[1]:
        return Direction.UP
    if target[1] > cell[1]:
        return Direction.DOWN
    return Direction.STAY
