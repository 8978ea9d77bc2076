"""Scripted baseline policies that act on the environment observation vector."""

from __future__ import annotations

import numpy as np

from ..env import DIRECTION_ACTIONS
from ..world import Direction


def random_policy(obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = np.atleast_2d(obs).shape[0]
    return rng.uniform(-1.0, 1.0, size=(n, 2))


class RandomPolicy:
    name = "random"

    def __call__(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return random_policy(obs, rng)


def lawnmower_direction(x: int, y: int, width: int, height: int) -> Direction:
    """Boustrophedon sweep: even rows go right, odd rows go left, drop a row at the edge.

    Stateless; the final cell of the sweep maps to STAY.
    """
    going_right = y % 2 == 0
    at_edge = x >= width - 1 if going_right else x <= 0
    if not at_edge:
        return Direction.RIGHT if going_right else Direction.LEFT
    if y < height - 1:
        return Direction.DOWN
    return Direction.STAY


class SweepPolicy:
    """Lawnmower coverage with either a fixed or an adaptive pilot density.

    ``constant_pilot`` always requests the top pilot density (0.30 with the
    default bounds). ``adaptive_pilot`` requests it only while some hotspot the
    agent does not yet know is within ``near_cells`` cells, and otherwise drops
    to ``far_pilot`` to free resources for data.
    """

    def __init__(self, mode: str, width: int, height: int, n_targets: int,
                 pilot_min: float = 0.01, pilot_max: float = 0.30,
                 far_pilot: float = 0.05, near_cells: float = 3.0):
        if mode not in ("constant_pilot", "adaptive_pilot"):
            raise ValueError(f"unknown sweep mode {mode!r}")
        self.mode = mode
        self.name = mode.replace("_", "-")
        self.width, self.height, self.n_targets = width, height, n_targets
        self.near_cells = near_cells
        self._u_far = 2.0 * (far_pilot - pilot_min) / (pilot_max - pilot_min) - 1.0

    def __call__(self, obs: np.ndarray, rng: np.random.Generator = None) -> np.ndarray:
        obs = np.atleast_2d(obs)
        out = np.empty((obs.shape[0], 2))
        for i, o in enumerate(obs):
            out[i] = self.act(o)
        return out

    def act(self, o: np.ndarray) -> np.ndarray:
        W, H = self.width, self.height
        x = int(round(o[0] * max(W - 1, 1)))
        y = int(round(o[1] * max(H - 1, 1)))
        u_dir = DIRECTION_ACTIONS[lawnmower_direction(x, y, W, H)]
        if self.mode == "constant_pilot":
            return np.array([u_dir, 1.0])
        block = o[5:5 + 4 * self.n_targets].reshape(-1, 4)
        unknown = block[block[:, 3] < 0.5]
        near = False
        if len(unknown):
            dist = np.hypot(unknown[:, 0] * W, unknown[:, 1] * H)
            near = bool(dist.min() <= self.near_cells + 1e-9)
        return np.array([u_dir, 1.0 if near else self._u_far])
