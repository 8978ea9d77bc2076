"""Communication graph, multi-UAV detection consensus and OR knowledge propagation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import phy
from .phy import JcasParams
from .world import pairwise_distance_m


@dataclass
class CommGraph:
    adjacency: np.ndarray  # (N, N) bool, symmetric, zero diagonal
    pairwise_snr_db: np.ndarray  # (N, N) float, diagonal is +inf

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])


def build_comm_graph(uav_cells: np.ndarray, cell_size_m: float, params: JcasParams,
                     active: Optional[np.ndarray] = None) -> CommGraph:
    """Link UAVs whose pairwise comm SNR reaches ``params.comm_edge_snr_db``.

    Inactive UAVs keep their SNR entries but get no edges.
    """
    cells = np.asarray(uav_cells).reshape(-1, 2)
    n = cells.shape[0]
    dist = np.maximum(pairwise_distance_m(cells, cells, cell_size_m), params.min_range_m)
    snr = np.asarray(phy.comm_snr_db(dist, params), dtype=float).reshape(n, n)
    np.fill_diagonal(snr, np.inf)
    adj = snr >= params.comm_edge_snr_db
    np.fill_diagonal(adj, False)
    if active is not None:
        active = np.asarray(active, dtype=bool)
        adj &= active[:, None] & active[None, :]
    return CommGraph(adjacency=adj, pairwise_snr_db=snr)


@dataclass
class DetectionResult:
    local: np.ndarray  # (N, n_targets) bool, positive per-UAV detections this step
    newly_detected: np.ndarray  # (n_targets,) bool
    probabilities: np.ndarray  # (N, n_targets) detection probability, 0 where not drawn


def detection_round(uav_cells: np.ndarray, hotspot_cells: np.ndarray, already_detected: np.ndarray,
                    pilot_densities: np.ndarray, active: np.ndarray, cell_size_m: float,
                    params: JcasParams, theta_detect: int, rng: np.random.Generator,
                    deterministic: bool = False) -> DetectionResult:
    """One sensing step.

    Every active UAV draws a Bernoulli detection for every hotspot with the
    probability given by the link budget (comm load = 1 - pilot density). A
    hotspot not yet detected becomes detected when at least ``theta_detect``
    UAVs report it. The draw matrix is always consumed in full so the RNG
    stream does not depend on detection history.
    """
    if theta_detect < 1:
        raise ValueError("theta_detect must be at least 1")
    cells = np.asarray(uav_cells).reshape(-1, 2)
    targets = np.asarray(hotspot_cells).reshape(-1, 2)
    n, m = cells.shape[0], targets.shape[0]
    already = np.asarray(already_detected, dtype=bool)
    active = np.asarray(active, dtype=bool)
    if m == 0:
        empty = np.zeros((n, 0), dtype=bool)
        return DetectionResult(empty, np.zeros(0, dtype=bool), np.zeros((n, 0)))
    load = 1.0 - np.asarray(pilot_densities, dtype=float)
    dist = pairwise_distance_m(cells, targets, cell_size_m)
    p = phy.detection_probability_at(dist, load[:, None], params)
    p = np.where(active[:, None] & ~already[None, :], p, 0.0)
    u = rng.random((n, m))
    local = (p > 0.5) if deterministic else (u < p)
    newly = ~already & (local.sum(axis=0) >= theta_detect)
    return DetectionResult(local=local, newly_detected=newly, probabilities=p)


def propagate(knowledge: np.ndarray, graph: CommGraph) -> np.ndarray:
    """Repeated neighbor OR for up to N rounds, stopping early at a fixpoint."""
    k = np.asarray(knowledge, dtype=bool).copy()
    n = k.shape[0]
    if graph.adjacency.shape != (n, n):
        raise ValueError(f"graph has {graph.adjacency.shape[0]} nodes, knowledge has {n} rows")
    a = graph.adjacency.astype(np.int64)
    for _ in range(n):
        nxt = k | ((a @ k.astype(np.int64)) > 0)
        if np.array_equal(nxt, k):
            break
        k = nxt
    return k


def informed_status(knowledge: np.ndarray, detected: np.ndarray,
                    counted: Optional[np.ndarray] = None) -> np.ndarray:
    """Hotspot informed iff detected and known by every counted agent (all by default)."""
    k = np.asarray(knowledge, dtype=bool)
    if counted is not None:
        k = k[np.asarray(counted, dtype=bool)]
    return np.asarray(detected, dtype=bool) & k.all(axis=0)
