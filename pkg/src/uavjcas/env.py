"""Dec-POMDP environment: joint motion and pilot-density control for a UAV team.

Each ``step`` runs a fixed sequence: decode actions, return-to-base overrides,
simultaneous moves, energy/charging/CO2, sensing consensus, comm graph,
knowledge propagation, inform/completion bookkeeping, reward, observations.
All agents share one team reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import energy as en
from . import knowledge as kn
from . import phy
from .energy import EnergyParams
from .errors import ConfigError, ProtocolError
from .phy import JcasParams
from .world import (
    DIRECTION_DELTAS,
    Direction,
    GridSpec,
    WorldState,
    nearest_depot,
    spawn_mission,
    step_toward,
)

N_NEIGHBOR_SLOTS = 4
# lower edges of the down/left/right/stay bins of u_dir
DIRECTION_EDGES = np.array([-0.6, -0.2, 0.2, 0.6])
# bin centers of u_dir, indexed by Direction
DIRECTION_ACTIONS = np.array([-0.8, -0.4, 0.0, 0.4, 0.8])


def obs_dim(n_targets: int) -> int:
    return 19 + 4 * n_targets


@dataclass(frozen=True)
class RewardWeights:
    detect: float = 7.0
    inform: float = 4.0
    complete: float = 10.0
    coverage: float = 0.5
    energy: float = 0.2
    carbon: float = 0.1
    revisit: float = 0.01
    truncation: float = 0.4
    comm: float = 0.5
    spread: float = 0.1
    shaping_distance: float = 0.1
    shaping_carbon: float = 0.05

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ConfigError(f"reward weight {name} is a magnitude and must be nonnegative")


REWARD_TERMS = (
    "detect", "inform", "complete", "coverage", "energy", "carbon", "revisit",
    "truncation", "comm", "spread", "shaping_distance", "shaping_carbon",
)


@dataclass(frozen=True)
class EnvConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    n_uavs: int = 10
    n_targets: int = 3
    t_max: int = 100
    theta_detect: int = 3
    phy: JcasParams = field(default_factory=JcasParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    reward: RewardWeights = field(default_factory=RewardWeights)
    deterministic_detection: bool = False
    inert_counts_for_informed: bool = True

    def __post_init__(self) -> None:
        if self.n_uavs < 1:
            raise ConfigError("n_uavs must be at least 1")
        if self.t_max < 1:
            raise ConfigError("t_max must be at least 1")
        if self.theta_detect < 1:
            raise ConfigError("theta_detect must be at least 1")
        free = self.grid.n_cells - len(self.grid.depot_cells)
        if not 0 <= self.n_targets <= free:
            raise ConfigError(f"n_targets={self.n_targets} does not fit {free} free cells")


def decode_action(action, params: JcasParams) -> Tuple[Direction, float]:
    """Map (u_dir, u_pilot) in [-1, 1]^2 to a motion and a pilot density.

    u_dir is split into five equal bins: up, down, left, right, stay.
    """
    a = np.asarray(action, dtype=float).reshape(2)
    if np.any(np.isnan(a)):
        raise ProtocolError(f"NaN in action {action!r}")
    u_dir, u_pilot = np.clip(a, -1.0, 1.0)
    idx = int(np.searchsorted(DIRECTION_EDGES, u_dir, side="right"))
    rho = params.pilot_min + (u_pilot + 1.0) / 2.0 * (params.pilot_max - params.pilot_min)
    return Direction(idx), float(min(max(rho, params.pilot_min), params.pilot_max))


def decode_actions(actions: np.ndarray, params: JcasParams) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actions, dtype=float).reshape(-1, 2)
    if np.any(np.isnan(a)):
        raise ProtocolError("NaN in actions")
    a = np.clip(a, -1.0, 1.0)
    dirs = np.searchsorted(DIRECTION_EDGES, a[:, 0], side="right").astype(np.int64)
    rho = params.pilot_min + (a[:, 1] + 1.0) / 2.0 * (params.pilot_max - params.pilot_min)
    return dirs, np.clip(rho, params.pilot_min, params.pilot_max)


@dataclass
class Transition:
    t: int
    directions: np.ndarray
    overridden: np.ndarray
    pilot_densities: np.ndarray
    cells: np.ndarray
    batteries: np.ndarray
    energy_kwh: np.ndarray
    charged_kwh: np.ndarray
    grid_kwh: np.ndarray
    co2_kg: float
    carbon_intensity: float
    local_detections: np.ndarray
    newly_detected: np.ndarray
    newly_informed: np.ndarray
    throughput: np.ndarray
    n_edges: int
    terms: Dict[str, float]
    reward: float
    done: bool
    truncated: bool

    def to_record(self) -> dict:
        """JSON-serializable trace row (schema ``TRACE_SCHEMA``)."""
        return {
            "t": self.t,
            "directions": [Direction(int(d)).name.lower() for d in self.directions],
            "overridden": self.overridden.astype(bool).tolist(),
            "pilot_densities": [round(float(r), 12) for r in self.pilot_densities],
            "positions": self.cells.tolist(),
            "batteries_kwh": [round(float(b), 12) for b in self.batteries],
            "energy_kwh": round(float(self.energy_kwh.sum()), 12),
            "co2_kg": round(float(self.co2_kg), 12),
            "carbon_intensity": round(float(self.carbon_intensity), 12),
            "newly_detected": np.flatnonzero(self.newly_detected).tolist(),
            "newly_informed": np.flatnonzero(self.newly_informed).tolist(),
            "n_edges": self.n_edges,
            "reward_terms": {k: round(float(v), 12) for k, v in self.terms.items()},
            "reward": round(float(self.reward), 12),
            "done": self.done,
            "truncated": self.truncated,
        }


TRACE_SCHEMA = "uavjcas.trace/1"


class UavJcasEnv:
    """Multi-UAV hotspot detection environment with shared team reward.

    Usage::

        env = UavJcasEnv(EnvConfig(n_uavs=5))
        obs = env.reset(seed=1)
        obs, reward, done, truncated, tr = env.step(actions)  # actions: (N, 2)
    """

    def __init__(self, config: EnvConfig = EnvConfig()):
        self.config = config
        self.world: Optional[WorldState] = None
        self._rng: Optional[np.random.Generator] = None
        self.done = False
        self.truncated = False

    @property
    def obs_dim(self) -> int:
        return obs_dim(self.config.n_targets)

    @property
    def active(self) -> bool:
        return self.world is not None and not (self.done or self.truncated)

    # ----------------------------------------------------------------- reset
    def reset(self, seed: int) -> np.ndarray:
        cfg = self.config
        spawn_ss, env_ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).spawn(2)
        self.world = spawn_mission(
            int(spawn_ss.generate_state(1, np.uint64)[0]), cfg.grid, cfg.n_uavs, cfg.n_targets,
            b_max_kwh=cfg.energy.b_max_kwh, pilot_min=cfg.phy.pilot_min,
        )
        self._rng = np.random.default_rng(env_ss)
        n, m = cfg.n_uavs, cfg.n_targets
        self.knowledge = np.zeros((n, m), dtype=bool)
        self.carbon_intensity = en.sample_carbon_intensity(self._rng, cfg.energy)
        self.visited = np.zeros(cfg.grid.n_cells, dtype=bool)
        for u in self.world.uavs:
            self.visited[cfg.grid.cell_index(u.cell)] = True
        self.graph = kn.build_comm_graph(self.world.uav_cells(), cfg.grid.cell_size_m, cfg.phy)
        self.throughput_obs, self.throughput_best = self._throughputs(self.graph)
        self.done = m == 0
        self.truncated = False
        return self.observations()

    # ------------------------------------------------------------------ step
    def step(self, actions) -> Tuple[np.ndarray, float, bool, bool, Transition]:
        if self.world is None:
            raise ProtocolError("step() called before reset()")
        if self.done or self.truncated:
            raise ProtocolError("step() called on a finished episode; call reset()")
        cfg, w = self.config, self.world
        grid, ep, pp = cfg.grid, cfg.energy, cfg.phy
        n = cfg.n_uavs
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (n, 2):
            raise ProtocolError(f"expected actions of shape ({n}, 2), got {actions.shape}")

        # (1) decode
        dirs, rho = decode_actions(actions, pp)
        overridden = np.zeros(n, dtype=bool)
        # (2) return-to-base and inert overrides
        for i, u in enumerate(w.uavs):
            if u.inert:
                dirs[i], rho[i], overridden[i] = Direction.STAY, pp.pilot_min, True
                continue
            if u.battery_kwh < ep.rtb_threshold_kwh:
                u.returning_to_base = True
            if u.returning_to_base:
                dirs[i] = step_toward(u.cell, nearest_depot(u.cell, grid))
                overridden[i] = True
        phi_before = self._potential()

        # (3) simultaneous moves
        old_cells = w.uav_cells()
        new_cells = old_cells + DIRECTION_DELTAS[dirs]
        off = ((new_cells[:, 0] < 0) | (new_cells[:, 0] >= grid.width_cells)
               | (new_cells[:, 1] < 0) | (new_cells[:, 1] >= grid.height_cells))
        new_cells[off] = old_cells[off]
        moved = np.any(new_cells != old_cells, axis=1)

        # (4) energy, charging, carbon
        self.carbon_intensity = en.sample_carbon_intensity(self._rng, ep)
        depots = set(grid.depot_cells)
        e = np.zeros(n)
        charged = np.zeros(n)
        at_depot = np.zeros(n, dtype=bool)
        for i, u in enumerate(w.uavs):
            u.cell = (int(new_cells[i, 0]), int(new_cells[i, 1]))
            u.pilot_density = float(rho[i])
            at_depot[i] = u.cell in depots
            if u.inert:
                continue
            e[i] = en.step_energy_kwh(bool(moved[i]), u.pilot_density, ep, pp.pilot_max)
            b_new = en.update_battery(u.battery_kwh, e[i], bool(at_depot[i]), ep)
            charged[i] = en.charged_energy_kwh(u.battery_kwh, e[i], b_new, bool(at_depot[i]))
            u.battery_kwh = b_new
            if u.returning_to_base and at_depot[i] and b_new >= ep.rtb_resume_fraction * ep.b_max_kwh:
                u.returning_to_base = False
            if b_new <= 0.0 and not at_depot[i]:
                u.inert = True
        grid_kwh = (1.0 - ep.renewable_share) * charged
        co2 = float(grid_kwh.sum() * self.carbon_intensity)
        active = np.array([not u.inert for u in w.uavs])

        # (5) sensing consensus
        detected_before = np.array([h.detected for h in w.hotspots], dtype=bool)
        det = kn.detection_round(
            new_cells, w.hotspot_cells(), detected_before, rho, active, grid.cell_size_m, pp,
            cfg.theta_detect, self._rng, deterministic=cfg.deterministic_detection,
        )
        w.t += 1
        t = w.t
        for j in np.flatnonzero(det.newly_detected):
            w.hotspots[j].detected_at = t
        detected = detected_before | det.newly_detected
        self.knowledge |= det.local & detected[None, :]

        # (6) comm graph, (7) propagation
        self.graph = kn.build_comm_graph(new_cells, grid.cell_size_m, pp, active=active)
        self.knowledge = kn.propagate(self.knowledge, self.graph)

        # (8) inform / completion
        informed_before = np.array([h.informed for h in w.hotspots], dtype=bool)
        counted = None if cfg.inert_counts_for_informed else active
        informed = kn.informed_status(self.knowledge, detected, counted) | informed_before
        newly_informed = informed & ~informed_before
        for j in np.flatnonzero(newly_informed):
            w.hotspots[j].informed_at = t
        done = bool(informed.all()) if cfg.n_targets else True
        truncated = (t >= cfg.t_max) and not done

        # (9) reward
        self.throughput_obs, self.throughput_best = self._throughputs(self.graph)
        cell_idx = new_cells[:, 1] * grid.width_cells + new_cells[:, 0]
        entering = moved
        revisits = int(np.sum(entering & self.visited[cell_idx]))
        fresh = np.unique(cell_idx[~self.visited[cell_idx]])
        self.visited[fresh] = True
        rw = cfg.reward
        if detected.any():
            spread = float(self.knowledge[:, detected].mean(axis=0).mean())
        else:
            spread = 0.0
        terms = {
            "detect": rw.detect * int(det.newly_detected.sum()),
            "inform": rw.inform * int(newly_informed.sum()),
            "complete": rw.complete * float(done and cfg.n_targets > 0),
            "coverage": rw.coverage * len(fresh) / grid.n_cells,
            "energy": -rw.energy * float(e.sum()),
            "carbon": -rw.carbon * co2,
            "revisit": -rw.revisit * revisits,
            "truncation": -rw.truncation * float(truncated),
            "comm": rw.comm * float(self.throughput_best.mean()),
            "spread": rw.spread * spread,
            "shaping_distance": self._potential() - phi_before,
            "shaping_carbon": -rw.shaping_carbon * self.carbon_intensity * int(np.sum(charged > 0)),
        }
        reward = float(sum(terms.values()))
        self.done, self.truncated = done, truncated

        tr = Transition(
            t=t, directions=dirs, overridden=overridden, pilot_densities=rho, cells=new_cells,
            batteries=np.array([u.battery_kwh for u in w.uavs]), energy_kwh=e,
            charged_kwh=charged, grid_kwh=grid_kwh, co2_kg=co2,
            carbon_intensity=self.carbon_intensity, local_detections=det.local,
            newly_detected=det.newly_detected, newly_informed=newly_informed,
            throughput=self.throughput_best.copy(), n_edges=int(self.graph.adjacency.sum() // 2),
            terms=terms, reward=reward, done=done, truncated=truncated,
        )
        # (10) observations
        return self.observations(), reward, done, truncated, tr

    # --------------------------------------------------------------- helpers
    def potential(self) -> float:
        return self._potential()

    def _potential(self) -> float:
        """Shaping potential: minus scaled mean normalized distance to the nearest undetected hotspot."""
        w, cfg = self.world, self.config
        undetected = [h.cell for h in w.hotspots if not h.detected]
        if not undetected:
            return 0.0
        cells = w.uav_cells()
        targets = np.array(undetected)
        man = np.abs(cells[:, None, :] - targets[None, :, :]).sum(axis=-1).min(axis=1)
        norm = cfg.grid.width_cells + cfg.grid.height_cells
        return -cfg.reward.shaping_distance * float(man.mean()) / norm

    def _throughputs(self, graph: kn.CommGraph) -> Tuple[np.ndarray, np.ndarray]:
        """Per-agent (mean over neighbors, best neighbor) normalized throughput."""
        n = graph.n
        pp = self.config.phy
        load = 1.0 - np.array([u.pilot_density for u in self.world.uavs])
        snr = np.where(graph.adjacency, graph.pairwise_snr_db, -np.inf)
        eff = np.log2(1.0 + phy.db_to_linear(snr)) / pp.ref_spectral_eff_bits_per_s_hz
        deg = graph.adjacency.sum(axis=1)
        mean = np.where(deg > 0, eff.sum(axis=1) / np.maximum(deg, 1), 0.0) * load
        best = (eff.max(axis=1) if n else np.zeros(0)) * load
        return mean, best

    def observations(self) -> np.ndarray:
        return np.stack([self.build_observation(i) for i in range(self.config.n_uavs)])

    def build_observation(self, i: int) -> np.ndarray:
        """Flat observation of agent ``i``; length ``19 + 4 * n_targets``.

        Layout: position (2), battery (1), pilot (1), throughput (1), per hotspot
        (dx, dy, detected, known) x n_targets, 4 nearest neighbors (dx, dy) x 4,
        connectivity (1), carbon intensity (1), depot distance (1),
        fraction detected (1), fraction informed (1), time (1).
        """
        cfg, w = self.config, self.world
        g, pp, ep = cfg.grid, cfg.phy, cfg.energy
        W, H = g.width_cells, g.height_cells
        n, m = cfg.n_uavs, cfg.n_targets
        u = w.uavs[i]
        x, y = u.cell
        out = np.zeros(obs_dim(m))
        out[0] = x / max(W - 1, 1)
        out[1] = y / max(H - 1, 1)
        out[2] = u.battery_kwh / ep.b_max_kwh
        out[3] = (u.pilot_density - pp.pilot_min) / (pp.pilot_max - pp.pilot_min)
        out[4] = self.throughput_obs[i]
        k = 5
        for j, h in enumerate(w.hotspots):
            out[k:k + 4] = ((h.cell[0] - x) / W, (h.cell[1] - y) / H,
                            float(h.detected), float(self.knowledge[i, j]))
            k += 4
        nbrs = self.graph.neighbors(i)
        if len(nbrs):
            cells = w.uav_cells()
            d2 = ((cells[nbrs] - cells[i]) ** 2).sum(axis=1)
            order = nbrs[np.lexsort((nbrs, d2))][:N_NEIGHBOR_SLOTS]
            for s, j in enumerate(order):
                out[k + 2 * s] = (cells[j, 0] - x) / W
                out[k + 2 * s + 1] = (cells[j, 1] - y) / H
        k += 2 * N_NEIGHBOR_SLOTS
        out[k] = len(nbrs) / (n - 1) if n > 1 else 0.0
        span = ep.carbon_intensity_max - ep.carbon_intensity_min
        out[k + 1] = (self.carbon_intensity - ep.carbon_intensity_min) / span if span > 0 else 0.0
        dep = nearest_depot(u.cell, g)
        out[k + 2] = (abs(dep[0] - x) + abs(dep[1] - y)) / (W + H)
        if m:
            out[k + 3] = sum(h.detected for h in w.hotspots) / m
            out[k + 4] = sum(h.informed for h in w.hotspots) / m
        out[k + 5] = w.t / cfg.t_max
        return out
