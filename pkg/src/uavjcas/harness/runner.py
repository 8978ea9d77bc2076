"""Episode rollouts, Monte Carlo sweeps and metrics CSV output."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..env import TRACE_SCHEMA, EnvConfig, UavJcasEnv
from ..errors import ConfigError, ProtocolError
from ..policies.heuristics import RandomPolicy, SweepPolicy
from ..policies.mlp import MlpPolicy, load_weights

MASK64 = (1 << 64) - 1

METRICS_COLUMNS = (
    "policy", "n_uavs", "n_targets", "episodes", "success_rate", "success_se",
    "mean_mission_time", "mean_energy_kwh", "mean_co2_kg", "mean_norm_throughput",
)
METRIC_FIELDS = ("success", "mission_time", "total_energy_kwh", "total_co2_kg",
                 "mean_normalized_throughput", "total_return")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def episode_seed(base_seed: int, index: int) -> int:
    return splitmix64((splitmix64(base_seed & MASK64) + index) & MASK64)


@dataclass
class EpisodeMetrics:
    success: bool
    mission_time: int
    total_energy_kwh: float
    total_co2_kg: float
    mean_normalized_throughput: float
    total_return: float
    detections_timeline: List[Tuple[int, int]] = field(default_factory=list)


def make_policy(name: str, env_config: EnvConfig, checkpoint: Optional[str] = None,
                deterministic: bool = True):
    g, pp = env_config.grid, env_config.phy
    if name == "random":
        return RandomPolicy()
    if name in ("constant-pilot", "adaptive-pilot"):
        return SweepPolicy(name.replace("-", "_"), g.width_cells, g.height_cells,
                           env_config.n_targets, pp.pilot_min, pp.pilot_max)
    if name == "checkpoint":
        if checkpoint is None:
            raise ConfigError("policy 'checkpoint' needs a checkpoint path")
        return MlpPolicy(load_weights(checkpoint), deterministic=deterministic)
    raise ConfigError(f"unknown policy {name!r}")


def run_episode(config: EnvConfig, policy: Callable, seed: int,
                trace_path: Optional[Path] = None, trace_meta: Optional[dict] = None) -> EpisodeMetrics:
    """Drive one episode to completion or truncation and aggregate its metrics."""
    env = UavJcasEnv(config)
    obs = env.reset(seed)
    rng = np.random.default_rng(splitmix64(seed ^ 0x5DEECE66D))
    energy = co2 = ret = 0.0
    throughput: List[float] = []
    timeline: List[Tuple[int, int]] = []
    records = []
    while env.active:
        actions = policy(obs, rng)
        try:
            obs, reward, done, truncated, tr = env.step(actions)
        except ProtocolError as exc:
            raise ProtocolError(f"episode seed {seed}, t={env.world.t}: {exc}") from exc
        energy += float(tr.energy_kwh.sum())
        co2 += tr.co2_kg
        ret += reward
        throughput.append(float(tr.throughput.mean()))
        timeline.extend((tr.t, int(j)) for j in np.flatnonzero(tr.newly_detected))
        if trace_path is not None:
            records.append(tr.to_record())
    if trace_path is not None:
        header = {"schema": TRACE_SCHEMA, "episode_seed": seed, **(trace_meta or {})}
        with open(trace_path, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return EpisodeMetrics(
        success=bool(env.done),
        mission_time=int(env.world.t),
        total_energy_kwh=energy,
        total_co2_kg=co2,
        mean_normalized_throughput=float(np.mean(throughput)) if throughput else 0.0,
        total_return=ret,
        detections_timeline=timeline,
    )


def _episode_job(args) -> EpisodeMetrics:
    config, policy_name, checkpoint, seed, trace_path, meta = args
    policy = make_policy(policy_name, config, checkpoint)
    return run_episode(config, policy, seed, trace_path, meta)


def run_episodes(config: EnvConfig, policy_name: str, episodes: int, base_seed: int,
                 workers: int = 1, checkpoint: Optional[str] = None,
                 trace_dir: Optional[Path] = None) -> List[EpisodeMetrics]:
    """Episodes ``0..episodes-1`` with seeds derived from ``base_seed``, in index order."""
    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for k in range(episodes):
        path = None
        if trace_dir is not None:
            path = trace_dir / f"{policy_name}_n{config.n_uavs}_t{config.n_targets}_ep{k:05d}.jsonl"
        meta = {"policy": policy_name, "episode_index": k, "n_uavs": config.n_uavs,
                "n_targets": config.n_targets}
        jobs.append((config, policy_name, checkpoint, episode_seed(base_seed, k), path, meta))
    if workers <= 1:
        return [_episode_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode_job, jobs, chunksize=max(1, episodes // (4 * workers))))


def summarize(policy: str, config: EnvConfig, metrics: Sequence[EpisodeMetrics]) -> Dict[str, float]:
    """Mean and standard error of every per-episode metric."""
    row: Dict[str, float] = {"policy": policy, "n_uavs": config.n_uavs,
                             "n_targets": config.n_targets, "episodes": len(metrics)}
    m = len(metrics)
    for name in METRIC_FIELDS:
        vals = np.array([float(getattr(e, name)) for e in metrics])
        row[f"mean_{name}"] = float(vals.mean())
        row[f"se_{name}"] = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return row


def to_csv_row(row: Dict[str, float]) -> Dict[str, object]:
    return {
        "policy": row["policy"],
        "n_uavs": row["n_uavs"],
        "n_targets": row["n_targets"],
        "episodes": row["episodes"],
        "success_rate": row["mean_success"],
        "success_se": row["se_success"],
        "mean_mission_time": row["mean_mission_time"],
        "mean_energy_kwh": row["mean_total_energy_kwh"],
        "mean_co2_kg": row["mean_total_co2_kg"],
        "mean_norm_throughput": row["mean_mean_normalized_throughput"],
    }


def evaluate_sweep(base: EnvConfig, policies: Iterable[str], n_uavs: Iterable[int],
                   n_targets: Iterable[int], episodes: int, base_seed: int, workers: int = 1,
                   checkpoint: Optional[str] = None, trace_dir: Optional[Path] = None) -> List[Dict]:
    """Cross product of policies x fleet sizes x hotspot counts.

    Every cell reuses the same episode seeds, so cells differ only in the
    factor being varied.
    """
    rows = []
    for policy in policies:
        for n in n_uavs:
            for m in n_targets:
                cfg = replace(base, n_uavs=int(n), n_targets=int(m))
                metrics = run_episodes(cfg, policy, episodes, base_seed, workers, checkpoint, trace_dir)
                rows.append(summarize(policy, cfg, metrics))
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def write_metrics_csv(rows: Sequence[Dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for row in rows:
            r = to_csv_row(row)
            w.writerow([_fmt(r[c]) for c in METRICS_COLUMNS])
