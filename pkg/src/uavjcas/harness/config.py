"""Experiment configuration: one YAML document; an empty document gives the default mission.

Sections::

    environment:  grid_width, grid_height, cell_size_m, depots, n_uavs, n_targets,
                  t_max, theta_detect, deterministic_detection, inert_counts_for_informed
    jcas:         JcasParams fields
    energy:       EnergyParams fields
    reward:       RewardWeights fields
    ppo:          PPOConfig fields
    evaluation:   policy, episodes, base_seed, workers

Unknown sections or keys raise ``ConfigError``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..energy import EnergyParams
from ..env import EnvConfig, RewardWeights
from ..errors import ConfigError
from ..phy import JcasParams
from ..policies.ppo import PPOConfig
from ..world import GridSpec

POLICY_NAMES = ("random", "constant-pilot", "adaptive-pilot", "checkpoint")

_ENV_KEYS = {
    "grid_width", "grid_height", "cell_size_m", "depots", "n_uavs", "n_targets", "t_max",
    "theta_detect", "deterministic_detection", "inert_counts_for_informed",
}


@dataclass(frozen=True)
class EvalSettings:
    policy: str = "adaptive-pilot"
    episodes: int = 100
    base_seed: int = 0
    workers: int = 1
    checkpoint: Optional[str] = None

    def __post_init__(self) -> None:
        if self.policy not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {POLICY_NAMES}")
        if self.episodes < 1:
            raise ConfigError("episodes must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    evaluation: EvalSettings = field(default_factory=EvalSettings)

    def with_env(self, **changes) -> "ExperimentConfig":
        return replace(self, env=replace(self.env, **changes))


def _build(cls, section: str, values: Dict[str, Any]):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def config_from_dict(doc: Optional[Dict[str, Any]]) -> ExperimentConfig:
    doc = dict(doc or {})
    allowed = {"environment", "jcas", "energy", "reward", "ppo", "evaluation"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    for name, body in doc.items():
        if body is not None and not isinstance(body, dict):
            raise ConfigError(f"section [{name}] must be a mapping")
    env_doc = dict(doc.get("environment") or {})
    bad = set(env_doc) - _ENV_KEYS
    if bad:
        raise ConfigError(f"unknown key(s) in [environment]: {sorted(bad)}")
    default_grid = GridSpec()
    grid = GridSpec(
        width_cells=int(env_doc.pop("grid_width", default_grid.width_cells)),
        height_cells=int(env_doc.pop("grid_height", default_grid.height_cells)),
        cell_size_m=float(env_doc.pop("cell_size_m", default_grid.cell_size_m)),
        depot_cells=tuple(tuple(c) for c in env_doc.pop("depots", default_grid.depot_cells)),
    )
    ppo_doc = dict(doc.get("ppo") or {})
    for key in ("hidden", "adam_betas"):
        if key in ppo_doc:
            ppo_doc[key] = tuple(ppo_doc[key])
    env = EnvConfig(
        grid=grid,
        phy=_build(JcasParams, "jcas", doc.get("jcas") or {}),
        energy=_build(EnergyParams, "energy", doc.get("energy") or {}),
        reward=_build(RewardWeights, "reward", doc.get("reward") or {}),
        **env_doc,
    )
    return ExperimentConfig(
        env=env,
        ppo=_build(PPOConfig, "ppo", ppo_doc),
        evaluation=_build(EvalSettings, "evaluation", doc.get("evaluation") or {}),
    )


def load_config(path=None) -> ExperimentConfig:
    if path is None:
        return config_from_dict({})
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    env = cfg.env
    return {
        "environment": {
            "grid_width": env.grid.width_cells,
            "grid_height": env.grid.height_cells,
            "cell_size_m": env.grid.cell_size_m,
            "depots": [list(c) for c in env.grid.depot_cells],
            "n_uavs": env.n_uavs,
            "n_targets": env.n_targets,
            "t_max": env.t_max,
            "theta_detect": env.theta_detect,
            "deterministic_detection": env.deterministic_detection,
            "inert_counts_for_informed": env.inert_counts_for_informed,
        },
        "jcas": dataclasses.asdict(env.phy),
        "energy": dataclasses.asdict(env.energy),
        "reward": dataclasses.asdict(env.reward),
        "ppo": {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(cfg.ppo).items()},
        "evaluation": dataclasses.asdict(cfg.evaluation),
    }
