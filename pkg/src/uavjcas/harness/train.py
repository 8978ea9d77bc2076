"""PPO training loop with CSV iteration log and resumable checkpoints."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..env import UavJcasEnv
from ..errors import TrainingError
from ..policies.mlp import PolicyWeights, load_checkpoint, save_checkpoint
from ..policies.ppo import Adam, collect_rollout, ppo_update
from .config import ExperimentConfig
from .runner import episode_seed, splitmix64

log = logging.getLogger(__name__)

LOG_COLUMNS = ("iteration", "env_steps", "episodes", "mean_return", "policy_loss",
               "value_loss", "entropy", "approx_kl", "clip_fraction")
LATEST = "latest.ckpt"


def _iteration_seed(seed: int, iteration: int, stream: int) -> int:
    return splitmix64(episode_seed(seed, iteration) ^ stream)


def _save(path: Path, weights: PolicyWeights, opt: Adam, iteration: int, seed: int) -> None:
    arrays = dict(weights.params)
    arrays.update(opt.state())
    save_checkpoint(path, arrays, {"iteration": iteration, "seed": seed,
                                   "hidden": list(weights.hidden), "obs_dim": weights.obs_dim})


def train(cfg: ExperimentConfig, iterations: int, seed: int, checkpoint_dir, checkpoint_every: int = 10,
          resume: bool = False, log_path=None) -> List[dict]:
    """Run PPO iterations ``1..iterations``; returns the iteration log rows.

    Each iteration's sampling and minibatch order derive only from (seed,
    iteration), so a run resumed from a checkpoint reproduces the same log
    as an uninterrupted one. On a non-finite loss the last good checkpoint is
    kept and ``TrainingError`` propagates.
    """
    ckdir = Path(checkpoint_dir)
    ckdir.mkdir(parents=True, exist_ok=True)
    log_path = Path(log_path) if log_path else ckdir / "train_log.csv"
    env = UavJcasEnv(cfg.env)
    ppo = cfg.ppo
    start = 1
    weights = PolicyWeights.init(env.obs_dim, ppo.hidden, seed=splitmix64(seed),
                                 log_std=ppo.init_log_std)
    opt = Adam(weights, ppo.learning_rate, ppo.adam_betas, ppo.adam_eps)
    rows: List[dict] = []
    if resume and (ckdir / LATEST).exists():
        arrays, meta = load_checkpoint(ckdir / LATEST)
        weights = PolicyWeights({k: v for k, v in arrays.items() if not k.startswith("adam_")})
        opt = Adam(weights, ppo.learning_rate, ppo.adam_betas, ppo.adam_eps)
        opt.load_state(arrays)
        start = int(meta["iteration"]) + 1
        if log_path.exists():
            with open(log_path) as fh:
                rows = [r for r in csv.DictReader(fh) if int(r["iteration"]) < start]
    else:
        _save(ckdir / "iter_0000.ckpt", weights, opt, 0, seed)
        _save(ckdir / LATEST, weights, opt, 0, seed)

    for it in range(start, iterations + 1):
        rng = np.random.default_rng(_iteration_seed(seed, it, 1))
        ep_base = _iteration_seed(seed, it, 2)
        batch, returns = collect_rollout(env, weights, ppo.batch_env_steps, rng,
                                         lambda k: episode_seed(ep_base, k), ppo)
        try:
            weights, diag = ppo_update(batch, weights, ppo, rng, opt)
        except TrainingError:
            log.error("iteration %d diverged; keeping %s", it, ckdir / LATEST)
            raise
        row = {
            "iteration": it,
            "env_steps": ppo.batch_env_steps,
            "episodes": len(returns),
            "mean_return": float(np.mean(returns)) if returns else math.nan,
            **{k: diag.get(k, math.nan) for k in LOG_COLUMNS[4:]},
        }
        rows.append(row)
        log.info("iter %d  return %.3f  kl %.4f  clip %.3f", it, row["mean_return"],
                 row["approx_kl"], row["clip_fraction"])
        if checkpoint_every and it % checkpoint_every == 0:
            _save(ckdir / f"iter_{it:04d}.ckpt", weights, opt, it, seed)
        _save(ckdir / LATEST, weights, opt, it, seed)
        _write_log(log_path, rows)
    _write_log(log_path, rows)
    return rows


def _write_log(path: Path, rows: List[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in rows:
            w.writerow([_cell(r[c]) for c in LOG_COLUMNS])


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)
