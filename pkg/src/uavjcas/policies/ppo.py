"""Synchronous PPO with GAE for the shared UAV policy.

One iteration collects ``batch_env_steps`` environment steps (each step yields
one sample per agent), computes advantages per agent stream, then runs
``epochs`` passes of minibatch Adam updates on the clipped surrogate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from ..errors import TrainingError
from .mlp import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    PolicyWeights,
    gaussian_entropy,
    gaussian_log_prob,
    mlp_backward,
    mlp_forward,
    sample_actions,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.95
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    batch_env_steps: int = 4096
    minibatch_size: int = 256
    epochs: int = 10
    clip_ratio: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64, 64)
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    init_log_std: float = -0.5


def compute_gae(rewards, values, dones, gamma: float, lam: float):
    """Generalized advantage estimates and returns.

    ``rewards`` and ``dones`` have T rows; ``values`` has T + 1 rows, the last
    being the bootstrap value for the state after the final step. Extra
    trailing axes (e.g. one column per agent) are processed independently.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=float)
    T = r.shape[0]
    if v.shape[0] != T + 1:
        raise ValueError(f"values needs {T + 1} rows (bootstrap appended), got {v.shape[0]}")
    adv = np.zeros_like(r)
    last = np.zeros_like(r[0]) if T else 0.0
    for t in reversed(range(T)):
        nonterminal = 1.0 - d[t]
        delta = r[t] + gamma * v[t + 1] * nonterminal - v[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + v[:T]


@dataclass
class RolloutBatch:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    values: np.ndarray
    rewards: Optional[np.ndarray] = None
    dones: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.obs.shape[0]


class Adam:
    def __init__(self, weights: PolicyWeights, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = {k: np.zeros_like(v) for k, v in weights.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in weights.params.items()}
        self.t = 0

    def step(self, weights: PolicyWeights, grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            weights.params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)

    def state(self) -> Dict[str, np.ndarray]:
        out = {f"adam_m.{k}": v for k, v in self.m.items()}
        out.update({f"adam_v.{k}": v for k, v in self.v.items()})
        out["adam_t"] = np.array([float(self.t)])
        return out

    def load_state(self, arrays: Dict[str, np.ndarray]) -> None:
        for k in self.m:
            self.m[k] = arrays[f"adam_m.{k}"].copy()
            self.v[k] = arrays[f"adam_v.{k}"].copy()
        self.t = int(arrays["adam_t"][0])


def ppo_loss_and_grads(weights: PolicyWeights, obs, actions, old_log_probs, advantages, returns,
                       cfg: PPOConfig):
    """Clipped-surrogate PPO loss on one minibatch, with its parameter gradients."""
    n = obs.shape[0]
    mean, log_std, value, cache = mlp_forward(obs, weights, return_cache=True)
    logp = gaussian_log_prob(actions, mean, log_std)
    ratio = np.exp(logp - old_log_probs)
    clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    value_loss = 0.5 * np.mean((value - returns) ** 2)
    entropy = gaussian_entropy(log_std)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy

    # gradient flows through the unclipped branch only where it is the active minimum
    active = (surr1 <= surr2).astype(float)
    d_logp = -(active * ratio * advantages) / n
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    d_mean = d_logp[:, None] * diff * inv_var
    d_log_std = (d_logp[:, None] * (diff**2 * inv_var - 1.0)).sum(axis=0) - cfg.entropy_coef
    d_value = cfg.value_coef * (value - returns) / n
    grads = mlp_backward(weights, cache, d_mean, d_value, d_log_std)
    diag = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean(old_log_probs - logp)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_ratio)),
    }
    return loss, grads, diag


def ppo_update(batch: RolloutBatch, weights: PolicyWeights, cfg: PPOConfig,
               rng: np.random.Generator, optimizer: Optional[Adam] = None):
    """Run ``cfg.epochs`` passes of minibatch updates and return (new_weights, diagnostics).

    The input weights are left untouched; a non-finite loss raises
    ``TrainingError`` and discards the partial update.
    """
    new = weights.copy()
    opt = optimizer if optimizer is not None else Adam(new, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
    adv = np.asarray(batch.advantages, dtype=float)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8) if adv.size > 1 else adv - adv.mean()
    n = len(batch)
    mb = min(cfg.minibatch_size, n)
    history: List[dict] = []
    saved_opt = (opt.m, opt.v, opt.t)
    opt.m = {k: v.copy() for k, v in opt.m.items()}
    opt.v = {k: v.copy() for k, v in opt.v.items()}
    try:
        for _ in range(cfg.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, mb):
                idx = perm[start:start + mb]
                loss, grads, diag = ppo_loss_and_grads(
                    new, batch.obs[idx], batch.actions[idx], batch.log_probs[idx], adv[idx],
                    batch.returns[idx], cfg,
                )
                if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise TrainingError(f"non-finite PPO loss ({loss})")
                norm = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
                if cfg.max_grad_norm and norm > cfg.max_grad_norm:
                    scale = cfg.max_grad_norm / (norm + 1e-12)
                    grads = {k: g * scale for k, g in grads.items()}
                opt.step(new, grads)
                new.params["log_std"] = np.clip(new.params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
                diag["grad_norm"] = norm
                history.append(diag)
    except TrainingError:
        opt.m, opt.v, opt.t = saved_opt
        raise
    if not new.is_finite():
        opt.m, opt.v, opt.t = saved_opt
        raise TrainingError("update produced non-finite weights")
    summary = {k: float(np.mean([h[k] for h in history])) for k in history[0]} if history else {}
    if history:
        summary["approx_kl"] = history[-1]["approx_kl"]
        summary["clip_fraction"] = float(np.mean([h["clip_fraction"] for h in history]))
    return new, summary


def collect_rollout(env, weights: PolicyWeights, n_env_steps: int, rng: np.random.Generator,
                    seed_fn: Callable[[int], int], cfg: PPOConfig):
    """Run the shared policy for ``n_env_steps`` steps, resetting on episode end.

    Returns a ``RolloutBatch`` with one row per (step, agent) and the list of
    completed episode team returns. Truncated episodes are bootstrapped by
    folding gamma * V(s_T) into the final reward and marking the step terminal.
    """
    n = env.config.n_uavs
    T = n_env_steps
    obs_buf = np.zeros((T, n, env.obs_dim))
    act_buf = np.zeros((T, n, 2))
    logp_buf = np.zeros((T, n))
    val_buf = np.zeros((T + 1, n))
    rew_buf = np.zeros((T, n))
    done_buf = np.zeros((T, n))
    episode = 0
    obs = env.reset(seed_fn(episode))
    ep_return = 0.0
    returns: List[float] = []
    for t in range(T):
        raw, clipped, logp, value = sample_actions(obs, weights, rng)
        obs_buf[t], act_buf[t], logp_buf[t], val_buf[t] = obs, raw, logp, value
        obs, reward, done, truncated, _ = env.step(clipped)
        ep_return += reward
        rew_buf[t] = reward
        if done or truncated:
            if truncated:
                rew_buf[t] += cfg.gamma * mlp_forward(obs, weights)[2]
            done_buf[t] = 1.0
            returns.append(ep_return)
            ep_return = 0.0
            episode += 1
            obs = env.reset(seed_fn(episode))
    val_buf[T] = mlp_forward(obs, weights)[2]
    adv, ret = compute_gae(rew_buf, val_buf, done_buf, cfg.gamma, cfg.gae_lambda)
    batch = RolloutBatch(
        obs=obs_buf.reshape(T * n, -1), actions=act_buf.reshape(T * n, 2),
        log_probs=logp_buf.reshape(-1), advantages=adv.reshape(-1), returns=ret.reshape(-1),
        values=val_buf[:T].reshape(-1), rewards=rew_buf.reshape(-1), dones=done_buf.reshape(-1),
    )
    return batch, returns
