"""Shared Gaussian actor-critic MLP with hand-written backprop (numpy only)."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_2PI = math.log(2.0 * math.pi)
ACTION_DIM = 2


class PolicyWeights:
    """Tanh trunk feeding a linear 2-d mean head and a scalar value head.

    The log-std is a free 2-vector, not a function of the observation.
    Parameters live in ``self.params`` keyed ``W0, b0, ..., Wmu, bmu, Wv, bv, log_std``.
    """

    def __init__(self, params: Dict[str, np.ndarray]):
        self.params = params
        self.n_hidden = sum(1 for k in params if k.startswith("W") and k[1:].isdigit())

    @classmethod
    def init(cls, obs_dim: int, hidden: Iterable[int] = (64, 64, 64), seed: int = 0,
             log_std: float = -0.5) -> "PolicyWeights":
        rng = np.random.default_rng(seed)
        params: Dict[str, np.ndarray] = {}
        fan_in = obs_dim
        for li, width in enumerate(hidden):
            params[f"W{li}"] = _orthogonal(rng, fan_in, width, math.sqrt(2.0))
            params[f"b{li}"] = np.zeros(width)
            fan_in = width
        params["Wmu"] = _orthogonal(rng, fan_in, ACTION_DIM, 0.01)
        params["bmu"] = np.zeros(ACTION_DIM)
        params["Wv"] = _orthogonal(rng, fan_in, 1, 1.0)
        params["bv"] = np.zeros(1)
        params["log_std"] = np.full(ACTION_DIM, float(log_std))
        return cls(params)

    @classmethod
    def zeros_like(cls, other: "PolicyWeights") -> "PolicyWeights":
        return cls({k: np.zeros_like(v) for k, v in other.params.items()})

    @property
    def obs_dim(self) -> int:
        return self.params["W0"].shape[0]

    @property
    def hidden(self) -> Tuple[int, ...]:
        return tuple(self.params[f"W{i}"].shape[1] for i in range(self.n_hidden))

    def copy(self) -> "PolicyWeights":
        return PolicyWeights({k: v.copy() for k, v in self.params.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params.values())


def _orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


@dataclass
class ForwardCache:
    inputs: List[np.ndarray]  # input to each hidden layer
    activations: List[np.ndarray]  # tanh output of each hidden layer


def mlp_forward(obs: np.ndarray, weights: PolicyWeights, return_cache: bool = False):
    """Return (mean, log_std, value) for a batch of observations.

    ``obs`` may be a single vector or a (B, D) batch.
    """
    p = weights.params
    x = np.asarray(obs, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != weights.obs_dim:
        raise ConfigError(f"observation has {x.shape[1]} features, network expects {weights.obs_dim}")
    inputs, acts = [], []
    h = x
    for li in range(weights.n_hidden):
        inputs.append(h)
        h = np.tanh(h @ p[f"W{li}"] + p[f"b{li}"])
        acts.append(h)
    mean = h @ p["Wmu"] + p["bmu"]
    value = (h @ p["Wv"] + p["bv"])[:, 0]
    log_std = np.clip(p["log_std"], LOG_STD_MIN, LOG_STD_MAX)
    if single:
        mean, value = mean[0], value[0]
    if return_cache:
        return mean, log_std, value, ForwardCache(inputs, acts)
    return mean, log_std, value


def mlp_backward(weights: PolicyWeights, cache: ForwardCache, d_mean: np.ndarray,
                 d_value: np.ndarray, d_log_std: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of a scalar loss given its gradients w.r.t. the network outputs."""
    p = weights.params
    grads: Dict[str, np.ndarray] = {}
    h = cache.activations[-1]
    d_mean = np.atleast_2d(d_mean)
    d_value = np.asarray(d_value, dtype=float).reshape(-1, 1)
    grads["Wmu"] = h.T @ d_mean
    grads["bmu"] = d_mean.sum(axis=0)
    grads["Wv"] = h.T @ d_value
    grads["bv"] = d_value.sum(axis=0)
    inside = (p["log_std"] >= LOG_STD_MIN) & (p["log_std"] <= LOG_STD_MAX)
    grads["log_std"] = np.where(inside, d_log_std, 0.0)
    dh = d_mean @ p["Wmu"].T + d_value @ p["Wv"].T
    for li in reversed(range(weights.n_hidden)):
        dz = dh * (1.0 - cache.activations[li] ** 2)
        grads[f"W{li}"] = cache.inputs[li].T @ dz
        grads[f"b{li}"] = dz.sum(axis=0)
        if li:
            dh = dz @ p[f"W{li}"].T
    return grads


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * (z**2).sum(axis=-1) - log_std.sum() - 0.5 * ACTION_DIM * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(log_std.sum() + 0.5 * ACTION_DIM * (1.0 + LOG_2PI))


def sample_actions(obs: np.ndarray, weights: PolicyWeights, rng: Optional[np.random.Generator] = None,
                   deterministic: bool = False):
    """Sample pre-clip Gaussian actions.

    Returns (raw_actions, clipped_actions, log_prob, value). The environment
    gets the clipped copy; log-probs refer to the raw sample.
    """
    mean, log_std, value = mlp_forward(obs, weights)
    if deterministic:
        raw = np.array(mean, copy=True)
    else:
        raw = mean + np.exp(log_std) * rng.standard_normal(np.shape(mean))
    return raw, np.clip(raw, -1.0, 1.0), gaussian_log_prob(raw, mean, log_std), value


class MlpPolicy:
    """Callable adapter so a weight set can drive the evaluation harness."""

    name = "checkpoint"

    def __init__(self, weights: PolicyWeights, deterministic: bool = True):
        self.weights = weights
        self.deterministic = deterministic

    def __call__(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return sample_actions(obs, self.weights, rng, self.deterministic)[1]


# ------------------------------------------------------------------ checkpoint
#
# Layout (all integers and floats little-endian):
#   8 bytes   magic b"UAVJPOL\x00"
#   4 bytes   uint32 format version
#   4 bytes   uint32 header length L
#   L bytes   UTF-8 JSON header: {"arrays": [[name, [shape...]], ...], "meta": {...}}
#   payload   float64 arrays in header order, C-contiguous
CHECKPOINT_MAGIC = b"UAVJPOL\x00"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, arrays: Dict[str, np.ndarray], meta: Optional[dict] = None) -> None:
    path = Path(path)
    header = {
        "arrays": [[name, list(np.shape(a))] for name, a in arrays.items()],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    tmp.replace(path)


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path} is not a policy checkpoint")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen])
    offset = 16 + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(float)
        arrays[name] = arr.reshape(shape)
        offset += 8 * count
    return arrays, header["meta"]


def save_weights(path, weights: PolicyWeights, meta: Optional[dict] = None) -> None:
    save_checkpoint(path, weights.params, meta)


def load_weights(path) -> PolicyWeights:
    arrays, _ = load_checkpoint(path)
    return PolicyWeights({k: v for k, v in arrays.items() if not k.startswith("adam_")})
