"""Fixed-topology MLPs with hand-written backward passes, and the diagonal Gaussian head.

Weights are stored ``(in, out)`` so a batch ``x`` of shape ``(n, in)`` maps to
``x @ W + b``. Hidden layers use ReLU, the output layer is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(eq=False)
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> MlpParams:
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def astype(self, dtype) -> MlpParams:
        return MlpParams([w.astype(dtype) for w in self.weights], [b.astype(dtype) for b in self.biases])


def _orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return np.ascontiguousarray(gain * q[:n_in, :n_out])


def init_mlp(rng: np.random.Generator, sizes: list[int], out_gain: float) -> MlpParams:
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = out_gain if i == len(sizes) - 2 else math.sqrt(2.0)
        weights.append(_orthogonal(rng, n_in, n_out, gain))
        biases.append(np.zeros(n_out))
    return MlpParams(weights, biases)


def mlp_forward(p: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Return the output and the list of layer inputs needed by :func:`mlp_backward`."""
    cache = [x]
    h = x
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = h @ w + b
        if i < last:
            h = np.maximum(z, 0.0)
            cache.append(h)
        else:
            h = z
    return h, cache


def mlp_backward(p: MlpParams, cache: list[np.ndarray], dout: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Gradients of a scalar loss w.r.t. parameters and input, given ``dL/doutput``."""
    n = len(p.weights)
    dws: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    dbs: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    g = dout
    for i in range(n - 1, -1, -1):
        h_in = cache[i]
        dws[i] = h_in.T @ g
        dbs[i] = g.sum(axis=0)
        g = g @ p.weights[i].T
        if i > 0:
            # cache[i] is relu(z); its positive entries are exactly where z > 0
            g = g * (h_in > 0.0)
    return MlpParams(dws, dbs), g


# --------------------------------------------------------------------------- gaussian head


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * (z * z).sum(axis=-1) - log_std.sum() - 0.5 * mean.shape[-1] * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(log_std.sum() + 0.5 * log_std.shape[0] * (1.0 + LOG_2PI))


# --------------------------------------------------------------------------- agent


@dataclass(eq=False)
class RunningMeanStd:
    mean: np.ndarray
    var: np.ndarray
    count: float = 1e-4

    @classmethod
    def zeros(cls, dim: int) -> RunningMeanStd:
        return cls(np.zeros(dim), np.ones(dim))

    def update(self, batch: np.ndarray) -> None:
        b_mean, b_var, b_count = batch.mean(axis=0), batch.var(axis=0), batch.shape[0]
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * b_count / total
        m2 = self.var * self.count + b_var * b_count + delta**2 * self.count * b_count / total
        self.var = m2 / total
        self.count = total

    def normalize(self, x: np.ndarray, clip: float = 10.0) -> np.ndarray:
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -clip, clip)

    def copy(self) -> RunningMeanStd:
        return RunningMeanStd(self.mean.copy(), self.var.copy(), self.count)


@dataclass(eq=False)
class AgentParams:
    """Policy mean network, state-independent log-std and value network."""

    policy: MlpParams
    log_std: np.ndarray
    value: MlpParams
    obs_rms: RunningMeanStd | None = field(default=None)

    @property
    def obs_dim(self) -> int:
        return self.policy.weights[0].shape[0]

    @property
    def action_dim(self) -> int:
        return self.log_std.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self.log_std.dtype

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in checkpoint/optimizer order."""
        return self.policy.arrays() + [self.log_std] + self.value.arrays()

    def copy(self) -> AgentParams:
        return AgentParams(
            self.policy.copy(), self.log_std.copy(), self.value.copy(),
            None if self.obs_rms is None else self.obs_rms.copy(),
        )

    def astype(self, dtype) -> AgentParams:
        return AgentParams(self.policy.astype(dtype), self.log_std.astype(dtype), self.value.astype(dtype), self.obs_rms)

    def preprocess(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=self.dtype)
        if self.obs_rms is not None:
            obs = self.obs_rms.normalize(obs).astype(self.dtype)
        return obs


def init_agent(
    seed: int,
    obs_dim: int,
    action_dim: int = 2,
    policy_hidden: tuple[int, ...] = (128, 128),
    value_hidden: tuple[int, ...] = (256, 256),
    init_log_std: float = -0.5,
    policy_out_gain: float = 0.01,
) -> AgentParams:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    policy = init_mlp(rng, [obs_dim, *policy_hidden, action_dim], policy_out_gain)
    value = init_mlp(rng, [obs_dim, *value_hidden, 1], 1.0)
    return AgentParams(policy, np.full(action_dim, float(init_log_std)), value)


def forward_policy(agent: AgentParams, observation: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Action mean for one observation (or a batch) and the shared log-std."""
    mean, _ = mlp_forward(agent.policy, agent.preprocess(observation))
    return mean, agent.log_std


def forward_value(agent: AgentParams, observation: np.ndarray) -> np.ndarray:
    v, _ = mlp_forward(agent.value, agent.preprocess(observation))
    return v[..., 0]
