"""Clipped-surrogate PPO loss with analytic gradients, Adam, and the epoch/minibatch update."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .buffer import RolloutBuffer
from .config import PpoConfig
from .networks import AgentParams, gaussian_entropy, gaussian_log_prob, mlp_backward, mlp_forward


class TrainingDivergedError(FloatingPointError):
    """Non-finite loss or gradient during an update."""


@dataclass
class LossStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_frac: float
    approx_kl: float


def loss_and_grad(
    agent: AgentParams,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    clip_range: float,
    vf_coef: float,
    ent_coef: float,
) -> tuple[LossStats, AgentParams]:
    """Total loss ``policy + vf_coef * value - ent_coef * entropy`` and its gradient.

    ``obs`` must already be preprocessed (observation normalization applied).
    """
    n = obs.shape[0]
    mean, p_cache = mlp_forward(agent.policy, obs)
    log_std = agent.log_std
    inv_std = np.exp(-log_std)
    z = (actions - mean) * inv_std
    log_prob = gaussian_log_prob(actions, mean, log_std)

    log_ratio = log_prob - old_log_probs
    ratio = np.exp(log_ratio)
    clipped_ratio = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
    surr1 = ratio * advantages
    surr2 = clipped_ratio * advantages
    policy_loss = -np.minimum(surr1, surr2).mean()

    v, v_cache = mlp_forward(agent.value, obs)
    v = v[:, 0]
    v_err = v - returns
    value_loss = (v_err * v_err).mean()
    entropy = gaussian_entropy(log_std)
    loss = policy_loss + vf_coef * value_loss - ent_coef * entropy

    # d loss / d log_prob: only samples where the unclipped branch is active carry gradient
    active = surr1 <= surr2
    g_logp = np.where(active, -advantages * ratio, 0.0) / n
    # d log_prob / d mean = z / std ; d log_prob / d log_std = z^2 - 1
    d_mean = g_logp[:, None] * z * inv_std
    d_log_std = (g_logp[:, None] * (z * z - 1.0)).sum(axis=0) - ent_coef
    g_policy, _ = mlp_backward(agent.policy, p_cache, d_mean)

    d_v = (vf_coef * 2.0 / n) * v_err
    g_value, _ = mlp_backward(agent.value, v_cache, d_v[:, None])

    stats = LossStats(
        loss=float(loss),
        policy_loss=float(policy_loss),
        value_loss=float(value_loss),
        entropy=entropy,
        clip_frac=float((np.abs(ratio - 1.0) > clip_range).mean()),
        approx_kl=float(((ratio - 1.0) - log_ratio).mean()),
    )
    return stats, AgentParams(g_policy, d_log_std, g_value)


@njit(cache=True, fastmath={"nnan", "ninf", "nsz", "arcp"})
def _adam_kernel(p, g, m, v, scale, lr, b1, b2, c1, c2, eps):
    for i in range(p.shape[0]):
        gi = g[i] * scale
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / c1) / (math.sqrt(vi / c2) + eps)


@njit(cache=True)
def _sum_squares(x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += x[i] * x[i]
    return acc


class Adam:
    """Adam over a fixed list of C-contiguous arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-5) -> None:
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], grad_scale: float = 1.0) -> None:
        """Apply one step using ``grad_scale * grads``."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if not p.flags.c_contiguous:
                raise ValueError("Adam needs C-contiguous parameter arrays")
            _adam_kernel(p.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1), v.reshape(-1),
                         grad_scale, self.lr, self.b1, self.b2, c1, c2, self.eps)


def global_grad_norm(grads: list[np.ndarray]) -> float:
    return math.sqrt(sum(_sum_squares(np.ascontiguousarray(g).reshape(-1)) for g in grads))


def clip_scale(norm: float, max_norm: float) -> float:
    """Factor that brings a gradient of global norm ``norm`` down to ``max_norm``."""
    return max_norm / (norm + 1e-6) if norm > max_norm else 1.0


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_update(
    agent: AgentParams,
    buffer: RolloutBuffer,
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg: PpoConfig,
    rng: np.random.Generator,
    optimizer: Adam | None = None,
) -> dict[str, float]:
    """Run ``n_epochs`` of shuffled minibatch steps on ``agent`` (mutated in place).

    ``buffer.observations`` hold the policy inputs exactly as seen during
    collection (already normalized when that option is on). Advantages are
    normalized once over the whole buffer. Raises
    :class:`TrainingDivergedError` when a minibatch loss or gradient is not finite.
    """
    if optimizer is None:
        optimizer = Adam(agent.arrays(), cfg.learning_rate, eps=cfg.adam_eps)
    dtype = agent.dtype
    obs = buffer.observations.reshape(-1, buffer.observations.shape[-1]).astype(dtype)
    actions = buffer.actions.reshape(-1, buffer.actions.shape[-1]).astype(dtype)
    old_logp = buffer.log_probs.reshape(-1).astype(dtype)
    adv = normalize_advantages(advantages.reshape(-1)).astype(dtype)
    ret = returns.reshape(-1).astype(dtype)
    n = obs.shape[0]
    params = agent.arrays()
    lo, hi = cfg.log_std_bounds

    totals = np.zeros(5)
    n_batches = 0
    for _ in range(cfg.n_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = perm[start:start + cfg.minibatch_size]
            stats, grad = loss_and_grad(
                agent, obs[idx], actions[idx], old_logp[idx], adv[idx], ret[idx],
                cfg.clip_range, cfg.vf_coef, cfg.ent_coef,
            )
            grads = grad.arrays()
            norm = global_grad_norm(grads)
            if not (math.isfinite(stats.loss) and math.isfinite(norm)):
                raise TrainingDivergedError(
                    f"non-finite PPO loss/gradient at minibatch {n_batches}: loss={stats.loss} "
                    f"policy={stats.policy_loss} value={stats.value_loss} grad_norm={norm}; "
                    f"check learning_rate={cfg.learning_rate}"
                )
            optimizer.step(params, grads, clip_scale(norm, cfg.max_grad_norm))
            np.clip(agent.log_std, lo, hi, out=agent.log_std)
            totals += (stats.policy_loss, stats.value_loss, stats.entropy, stats.clip_frac, stats.approx_kl)
            n_batches += 1
    means = totals / max(n_batches, 1)
    return dict(zip(("policy_loss", "value_loss", "entropy", "clip_frac", "approx_kl"), means.tolist()))


def flat_arrays(agent: AgentParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in agent.arrays()])


def unflatten_into(agent: AgentParams, flat: np.ndarray) -> None:
    k = 0
    for a in agent.arrays():
        a[...] = flat[k:k + a.size].reshape(a.shape)
        k += a.size
