"""Rollout storage and generalized advantage estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class RolloutBuffer:
    """Arrays indexed ``[env, step]`` for one rollout of ``n_steps`` on ``n_envs`` environments.

    ``next_values`` holds V of the true successor observation at steps ending
    in truncation (the stored next row already belongs to a fresh episode);
    it is ignored everywhere else.
    """

    observations: np.ndarray  # (N, T, obs_dim)
    actions: np.ndarray  # (N, T, action_dim)
    log_probs: np.ndarray  # (N, T)
    rewards: np.ndarray  # (N, T)
    values: np.ndarray  # (N, T)
    terminated: np.ndarray  # (N, T) bool
    truncated: np.ndarray  # (N, T) bool
    next_values: np.ndarray  # (N, T)

    @classmethod
    def empty(cls, n_envs: int, n_steps: int, obs_dim: int, action_dim: int, dtype=np.float64) -> RolloutBuffer:
        return cls(
            observations=np.zeros((n_envs, n_steps, obs_dim), dtype=dtype),
            actions=np.zeros((n_envs, n_steps, action_dim), dtype=dtype),
            log_probs=np.zeros((n_envs, n_steps)),
            rewards=np.zeros((n_envs, n_steps)),
            values=np.zeros((n_envs, n_steps)),
            terminated=np.zeros((n_envs, n_steps), dtype=bool),
            truncated=np.zeros((n_envs, n_steps), dtype=bool),
            next_values=np.zeros((n_envs, n_steps)),
        )

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_steps(self) -> int:
        return self.rewards.shape[1]


def gae_advantages(
    buffer: RolloutBuffer, bootstrap_values: np.ndarray, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns by the backward GAE recursion.

    ``bootstrap_values[n]`` is V of the observation following the last stored
    step of env ``n``. Termination zeroes the successor value; truncation
    bootstraps from ``next_values``; either one stops the recursion from
    leaking across the episode boundary.
    """
    n_envs, n_steps = buffer.rewards.shape
    advantages = np.zeros((n_envs, n_steps))
    running = np.zeros(n_envs)
    next_v = np.asarray(bootstrap_values, dtype=np.float64).reshape(n_envs)
    for t in range(n_steps - 1, -1, -1):
        term = buffer.terminated[:, t]
        trunc = buffer.truncated[:, t]
        succ = np.where(trunc, buffer.next_values[:, t], next_v)
        succ = np.where(term, 0.0, succ)
        delta = buffer.rewards[:, t] + gamma * succ - buffer.values[:, t]
        cont = ~(term | trunc)
        running = delta + gamma * lam * cont * running
        advantages[:, t] = running
        next_v = buffer.values[:, t]
    return advantages, advantages + buffer.values
