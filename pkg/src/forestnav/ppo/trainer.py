"""Rollout collection and the PPO training loop."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..env import ForestEnv
from .algorithm import Adam, ppo_update
from .buffer import RolloutBuffer, gae_advantages
from .checkpoint import save_checkpoint
from .config import PpoConfig
from .networks import AgentParams, RunningMeanStd, gaussian_log_prob, init_agent, mlp_forward

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "update", "steps", "mean_return", "mean_ep_len", "success_rate",
    "policy_loss", "value_loss", "entropy", "clip_frac", "approx_kl",
)


def episode_seed(run_seed: int, env_index: int, episode: int) -> int:
    """Map seed for the ``episode``-th training episode of one env."""
    ss = np.random.SeedSequence(run_seed, spawn_key=(2, env_index, episode))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class EpisodeRecord:
    ret: float
    length: int
    success: bool


class _RewardScaler:
    """Divides rewards by the running std of the discounted return."""

    def __init__(self, n_envs: int, gamma: float) -> None:
        self.gamma = gamma
        self.ret = np.zeros(n_envs)
        self.rms = RunningMeanStd(np.zeros(1), np.ones(1))

    def __call__(self, rewards: np.ndarray, dones: np.ndarray) -> np.ndarray:
        self.ret = self.ret * self.gamma + rewards
        self.rms.update(self.ret[:, None])
        self.ret[dones] = 0.0
        return np.clip(rewards / math.sqrt(float(self.rms.var[0]) + 1e-8), -10.0, 10.0)


@dataclass
class _Collector:
    envs: list[ForestEnv]
    run_seed: int
    obs: np.ndarray
    episode_index: list[int]
    ep_return: np.ndarray
    ep_len: np.ndarray
    history: deque = field(default_factory=deque)
    reward_scaler: _RewardScaler | None = None

    @classmethod
    def start(cls, envs: list[ForestEnv], run_seed: int, window: int) -> _Collector:
        obs = np.stack([env.reset(episode_seed(run_seed, i, 0)) for i, env in enumerate(envs)])
        n = len(envs)
        return cls(envs, run_seed, obs, [0] * n, np.zeros(n), np.zeros(n, dtype=np.int64), deque(maxlen=window))


def _policy_inputs(agent: AgentParams, raw_obs: np.ndarray, update_stats: bool) -> np.ndarray:
    if agent.obs_rms is not None and update_stats:
        agent.obs_rms.update(raw_obs)
    return agent.preprocess(raw_obs)


def collect_rollout(
    agent: AgentParams, col: _Collector, buffer: RolloutBuffer, rng: np.random.Generator
) -> np.ndarray:
    """Fill ``buffer`` with one rollout; returns bootstrap values for the final observations."""
    n_envs, n_steps = buffer.n_envs, buffer.n_steps
    std = np.exp(agent.log_std)
    for t in range(n_steps):
        x = _policy_inputs(agent, col.obs, update_stats=True)
        mean, _ = mlp_forward(agent.policy, x)
        value, _ = mlp_forward(agent.value, x)
        actions = mean + std * rng.standard_normal(mean.shape)
        buffer.observations[:, t] = x
        buffer.actions[:, t] = actions
        buffer.log_probs[:, t] = gaussian_log_prob(actions, mean, agent.log_std)
        buffer.values[:, t] = value[:, 0]

        rewards = np.zeros(n_envs)
        dones = np.zeros(n_envs, dtype=bool)
        for i, env in enumerate(col.envs):
            out = env.step(actions[i])
            rewards[i] = out.reward
            col.ep_return[i] += out.reward
            col.ep_len[i] += 1
            buffer.terminated[i, t] = out.terminated
            buffer.truncated[i, t] = out.truncated
            next_obs = out.observation
            if out.truncated:
                xf = agent.preprocess(next_obs[None, :])
                buffer.next_values[i, t] = mlp_forward(agent.value, xf)[0][0, 0]
            if out.terminated or out.truncated:
                dones[i] = True
                success = bool(out.info["reached_goal"] and not out.info["collided"])
                col.history.append(EpisodeRecord(float(col.ep_return[i]), int(col.ep_len[i]), success))
                col.ep_return[i] = 0.0
                col.ep_len[i] = 0
                col.episode_index[i] += 1
                next_obs = env.reset(episode_seed(col.run_seed, i, col.episode_index[i]))
            col.obs[i] = next_obs
        if col.reward_scaler is not None:
            rewards = col.reward_scaler(rewards, dones)
        buffer.rewards[:, t] = rewards
    x = _policy_inputs(agent, col.obs, update_stats=False)
    return mlp_forward(agent.value, x)[0][:, 0]


@dataclass
class TrainResult:
    agent: AgentParams
    metrics: list[dict[str, float]]
    checkpoints: list[Path]


def _fmt(v: float | int) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def metrics_csv(rows: list[dict[str, float]]) -> str:
    lines = [",".join(METRICS_HEADER)]
    lines += [",".join(_fmt(row[k]) for k in METRICS_HEADER) for row in rows]
    return "\n".join(lines) + "\n"


def train(
    env_factory: Callable[[int], ForestEnv],
    cfg: PpoConfig,
    run_seed: int,
    out_dir: str | Path | None = None,
) -> TrainResult:
    """Alternate rollouts on ``cfg.n_envs`` environments with PPO updates.

    Writes ``checkpoints/ckpt_<update>.bin`` (update 0 is the untrained
    initialisation) and ``metrics.csv`` under ``out_dir`` when given. One
    metrics row is produced per update, ``total_steps // (n_steps * n_envs)``
    rows in all.
    """
    envs = [env_factory(i) for i in range(cfg.n_envs)]
    obs_dim, action_dim = envs[0].obs_dim, envs[0].action_dim
    dtype = np.dtype(cfg.dtype)
    agent = init_agent(run_seed, obs_dim, action_dim, cfg.policy_hidden, cfg.value_hidden, cfg.init_log_std)
    if cfg.normalize_obs:
        agent.obs_rms = RunningMeanStd.zeros(obs_dim)
    agent = agent.astype(dtype)

    out = Path(out_dir) if out_dir is not None else None
    ckpt_dir = None
    if out is not None:
        ckpt_dir = out / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    checkpoints: list[Path] = []

    def checkpoint(update: int) -> None:
        if ckpt_dir is not None:
            path = ckpt_dir / f"ckpt_{update:06d}.bin"
            save_checkpoint(agent, path)
            checkpoints.append(path)

    checkpoint(0)
    rows: list[dict[str, float]] = []
    if cfg.n_updates == 0:
        if out is not None:
            (out / "metrics.csv").write_text(metrics_csv(rows))
        return TrainResult(agent, rows, checkpoints)

    sample_rng = np.random.default_rng(np.random.SeedSequence(run_seed, spawn_key=(3,)))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(run_seed, spawn_key=(4,)))
    col = _Collector.start(envs, run_seed, cfg.stats_window)
    if cfg.normalize_reward:
        col.reward_scaler = _RewardScaler(cfg.n_envs, cfg.gamma)
    buffer = RolloutBuffer.empty(cfg.n_envs, cfg.n_steps, obs_dim, action_dim, dtype)
    optimizer = Adam(agent.arrays(), cfg.learning_rate, eps=cfg.adam_eps)

    for update in range(1, cfg.n_updates + 1):
        bootstrap = collect_rollout(agent, col, buffer, sample_rng)
        adv, ret = gae_advantages(buffer, bootstrap, cfg.gamma, cfg.gae_lambda)
        stats = ppo_update(agent, buffer, adv, ret, cfg, shuffle_rng, optimizer)
        hist = list(col.history)
        nan = float("nan")
        row = {
            "update": update,
            "steps": update * cfg.batch_size,
            "mean_return": float(np.mean([h.ret for h in hist])) if hist else nan,
            "mean_ep_len": float(np.mean([h.length for h in hist])) if hist else nan,
            "success_rate": float(np.mean([h.success for h in hist])) if hist else nan,
            **stats,
        }
        rows.append(row)
        log.info(
            "update %d/%d steps=%d return=%.2f len=%.1f success=%.2f kl=%.4f",
            update, cfg.n_updates, row["steps"], row["mean_return"], row["mean_ep_len"],
            row["success_rate"], row["approx_kl"],
        )
        if out is not None:
            (out / "metrics.csv").write_text(metrics_csv(rows))
        if update % cfg.checkpoint_every == 0 or update == cfg.n_updates:
            checkpoint(update)
    return TrainResult(agent, rows, checkpoints)
