"""Mission evaluation: run deterministic policies over freshly generated forests."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .env import REWARD_KEYS, ForestEnv, is_success
from .forest import ForestMap
from .ppo.networks import AgentParams, forward_policy, init_agent

Policy = Callable[[np.ndarray], np.ndarray]

TRAJECTORY_HEADER = ("step", "x", "y", "vx", "vy", "reward", *REWARD_KEYS, "terminated", "truncated")
EVAL_HEADER = ("episode", "seed", "steps", "final_x", "final_abs_y", "collided", "total_reward", "success")


def make_env(cfg: ExperimentConfig, fixed_map: ForestMap | None = None) -> ForestEnv:
    return ForestEnv(cfg.kinematics, cfg.forest, cfg.lidar, cfg.env, fixed_map=fixed_map)


class MeanPolicy:
    """Deterministic policy: the Gaussian mean, no exploration noise."""

    def __init__(self, agent: AgentParams) -> None:
        self.agent = agent

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        mean, _ = forward_policy(self.agent, obs[None, :])
        return mean[0]


def constant_policy(action: tuple[float, float]) -> Policy:
    a = np.asarray(action, dtype=np.float64)
    return lambda obs: a


def random_init_policy(cfg: ExperimentConfig) -> MeanPolicy:
    p = cfg.ppo
    return MeanPolicy(init_agent(cfg.seed, cfg.env.obs_bins, 2, p.policy_hidden, p.value_hidden, p.init_log_std))


@dataclass
class Episode:
    seed: int | None
    rows: list[dict]
    scans: list[np.ndarray] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.rows[-1]["step"]

    @property
    def final_x(self) -> float:
        return self.rows[-1]["x"]

    @property
    def final_abs_y(self) -> float:
        return abs(self.rows[-1]["y"])

    @property
    def collided(self) -> bool:
        return self.rows[-1]["r_coll"] != 0.0

    @property
    def total_reward(self) -> float:
        return float(sum(r["reward"] for r in self.rows))


def run_episode(env: ForestEnv, policy: Policy, seed: int | None = None, record_scans: bool = False) -> Episode:
    obs = env.reset(seed)
    rows = [dict(step=0, **env.snapshot(), reward=0.0, **{k: 0.0 for k in REWARD_KEYS},
                 terminated=False, truncated=False)]
    scans = [env.last_scan.distances.copy()] if record_scans else []
    while True:
        out = env.step(policy(obs))
        obs = out.observation
        rows.append(dict(
            step=out.info["steps"], x=out.info["x"], y=out.info["y"], vx=out.info["vx"], vy=out.info["vy"],
            reward=out.reward, **{k: out.info[k] for k in REWARD_KEYS},
            terminated=out.terminated, truncated=out.truncated,
        ))
        if record_scans:
            scans.append(env.last_scan.distances.copy())
        if out.terminated or out.truncated:
            return Episode(seed, rows, scans)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trajectory_csv(ep: Episode) -> str:
    lines = [",".join(TRAJECTORY_HEADER)]
    lines += [",".join(_cell(row[k]) for k in TRAJECTORY_HEADER) for row in ep.rows]
    return "\n".join(lines) + "\n"


class TrajectoryParseError(ValueError):
    pass


def parse_trajectory_csv(text: str, source: str = "<trajectory>") -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TrajectoryParseError(f"{source}:1: empty file") from None
    missing = [k for k in ("step", "x", "y") if k not in header]
    if missing:
        raise TrajectoryParseError(f"{source}:1: header lacks column(s) {', '.join(missing)}")
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields:
            continue
        if len(fields) != len(header):
            raise TrajectoryParseError(f"{source}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        row: dict = {}
        for k, v in zip(header, fields):
            if k in ("terminated", "truncated"):
                if v not in ("true", "false"):
                    raise TrajectoryParseError(f"{source}:{lineno}: column {k} must be true/false, got {v!r}")
                row[k] = v == "true"
                continue
            try:
                row[k] = int(v) if k == "step" else float(v)
            except ValueError:
                raise TrajectoryParseError(f"{source}:{lineno}: column {k} is not numeric: {v!r}") from None
        rows.append(row)
    return rows


@dataclass
class EpisodeResult:
    episode: int
    seed: int
    steps: int
    final_x: float
    final_abs_y: float
    collided: bool
    total_reward: float
    success: bool


@dataclass
class EvalReport:
    records: list[EpisodeResult]

    @property
    def episodes(self) -> int:
        return len(self.records)

    @property
    def successes(self) -> int:
        return sum(r.success for r in self.records)

    @property
    def success_rate(self) -> float:
        return self.successes / self.episodes if self.records else 0.0

    def to_csv(self) -> str:
        lines = [",".join(EVAL_HEADER)]
        for r in self.records:
            lines.append(",".join(_cell(getattr(r, k)) for k in EVAL_HEADER))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        collisions = sum(r.collided for r in self.records)
        timeouts = self.episodes - self.successes - collisions
        return "\n".join([
            f"{'episodes':<14}{self.episodes:>8}",
            f"{'successes':<14}{self.successes:>8}",
            f"{'collisions':<14}{collisions:>8}",
            f"{'timeouts':<14}{timeouts:>8}",
            f"{'success rate':<14}{self.success_rate:>8.2%}",
        ])


def evaluate(
    cfg: ExperimentConfig, policy: Policy, episodes: int, base_seed: int, workers: int = 1
) -> EvalReport:
    """Fly ``episodes`` missions; mission ``i`` uses a fresh map seeded ``base_seed + i``."""

    def one(i: int) -> EpisodeResult:
        seed = base_seed + i
        ep = run_episode(make_env(cfg), policy, seed)
        return EpisodeResult(
            i, seed, ep.steps, ep.final_x, ep.final_abs_y, ep.collided, ep.total_reward,
            is_success(ep.final_x, ep.collided, cfg.env),
        )

    if workers <= 1:
        records = [one(i) for i in range(episodes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, range(episodes)))
    return EvalReport(records)
