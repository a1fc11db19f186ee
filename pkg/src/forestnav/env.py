"""Episodic "fly 30 m through the forest" task built on kinematics, forest and lidar."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import forest as forest_mod
from . import kinematics
from .forest import ForestConfig, ForestMap
from .kinematics import DroneState, KinematicsConfig, Vec2
from .lidar import LidarConfig, LidarScan, scan

REWARD_KEYS = ("r_prox", "r_coll", "r_center", "r_speed")


@dataclass(frozen=True)
class EnvConfig:
    goal_distance_x: float = 30.0
    proximity_threshold: float = 0.15
    proximity_penalty: float = -0.25
    collision_penalty: float = -1.5
    centerline_coeff: float = 0.1
    speed_coeff: float = 0.8
    wrong_direction_factor: float = 3.0
    # False: backward flight costs factor*speed_coeff*|v_x|.  True: the term is
    # literally multiplied by -factor, which turns backward flight into a bonus.
    wrong_direction_literal: bool = False
    drone_radius: float = 0.25
    max_steps: int = 600
    obs_bins: int = 40

    def __post_init__(self) -> None:
        if not self.goal_distance_x > 0:
            raise ValueError(f"env.goal_distance_x must be positive, got {self.goal_distance_x}")
        if not self.proximity_threshold > 0:
            raise ValueError(f"env.proximity_threshold must be positive, got {self.proximity_threshold}")
        if self.max_steps < 1:
            raise ValueError(f"env.max_steps must be >= 1, got {self.max_steps}")
        if self.obs_bins < 1:
            raise ValueError(f"env.obs_bins must be >= 1, got {self.obs_bins}")
        if self.drone_radius < 0:
            raise ValueError(f"env.drone_radius must be >= 0, got {self.drone_radius}")


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict[str, Any] = field(default_factory=dict)


def normalize_scan(scan_: LidarScan | np.ndarray, obs_bins: int, max_range: float) -> np.ndarray:
    """Min-pool contiguous beam groups into ``obs_bins`` sectors, then map [0, max_range] onto [-1, 1]."""
    d = scan_.distances if isinstance(scan_, LidarScan) else np.asarray(scan_, dtype=np.float64)
    if d.shape[0] % obs_bins:
        raise ValueError(f"obs_bins={obs_bins} does not divide beam_count={d.shape[0]}")
    pooled = d.reshape(obs_bins, -1).min(axis=1)
    h2 = max_range / 2.0
    return (pooled - h2) / h2


def compute_reward(
    state: DroneState, nearest_surface: float, collided: bool, cfg: EnvConfig
) -> tuple[float, dict[str, float]]:
    """Per-step reward and its four components (proximity, collision, centre-line, speed)."""
    r_prox = cfg.proximity_penalty if 0.0 <= nearest_surface < cfg.proximity_threshold else 0.0
    r_coll = cfg.collision_penalty if collided else 0.0
    r_center = -cfg.centerline_coeff * abs(state.position.y)
    vx = state.velocity.x
    if vx >= 0.0:
        r_speed = cfg.speed_coeff * vx
    elif cfg.wrong_direction_literal:
        r_speed = -cfg.wrong_direction_factor * cfg.speed_coeff * vx
    else:
        r_speed = cfg.wrong_direction_factor * cfg.speed_coeff * vx
    breakdown = {"r_prox": r_prox, "r_coll": r_coll, "r_center": r_center, "r_speed": r_speed}
    return r_prox + r_coll + r_center + r_speed, breakdown


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping an episode that already terminated or was truncated."""


class ForestEnv:
    """Single forest-flight environment with a gym-like ``reset``/``step`` contract.

    Observations hold only the normalized, min-pooled scan; the drone's own
    position and velocity are never exposed to the policy. If ``fixed_map`` is
    given every reset reuses it, otherwise a fresh map is generated from the
    episode seed.
    """

    action_dim = 2

    def __init__(
        self,
        kin: KinematicsConfig | None = None,
        forest: ForestConfig | None = None,
        lidar: LidarConfig | None = None,
        env: EnvConfig | None = None,
        fixed_map: ForestMap | None = None,
    ) -> None:
        self.kin = kin or KinematicsConfig()
        self.forest_cfg = forest or ForestConfig()
        self.lidar = lidar or LidarConfig()
        self.cfg = env or EnvConfig()
        if self.lidar.beam_count % self.cfg.obs_bins:
            raise ValueError(
                f"env.obs_bins={self.cfg.obs_bins} must divide lidar.beam_count={self.lidar.beam_count}"
            )
        self.fixed_map = fixed_map
        self.map: ForestMap | None = None
        self.state = DroneState()
        self.steps = 0
        self.last_scan: LidarScan | None = None
        self._done = True

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_bins

    def observe(self) -> np.ndarray:
        assert self.map is not None
        self.last_scan = scan(self.map, self.state.position, self.lidar)
        return normalize_scan(self.last_scan, self.cfg.obs_bins, self.lidar.max_range)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if self.fixed_map is not None:
            self.map = self.fixed_map
        else:
            forest_cfg = self.forest_cfg if seed is None else replace(self.forest_cfg, seed=int(seed))
            self.map = forest_mod.generate(forest_cfg)
        self.state = DroneState()
        self.steps = 0
        self._done = False
        return self.observe()

    def snapshot(self) -> dict[str, float]:
        p, v = self.state.position, self.state.velocity
        return {"x": p.x, "y": p.y, "vx": v.x, "vy": v.y}

    def step(self, action) -> StepOutcome:
        if self._done:
            raise EpisodeFinishedError("episode is over; call reset() before stepping again")
        ax = min(max(float(action[0]), -1.0), 1.0)
        ay = min(max(float(action[1]), -1.0), 1.0)
        v_req = kinematics.clamp_command(Vec2(ax * self.kin.v_max, ay * self.kin.v_max), self.kin)
        self.state = kinematics.step(self.state, v_req, self.kin)
        self.steps += 1

        nearest = forest_mod.collision_check(self.map, self.state.position, self.cfg.drone_radius)
        collided = nearest < 0.0
        reward, breakdown = compute_reward(self.state, nearest, collided, self.cfg)
        reached = self.state.position.x >= self.cfg.goal_distance_x
        terminated = collided or reached
        truncated = (not terminated) and self.steps >= self.cfg.max_steps
        self._done = terminated or truncated
        obs = self.observe()
        info: dict[str, Any] = dict(breakdown)
        info.update(self.snapshot())
        info.update(collided=collided, reached_goal=reached, nearest_surface=nearest, steps=self.steps)
        return StepOutcome(obs, reward, terminated, truncated, info)


def is_success(final_x: float, collided: bool, cfg: EnvConfig) -> bool:
    return final_x >= cfg.goal_distance_x and not collided
