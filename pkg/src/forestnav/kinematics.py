"""Planar point-mass kinematics for the simulated drone.

Each axis is integrated independently: the acceleration needed to reach the
commanded velocity within one step is clamped to ``max_acc``, velocity is
advanced by ``a*dt`` and position by ``v*dt + a*dt**2/2`` using the *updated*
velocity ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


ZERO = Vec2(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class DroneState:
    position: Vec2 = ZERO
    velocity: Vec2 = ZERO


@dataclass(frozen=True)
class KinematicsConfig:
    dt: float = 0.1
    max_acc: float = 3.0
    v_max: float = 2.0

    def __post_init__(self) -> None:
        for name in ("dt", "max_acc", "v_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"kinematics.{name} must be a positive finite number, got {value!r}")


def compute_acceleration(v_req: float, v0: float, cfg: KinematicsConfig) -> float:
    """Acceleration that would reach ``v_req`` in one step, clamped to +-max_acc."""
    a = (v_req - v0) / cfg.dt
    return min(max(a, -cfg.max_acc), cfg.max_acc)


def _axis_step(x0: float, v0: float, v_req: float, cfg: KinematicsConfig) -> tuple[float, float]:
    a = compute_acceleration(v_req, v0, cfg)
    v = v0 + a * cfg.dt
    # Uses the updated v together with the a*dt^2/2 term, as in the reference
    # simulator; this counts the acceleration twice compared to textbook kinematics.
    x = x0 + v * cfg.dt + a * cfg.dt * cfg.dt / 2
    return x, v


def step(state: DroneState, v_req: Vec2, cfg: KinematicsConfig) -> DroneState:
    """Advance the drone one time step towards the commanded velocity.

    The caller is responsible for bounding ``v_req`` by ``cfg.v_max``.
    """
    x, vx = _axis_step(state.position.x, state.velocity.x, v_req.x, cfg)
    y, vy = _axis_step(state.position.y, state.velocity.y, v_req.y, cfg)
    return DroneState(Vec2(x, y), Vec2(vx, vy))


def clamp_command(v_req: Vec2, cfg: KinematicsConfig) -> Vec2:
    """Clamp each commanded component to [-v_max, v_max]."""
    vm = cfg.v_max
    return Vec2(min(max(v_req.x, -vm), vm), min(max(v_req.y, -vm), vm))
