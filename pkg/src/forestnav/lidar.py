"""Rotating 2D LiDAR simulated by exact ray/circle intersection.

Beam ``k`` points at ``angle_offset + 2*pi*k/beam_count`` from world +X; the
drone never yaws, so the sweep is fixed in the world frame. Beams that miss
everything, or hit beyond ``max_range``, read exactly ``max_range``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .forest import ForestMap, neighborhood_ranges
from .kinematics import Vec2


@dataclass(frozen=True)
class LidarConfig:
    max_range: float = 16.0
    beam_count: int = 1600  # 360 / 0.225 deg
    angle_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.beam_count < 1:
            raise ValueError(f"lidar.beam_count must be >= 1, got {self.beam_count}")
        if not (math.isfinite(self.max_range) and self.max_range > 0):
            raise ValueError(f"lidar.max_range must be positive, got {self.max_range}")
        if not math.isfinite(self.angle_offset):
            raise ValueError("lidar.angle_offset must be finite")

    @property
    def pitch(self) -> float:
        return 2.0 * math.pi / self.beam_count

    def angles(self) -> np.ndarray:
        return self.angle_offset + 2.0 * np.pi * np.arange(self.beam_count) / self.beam_count


@dataclass(frozen=True, eq=False)
class LidarScan:
    distances: np.ndarray

    def __len__(self) -> int:
        return int(self.distances.shape[0])


@lru_cache(maxsize=16)
def _directions(beam_count: int, angle_offset: float) -> tuple[np.ndarray, np.ndarray]:
    angles = angle_offset + 2.0 * np.pi * np.arange(beam_count) / beam_count
    cos_t, sin_t = np.cos(angles), np.sin(angles)
    cos_t.setflags(write=False)
    sin_t.setflags(write=False)
    return cos_t, sin_t


@njit(cache=True, inline="always")
def _hit(ox, oy, c, dx, dy):
    # |t*d - o|^2 = r^2 with |d| = 1  ->  t^2 - 2 b t + c = 0, b = d.o, c = |o|^2 - r^2
    b = dx * ox + dy * oy
    disc = b * b - c
    if disc < 0.0:
        return -1.0
    s = math.sqrt(disc)
    t = b - s
    if t >= 0.0:
        return t
    t = b + s
    if t >= 0.0:
        return t
    return -1.0


@njit(cache=True)
def _ray_circle(ox, oy, r, dx, dy):
    return _hit(ox, oy, ox * ox + oy * oy - r * r, dx, dy)


def ray_circle_distance(origin_to_center: Vec2, radius: float, direction: Vec2) -> float | None:
    """Distance along a unit ray from the origin to a circle, or None on a miss.

    ``origin_to_center`` is the circle centre relative to the ray origin. When
    the origin is inside the circle the exit point is returned, since the
    entry root is behind the ray.
    """
    t = _ray_circle(origin_to_center.x, origin_to_center.y, radius, direction.x, direction.y)
    return None if t < 0.0 else float(t)


@njit(cache=True)
def _scan_all(px, py, centers, radii, ranges, cos_t, sin_t, max_range, out):
    """Reference kernel: every listed tree against every beam."""
    n_beams = cos_t.shape[0]
    for k in range(n_beams):
        out[k] = max_range
    for q in range(ranges.shape[0]):
        for i in range(ranges[q, 0], ranges[q, 1]):
            ox = centers[i, 0] - px
            oy = centers[i, 1] - py
            c = ox * ox + oy * oy - radii[i] * radii[i]
            for k in range(n_beams):
                t = _hit(ox, oy, c, cos_t[k], sin_t[k])
                if t >= 0.0 and t < out[k]:
                    out[k] = t


@njit(cache=True)
def _scan_pruned(px, py, centers, radii, ranges, cos_t, sin_t, max_range, angle_offset, out):
    """Same result as ``_scan_all``; each tree only visits beams inside its angular shadow.

    Trees whose nearest surface lies beyond range are skipped. Both prunes keep a
    margin (one extra beam per side, a relative range slack) so no beam that the
    full sweep would shorten is ever skipped.
    """
    n_beams = cos_t.shape[0]
    pitch = 2.0 * math.pi / n_beams
    far = max_range * (1.0 + 1e-9)
    for k in range(n_beams):
        out[k] = max_range
    for q in range(ranges.shape[0]):
        for i in range(ranges[q, 0], ranges[q, 1]):
            ox = centers[i, 0] - px
            oy = centers[i, 1] - py
            r = radii[i]
            d = math.sqrt(ox * ox + oy * oy)
            if d - r > far:
                continue
            c = ox * ox + oy * oy - r * r
            if d <= r * (1.0 + 1e-9):
                k_lo = 0
                k_hi = n_beams - 1
            else:
                half = math.asin(r / d)
                theta = math.atan2(oy, ox) - angle_offset
                k_lo = int(math.floor((theta - half) / pitch)) - 1
                k_hi = int(math.ceil((theta + half) / pitch)) + 1
                if k_hi - k_lo + 1 >= n_beams:
                    k_lo = 0
                    k_hi = n_beams - 1
            for kk in range(k_lo, k_hi + 1):
                k = kk % n_beams
                t = _hit(ox, oy, c, cos_t[k], sin_t[k])
                if t >= 0.0 and t < out[k]:
                    out[k] = t


def scan(fmap: ForestMap, drone_position: Vec2, cfg: LidarConfig) -> LidarScan:
    """Full 360 degree sweep using only the trees of the 3x3 block around the drone."""
    cos_t, sin_t = _directions(cfg.beam_count, cfg.angle_offset)
    out = np.empty(cfg.beam_count, dtype=np.float64)
    ranges = neighborhood_ranges(fmap, drone_position)
    _scan_pruned(drone_position.x, drone_position.y, fmap.centers, fmap.radii, ranges,
                 cos_t, sin_t, cfg.max_range, cfg.angle_offset, out)
    return LidarScan(out)


def naive_scan(fmap: ForestMap, drone_position: Vec2, cfg: LidarConfig) -> LidarScan:
    """Unaccelerated sweep over every tree in the map and every beam."""
    cos_t, sin_t = _directions(cfg.beam_count, cfg.angle_offset)
    out = np.empty(cfg.beam_count, dtype=np.float64)
    ranges = np.array([[0, fmap.n_trees]], dtype=np.int64)
    _scan_all(drone_position.x, drone_position.y, fmap.centers, fmap.radii, ranges,
              cos_t, sin_t, cfg.max_range, out)
    return LidarScan(out)


def scan_to_csv(scan_: LidarScan, cfg: LidarConfig) -> str:
    lines = ["angle_rad,distance_m"]
    for a, d in zip(cfg.angles(), scan_.distances):
        lines.append(f"{float(a)!r},{float(d)!r}")
    return "\n".join(lines) + "\n"
