"""Procedural forest maps bucketed into a uniform square grid.

The map covers ``grid_extent x grid_extent`` square cells centred on the
origin. Cells are indexed row-major (``index = row * grid_extent + col``,
row along Y, col along X). Trees are stored sorted by cell in CSR form:
``cell_start[c]:cell_start[c + 1]`` slices the trees owned by cell ``c``.

Randomness: every map draws from numpy's PCG64 seeded through
``SeedSequence(seed, spawn_key=...)``. The map-level tree count uses spawn key
``(0,)`` and cell ``c`` uses its own substream ``(1, c)``, so the draws of one
cell never depend on how many numbers another cell consumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator, NamedTuple

import numpy as np
from numba import njit

from .kinematics import Vec2

MAX_TRIALS = 1000
_CHUNK = 256


class Tree(NamedTuple):
    center: Vec2
    radius: float


@dataclass(frozen=True)
class ForestConfig:
    cell_side: float = 16.6
    trees_per_grid_range: tuple[int, int] = (30, 60)
    tree_radius_range: tuple[float, float] = (0.1, 0.6)
    trees_min_distance: float = 1.5
    start_clearance: float = 2.0
    grid_extent: int = 7
    seed: int = 0
    # "map": one tree count drawn per map and shared by every cell; "cell": redrawn per cell.
    trees_per_grid_mode: str = "map"

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees_per_grid_range", tuple(int(v) for v in self.trees_per_grid_range))
        object.__setattr__(self, "tree_radius_range", tuple(float(v) for v in self.tree_radius_range))
        lo, hi = self.trees_per_grid_range
        rlo, rhi = self.tree_radius_range
        if not self.cell_side > 0:
            raise ValueError(f"forest.cell_side must be positive, got {self.cell_side}")
        if lo < 0 or hi < lo:
            raise ValueError(f"forest.trees_per_grid_range must satisfy 0 <= lo <= hi, got {[lo, hi]}")
        if not (0 < rlo <= rhi):
            raise ValueError(f"forest.tree_radius_range must satisfy 0 < lo <= hi, got {[rlo, rhi]}")
        if self.trees_min_distance < 0:
            raise ValueError(f"forest.trees_min_distance must be >= 0, got {self.trees_min_distance}")
        if self.start_clearance < 0:
            raise ValueError(f"forest.start_clearance must be >= 0, got {self.start_clearance}")
        if self.grid_extent < 1:
            raise ValueError(f"forest.grid_extent must be >= 1, got {self.grid_extent}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"forest.seed must fit in an unsigned 64-bit integer, got {self.seed}")
        if self.trees_per_grid_mode not in ("map", "cell"):
            raise ValueError(f"forest.trees_per_grid_mode must be 'map' or 'cell', got {self.trees_per_grid_mode!r}")

    @property
    def origin(self) -> float:
        """World coordinate of the lower-left grid corner (same on both axes)."""
        return -0.5 * self.grid_extent * self.cell_side

    @property
    def max_radius(self) -> float:
        return self.tree_radius_range[1]


@dataclass(frozen=True, eq=False)
class ForestMap:
    config: ForestConfig
    centers: np.ndarray  # (n, 2) float64
    radii: np.ndarray  # (n,) float64
    cell_start: np.ndarray  # (extent**2 + 1,) int64
    # Tree count each cell aimed for before rejection sampling gave up.
    targets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        for arr in (self.centers, self.radii, self.cell_start, self.targets):
            arr.setflags(write=False)

    @property
    def n_trees(self) -> int:
        return int(self.radii.shape[0])

    @property
    def n_cells(self) -> int:
        return self.config.grid_extent**2

    def cell_counts(self) -> np.ndarray:
        return np.diff(self.cell_start)

    def tree(self, cell: int, local: int) -> Tree:
        lo, hi = self.cell_start[cell], self.cell_start[cell + 1]
        if not 0 <= local < hi - lo:
            raise IndexError(f"cell {cell} has {hi - lo} trees, no index {local}")
        i = lo + local
        return Tree(Vec2(float(self.centers[i, 0]), float(self.centers[i, 1])), float(self.radii[i]))

    @property
    def cells(self) -> list[list[Tree]]:
        return [[self.tree(c, k) for k in range(n)] for c, n in enumerate(self.cell_counts())]

    def trees(self) -> Iterator[Tree]:
        for i in range(self.n_trees):
            yield Tree(Vec2(float(self.centers[i, 0]), float(self.centers[i, 1])), float(self.radii[i]))

    def cell_of(self, position: Vec2) -> tuple[int, int]:
        """(col, row) of the cell containing ``position``, clamped to the grid."""
        return _cell_of(position.x, position.y, self.config.origin, self.config.cell_side, self.config.grid_extent)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ForestMap):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.radii, other.radii)
            and np.array_equal(self.cell_start, other.cell_start)
        )

    @classmethod
    def from_cells(cls, config: ForestConfig, cells: list[list[tuple[float, float, float]]]) -> ForestMap:
        """Build a map from explicit per-cell ``(cx, cy, r)`` lists (row-major cells)."""
        if len(cells) != config.grid_extent**2:
            raise ValueError(f"expected {config.grid_extent**2} cells, got {len(cells)}")
        flat = [t for cell in cells for t in cell]
        centers = np.array([(t[0], t[1]) for t in flat], dtype=np.float64).reshape(-1, 2)
        radii = np.array([t[2] for t in flat], dtype=np.float64)
        cell_start = np.zeros(len(cells) + 1, dtype=np.int64)
        cell_start[1:] = np.cumsum([len(c) for c in cells])
        return cls(config, centers, radii, cell_start, np.array([len(c) for c in cells], dtype=np.int64))

    @classmethod
    def from_trees(cls, config: ForestConfig, trees: list[tuple[float, float, float]]) -> ForestMap:
        """Bucket loose ``(cx, cy, r)`` trees into their cells, keeping input order within a cell."""
        cells: list[list[tuple[float, float, float]]] = [[] for _ in range(config.grid_extent**2)]
        for cx, cy, r in trees:
            col, row = _cell_of(cx, cy, config.origin, config.cell_side, config.grid_extent)
            cells[row * config.grid_extent + col].append((float(cx), float(cy), float(r)))
        return cls.from_cells(config, cells)


def _cell_of(x: float, y: float, origin: float, side: float, extent: int) -> tuple[int, int]:
    col = min(max(math.floor((x - origin) / side), 0), extent - 1)
    row = min(max(math.floor((y - origin) / side), 0), extent - 1)
    return col, row


# --------------------------------------------------------------------------- generation


@njit(cache=True)
def _fill_cell(
    cands, n_cands, col, row, extent, origin, side, rlo, rhi, min_dist, clearance,
    centers, radii, cell_start, n_placed, target, placed_in_cell, fails,
):
    """Consume candidates until the cell is full, the cutoff is hit, or the chunk runs out.

    Returns (n_placed, placed_in_cell, fails, done).
    """
    min_d2 = min_dist * min_dist
    cell = row * extent + col
    for k in range(n_cands):
        if placed_in_cell >= target:
            return n_placed, placed_in_cell, fails, True
        x = origin + (col + cands[k, 0]) * side
        y = origin + (row + cands[k, 1]) * side
        r = rlo + cands[k, 2] * (rhi - rlo)
        ok = True
        # Rounding can push a draw onto the upper cell edge; such candidates are rejected.
        if np.floor((x - origin) / side) != col or np.floor((y - origin) / side) != row:
            ok = False
        if ok and math.sqrt(x * x + y * y) < r + clearance:
            ok = False
        if ok:
            for nr in range(max(row - 1, 0), min(row + 2, extent)):
                for nc in range(max(col - 1, 0), min(col + 2, extent)):
                    nb = nr * extent + nc
                    if nb > cell:
                        continue
                    lo = cell_start[nb]
                    hi = n_placed if nb == cell else cell_start[nb + 1]
                    for i in range(lo, hi):
                        dx = centers[i, 0] - x
                        dy = centers[i, 1] - y
                        if dx * dx + dy * dy < min_d2:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
        if ok:
            centers[n_placed, 0] = x
            centers[n_placed, 1] = y
            radii[n_placed] = r
            n_placed += 1
            placed_in_cell += 1
            fails = 0
        else:
            fails += 1
            if fails >= MAX_TRIALS:
                return n_placed, placed_in_cell, fails, True
    return n_placed, placed_in_cell, fails, placed_in_cell >= target


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def generate(config: ForestConfig) -> ForestMap:
    """Generate a forest by per-cell rejection sampling; a pure function of ``config``.

    Each cell aims for a tree count drawn from ``trees_per_grid_range``. Candidate
    centres are uniform in the cell and radii uniform in ``tree_radius_range``;
    a candidate closer than ``trees_min_distance`` to an already placed tree in
    the same or an adjacent cell, or whose disc reaches into the start
    clearance, is rejected. After ``MAX_TRIALS`` consecutive rejections the
    cell keeps whatever it has.
    """
    g = config.grid_extent
    lo, hi = config.trees_per_grid_range
    n_cells = g * g
    if config.trees_per_grid_mode == "map":
        shared = int(_substream(config.seed, 0).integers(lo, hi + 1))
        targets = np.full(n_cells, shared, dtype=np.int64)
    else:
        targets = np.empty(n_cells, dtype=np.int64)

    capacity = n_cells * hi
    centers = np.zeros((capacity, 2), dtype=np.float64)
    radii = np.zeros(capacity, dtype=np.float64)
    cell_start = np.zeros(n_cells + 1, dtype=np.int64)
    rlo, rhi = config.tree_radius_range
    n_placed = 0
    for cell in range(n_cells):
        row, col = divmod(cell, g)
        rng = _substream(config.seed, 1, cell)
        if config.trees_per_grid_mode == "cell":
            targets[cell] = rng.integers(lo, hi + 1)
        target = int(targets[cell])
        cell_start[cell] = n_placed
        placed_in_cell = 0
        fails = 0
        done = target == 0
        while not done:
            cands = rng.random((_CHUNK, 3))
            n_placed, placed_in_cell, fails, done = _fill_cell(
                cands, _CHUNK, col, row, g, config.origin, config.cell_side, rlo, rhi,
                config.trees_min_distance, config.start_clearance,
                centers, radii, cell_start, n_placed, target, placed_in_cell, fails,
            )
    cell_start[n_cells] = n_placed
    return ForestMap(config, centers[:n_placed].copy(), radii[:n_placed].copy(), cell_start, targets)


# --------------------------------------------------------------------------- queries


def neighborhood_ranges(fmap: ForestMap, position: Vec2) -> np.ndarray:
    """Index ranges ``(lo, hi)`` into the tree arrays covering the 3x3 block around ``position``.

    Because storage is row-major, each block row is one contiguous slice.
    """
    g = fmap.config.grid_extent
    col, row = fmap.cell_of(position)
    c0, c1 = max(col - 1, 0), min(col + 1, g - 1)
    out = np.zeros((3, 2), dtype=np.int64)
    k = 0
    for r in range(max(row - 1, 0), min(row + 1, g - 1) + 1):
        out[k, 0] = fmap.cell_start[r * g + c0]
        out[k, 1] = fmap.cell_start[r * g + c1 + 1]
        k += 1
    return out


def neighborhood_indices(fmap: ForestMap, position: Vec2) -> np.ndarray:
    ranges = neighborhood_ranges(fmap, position)
    return np.concatenate([np.arange(lo, hi, dtype=np.int64) for lo, hi in ranges])


def neighborhood_trees(fmap: ForestMap, position: Vec2) -> list[Tree]:
    """Trees of the 3x3 cell block around ``position`` in row-major cell order."""
    return [
        Tree(Vec2(float(fmap.centers[i, 0]), float(fmap.centers[i, 1])), float(fmap.radii[i]))
        for i in neighborhood_indices(fmap, position)
    ]


@njit(cache=True)
def _surface_distance(px, py, centers, radii, ranges, drone_radius):
    best = np.inf
    for k in range(ranges.shape[0]):
        for i in range(ranges[k, 0], ranges[k, 1]):
            dx = px - centers[i, 0]
            dy = py - centers[i, 1]
            d = math.sqrt(dx * dx + dy * dy) - radii[i] - drone_radius
            if d < best:
                best = d
    return best


def collision_check(fmap: ForestMap, position: Vec2, drone_radius: float) -> float:
    """Signed clearance to the nearest neighbourhood tree surface (negative when penetrating).

    Returns ``inf`` if the 3x3 block holds no trees.
    """
    ranges = neighborhood_ranges(fmap, position)
    return float(_surface_distance(position.x, position.y, fmap.centers, fmap.radii, ranges, drone_radius))


def surface_distance_all(fmap: ForestMap, position: Vec2, drone_radius: float) -> float:
    """Brute-force version of :func:`collision_check` over every tree in the map."""
    ranges = np.array([[0, fmap.n_trees]], dtype=np.int64)
    return float(_surface_distance(position.x, position.y, fmap.centers, fmap.radii, ranges, drone_radius))


# --------------------------------------------------------------------------- file format


def forest_config_to_dict(config: ForestConfig) -> dict[str, Any]:
    d = asdict(config)
    d["trees_per_grid_range"] = list(config.trees_per_grid_range)
    d["tree_radius_range"] = list(config.tree_radius_range)
    return d


def map_to_dict(fmap: ForestMap) -> dict[str, Any]:
    cells = []
    for c in range(fmap.n_cells):
        lo, hi = int(fmap.cell_start[c]), int(fmap.cell_start[c + 1])
        cells.append([
            {"cx": float(fmap.centers[i, 0]), "cy": float(fmap.centers[i, 1]), "r": float(fmap.radii[i])}
            for i in range(lo, hi)
        ])
    return {"config": forest_config_to_dict(fmap.config), "cells": cells}


def map_from_dict(data: dict[str, Any]) -> ForestMap:
    try:
        config = ForestConfig(**data["config"])
        cells = [[(float(t["cx"]), float(t["cy"]), float(t["r"])) for t in cell] for cell in data["cells"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed map data: {exc}") from exc
    return ForestMap.from_cells(config, cells)


def save_map(fmap: ForestMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(map_to_dict(fmap), indent=1) + "\n")


def load_map(path: str | Path) -> ForestMap:
    return map_from_dict(json.loads(Path(path).read_text()))
