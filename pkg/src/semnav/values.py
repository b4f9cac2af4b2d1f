"""Semantic value map: FOV sector filling with a contraharmonic-mean update,
plus the smoothed/normalized view consumed by frontier scoring.

The raw grid is the persistent state; smoothing and min-max normalization
happen on read.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .world import AgentPose, RaySamples, compute_ray_samples, round_half_away, truncate_rays

Cell = tuple[int, int]

DEFAULT_GAUSS_SIGMA = 0.85


def polar_to_cartesian(pose: AgentPose, alpha: float, d_m: float,
                       resolution: float) -> Cell:
    """Map a (ray angle, distance) pair to a cell index; y decreases with
    +sin(alpha). May land outside the grid - callers treat that as ray exit."""
    x = pose.x_m + d_m * math.cos(alpha)
    y = pose.y_m - d_m * math.sin(alpha)
    return (round_half_away(x / resolution), round_half_away(y / resolution))


def update_value_cell(v: float, s: float) -> float:
    """Contraharmonic mean (v^2 + s^2) / (v + s); defined as 0 at v = s = 0."""
    if v < 0.0 or s < 0.0:
        raise ValueError(f"negative inputs: v={v}, s={s}")
    denom = v + s
    if denom == 0.0:
        return 0.0
    return (v * v + s * s) / denom


def gaussian_kernel_3x3(sigma: float = DEFAULT_GAUSS_SIGMA) -> np.ndarray:
    ax = np.array([-1.0, 0.0, 1.0])
    g1 = np.exp(-(ax ** 2) / (2.0 * sigma * sigma))
    k = np.outer(g1, g1)
    return k / k.sum()


@dataclass
class ValueMap:
    grid: np.ndarray          # (H, W) float64, >= 0
    resolution: float
    d_max_m: float
    fov_deg: float

    @classmethod
    def create(cls, width: int, height: int, resolution: float = 0.25,
               d_max_m: float = 5.0, fov_deg: float = 79.0) -> "ValueMap":
        return cls(grid=np.zeros((height, width), dtype=np.float64),
                   resolution=resolution, d_max_m=d_max_m, fov_deg=fov_deg)

    def copy(self) -> "ValueMap":
        return ValueMap(self.grid.copy(), self.resolution, self.d_max_m, self.fov_deg)

    def sector_fill(self, pose: AgentPose, score: float, obstacles: np.ndarray,
                    angular_step_deg: float = 1.0,
                    radial_step_cells: float = 0.5,
                    weighting: str = "cosine",
                    samples: RaySamples | None = None) -> None:
        """Fill the FOV sector with `score`, contraharmonic-updating each
        reached cell at most once per fill (first ray in ascending-angle order
        wins). Rays stop at the first obstacle cell, which is not updated.

        weighting: "cosine" tapers the score toward the FOV edges
        (1.0 center, ~0.707 at the edge); "uniform" applies it flat.
        """
        if not (0.0 <= score <= 1.0):
            raise ValueError(f"score out of range: {score}")
        if samples is None or samples.max_range_m != self.d_max_m:
            samples = compute_ray_samples(pose.x_m, pose.y_m, pose.heading,
                                          obstacles.shape, self.resolution,
                                          self.fov_deg, self.d_max_m,
                                          angular_step_deg, radial_step_cells)
        field = truncate_rays(samples, obstacles)
        fill = field.visible & ~field.blocked
        if not fill.any():
            return
        if weighting == "cosine":
            half = math.radians(self.fov_deg) / 2.0
            ray_scores = score * np.cos(field.rel_angles / half * (math.pi / 4.0))
        elif weighting == "uniform":
            ray_scores = np.full(field.rel_angles.shape, score)
        else:
            raise ValueError(f"unknown weighting {weighting!r}")

        h, w = self.grid.shape
        keys = (field.cells_y * w + field.cells_x)[fill]
        sample_scores = np.broadcast_to(ray_scores[:, None], fill.shape)[fill]
        uniq, first = np.unique(keys, return_index=True)
        s = sample_scores[first]
        v = self.grid.ravel()[uniq]
        denom = v + s
        safe = np.where(denom > 0.0, denom, 1.0)
        self.grid.ravel()[uniq] = np.where(denom > 0.0, (v * v + s * s) / safe, 0.0)


def smooth_and_normalize(vmap: ValueMap,
                         sigma: float = DEFAULT_GAUSS_SIGMA) -> np.ndarray:
    """3x3 Gaussian smoothing (replicated border) then min-max normalization
    over the whole grid; a constant map normalizes to all zeros."""
    sm = ndimage.convolve(vmap.grid, gaussian_kernel_3x3(sigma), mode="nearest")
    mn = sm.min()
    mx = sm.max()
    if mx <= mn:
        return np.zeros_like(sm)
    return (sm - mn) / (mx - mn)
