"""Deterministic grid-world simulation: agent kinematics, FOV ray casting,
and the synthetic perception oracles standing in for a detector + scene scorer.

World frame: x in meters along columns, y in meters along rows, with the
screen convention y = y_r - d*sin(alpha): positive headings sweep upward
(decreasing row index). Cell (i, j) is centered at (i*res, j*res).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .grids import Detection
from .scenes import Scene

Cell = tuple[int, int]

MOVE_STEP_M = 0.25
TURN_STEP_RAD = math.radians(30.0)
DEFAULT_FOV_DEG = 79.0
DEFAULT_MAX_RANGE_M = 5.0
DEFAULT_ANGULAR_STEP_DEG = 1.0
DEFAULT_RADIAL_STEP_CELLS = 0.5

TWO_PI = 2.0 * math.pi


class Action(Enum):
    MOVE_FORWARD = "MOVE_FORWARD"
    TURN_LEFT = "TURN_LEFT"
    TURN_RIGHT = "TURN_RIGHT"
    STOP = "STOP"


@dataclass(frozen=True)
class AgentPose:
    x_m: float
    y_m: float
    heading: float  # radians, normalized to [0, 2*pi)


def round_half_away(v: np.ndarray | float):
    """Round to nearest with ties away from zero (symmetric FOV edges)."""
    if isinstance(v, np.ndarray):
        return np.trunc(v + np.copysign(0.5, v)).astype(np.int64)
    return int(math.trunc(v + math.copysign(0.5, v)))


def pose_cell(pose: AgentPose, resolution: float) -> Cell:
    return (round_half_away(pose.x_m / resolution),
            round_half_away(pose.y_m / resolution))


def step(scene: Scene, pose: AgentPose, action: Action) -> AgentPose:
    """Apply one discrete action. Collisions (wall or out-of-grid destination
    cell) absorb the move: the pose is returned unchanged."""
    if action is Action.TURN_LEFT:
        return replace(pose, heading=(pose.heading + TURN_STEP_RAD) % TWO_PI)
    if action is Action.TURN_RIGHT:
        return replace(pose, heading=(pose.heading - TURN_STEP_RAD) % TWO_PI)
    if action is Action.STOP:
        return pose
    nx = pose.x_m + MOVE_STEP_M * math.cos(pose.heading)
    ny = pose.y_m - MOVE_STEP_M * math.sin(pose.heading)
    res = scene.resolution
    cx = round_half_away(nx / res)
    cy = round_half_away(ny / res)
    if not (0 <= cx < scene.width and 0 <= cy < scene.height):
        return pose
    if scene.walls[cy, cx]:
        return pose
    return AgentPose(nx, ny, pose.heading)


@dataclass
class RaySamples:
    """FOV sample lattice for one pose: cell indices per (ray, radial step),
    before any obstacle truncation. Reusable across blocking masks."""

    cells_x: np.ndarray
    cells_y: np.ndarray
    in_bounds: np.ndarray
    clipped_x: np.ndarray   # indices clipped into the grid for fancy lookups
    clipped_y: np.ndarray
    rel_angles: np.ndarray  # radians, ascending
    max_range_m: float


@dataclass
class RayField:
    """Raw FOV ray-cast samples over a blocking mask.

    Arrays are (n_rays, n_samples); `visible` marks samples reached before the
    first blocking cell of their ray (the blocking cell itself included),
    `blocked` marks samples that sit on a blocking cell.
    """

    cells_x: np.ndarray
    cells_y: np.ndarray
    visible: np.ndarray
    blocked: np.ndarray
    rel_angles: np.ndarray  # radians, ascending


def compute_ray_samples(x_m: float, y_m: float, heading: float,
                        grid_shape: tuple[int, int], resolution: float,
                        fov_deg: float = DEFAULT_FOV_DEG,
                        max_range_m: float = DEFAULT_MAX_RANGE_M,
                        angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG,
                        radial_step_cells: float = DEFAULT_RADIAL_STEP_CELLS,
                        ) -> RaySamples:
    h, w = grid_shape
    n_rays = max(1, int(round(fov_deg / angular_step_deg)))
    rel = (np.arange(n_rays) - (n_rays - 1) / 2.0) * math.radians(angular_step_deg)
    angles = heading + rel
    max_range_cells = max_range_m / resolution
    n_d = int(math.floor(max_range_cells / radial_step_cells)) + 1
    dists = np.arange(n_d) * radial_step_cells  # cell units

    cos_a = np.cos(angles)[:, None]
    sin_a = np.sin(angles)[:, None]
    xs = round_half_away(x_m / resolution + dists[None, :] * cos_a)
    ys = round_half_away(y_m / resolution - dists[None, :] * sin_a)
    in_b = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    return RaySamples(cells_x=xs, cells_y=ys, in_bounds=in_b,
                      clipped_x=np.clip(xs, 0, w - 1),
                      clipped_y=np.clip(ys, 0, h - 1),
                      rel_angles=rel, max_range_m=max_range_m)


def truncate_rays(samples: RaySamples, blocking: np.ndarray) -> RayField:
    in_b = samples.in_bounds
    blocked = np.zeros_like(in_b)
    blocked[in_b] = blocking[samples.clipped_y[in_b], samples.clipped_x[in_b]]
    ok = in_b & ~blocked  # samples a ray may pass through
    alive = np.ones_like(ok)
    if ok.shape[1] > 1:
        alive[:, 1:] = np.cumprod(ok[:, :-1], axis=1).astype(bool)
    visible = in_b & alive
    return RayField(cells_x=samples.cells_x, cells_y=samples.cells_y,
                    visible=visible, blocked=blocked & visible,
                    rel_angles=samples.rel_angles)


def cast_rays(x_m: float, y_m: float, heading: float, blocking: np.ndarray,
              resolution: float, fov_deg: float = DEFAULT_FOV_DEG,
              max_range_m: float = DEFAULT_MAX_RANGE_M,
              angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG,
              radial_step_cells: float = DEFAULT_RADIAL_STEP_CELLS) -> RayField:
    samples = compute_ray_samples(x_m, y_m, heading, blocking.shape, resolution,
                                  fov_deg, max_range_m, angular_step_deg,
                                  radial_step_cells)
    return truncate_rays(samples, blocking)


def visible_cells(scene: Scene, pose: AgentPose,
                  fov_deg: float = DEFAULT_FOV_DEG,
                  max_range_m: float = DEFAULT_MAX_RANGE_M,
                  angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG,
                  radial_step_cells: float = DEFAULT_RADIAL_STEP_CELLS) -> set[Cell]:
    """Cells reached by FOV rays, each ray truncated at (and including) the
    first wall cell, so obstacles are observable."""
    field = cast_rays(pose.x_m, pose.y_m, pose.heading, scene.walls,
                      scene.resolution, fov_deg, max_range_m,
                      angular_step_deg, radial_step_cells)
    xs = field.cells_x[field.visible]
    ys = field.cells_y[field.visible]
    return set(zip(xs.tolist(), ys.tolist()))


@dataclass(frozen=True)
class DetectionNoise:
    """Synthetic detector behavior; all draws are seeded and deterministic."""

    base_confidence: float = 0.9
    confidence_sigma: float = 0.05
    false_negative_rate: float = 0.05
    false_positive_rate: float = 0.0      # per visible free cell per step
    false_positive_confidence: float = 0.5
    per_class_confidence: tuple[tuple[int, float], ...] = ()

    @classmethod
    def disabled(cls) -> "DetectionNoise":
        return cls(base_confidence=1.0, confidence_sigma=0.0,
                   false_negative_rate=0.0, false_positive_rate=0.0)

    def base_for(self, class_id: int) -> float:
        for cid, base in self.per_class_confidence:
            if cid == class_id:
                return base
        return self.base_confidence


@dataclass
class Observation:
    visible_cells: set[Cell]
    detections: list[Detection]
    fov_deg: float
    max_range_m: float
    # fast-path arrays for map updates (same content as visible_cells)
    visible_x: np.ndarray | None = None
    visible_y: np.ndarray | None = None
    wall_x: np.ndarray | None = None
    wall_y: np.ndarray | None = None


def observe(scene: Scene, pose: AgentPose, rng_seed: int,
            noise: DetectionNoise = DetectionNoise(),
            fov_deg: float = DEFAULT_FOV_DEG,
            max_range_m: float = DEFAULT_MAX_RANGE_M,
            angular_step_deg: float = DEFAULT_ANGULAR_STEP_DEG,
            radial_step_cells: float = DEFAULT_RADIAL_STEP_CELLS,
            samples: RaySamples | None = None) -> Observation:
    """One step of simulated perception: per-object-cell detections with
    seeded confidence noise, optional false negatives / false positives.

    Fully deterministic for a fixed (scene, pose, rng_seed, noise).
    """
    rng = np.random.default_rng(rng_seed)
    if samples is None:
        samples = compute_ray_samples(pose.x_m, pose.y_m, pose.heading,
                                      scene.walls.shape, scene.resolution,
                                      fov_deg, max_range_m, angular_step_deg,
                                      radial_step_cells)
    field = truncate_rays(samples, scene.walls)
    vx = field.cells_x[field.visible]
    vy = field.cells_y[field.visible]
    vis_mask = np.zeros((scene.height, scene.width), dtype=bool)
    vis_mask[vy, vx] = True

    detections: list[Detection] = []
    # scene.objects is already sorted row-major then class id: deterministic order
    for class_id, (ox, oy) in scene.objects:
        if not vis_mask[oy, ox]:
            continue
        if noise.false_negative_rate > 0.0 and rng.random() < noise.false_negative_rate:
            continue
        base = noise.base_for(class_id)
        if noise.confidence_sigma > 0.0:
            conf = float(np.clip(rng.normal(base, noise.confidence_sigma), 0.0, 1.0))
        else:
            conf = float(np.clip(base, 0.0, 1.0))
        detections.append(Detection(class_id, (ox, oy), conf))

    if noise.false_positive_rate > 0.0:
        occupied = np.zeros((scene.height, scene.width), dtype=bool)
        for _, (ox, oy) in scene.objects:
            occupied[oy, ox] = True
        cand = vis_mask & ~scene.walls & ~occupied
        ys, xs = np.nonzero(cand)  # row-major order
        hits = rng.random(xs.size) < noise.false_positive_rate
        for x, y in zip(xs[hits].tolist(), ys[hits].tolist()):
            class_id = int(rng.integers(1, scene.num_classes + 1))
            if noise.confidence_sigma > 0.0:
                conf = float(np.clip(rng.normal(noise.false_positive_confidence,
                                                noise.confidence_sigma), 0.0, 1.0))
            else:
                conf = float(np.clip(noise.false_positive_confidence, 0.0, 1.0))
            detections.append(Detection(class_id, (x, y), conf))

    uy, ux = np.nonzero(vis_mask)
    wy, wx = np.nonzero(vis_mask & scene.walls)
    return Observation(
        visible_cells=set(zip(ux.tolist(), uy.tolist())),
        detections=detections, fov_deg=fov_deg, max_range_m=max_range_m,
        visible_x=ux, visible_y=uy, wall_x=wx, wall_y=wy,
    )


@dataclass(frozen=True)
class ScoreModel:
    """Scene-level semantic score oracle: exponential decay over the geodesic
    distance from the closest visible cell to the nearest target object."""

    s_max: float = 1.0
    decay_lambda_m: float = 2.0
    noise_sigma: float = 0.0


def semantic_score(scene: Scene, pose: AgentPose, target_class: int,
                   rng_seed: int, model: ScoreModel = ScoreModel(),
                   fov_deg: float = DEFAULT_FOV_DEG,
                   max_range_m: float = DEFAULT_MAX_RANGE_M,
                   visible: Observation | None = None) -> float:
    """clamp01(s_max * exp(-d / lambda) + noise); d in meters, geodesic.

    Pass `visible` to reuse an already computed observation's visible set.
    """
    if visible is None:
        cells = visible_cells(scene, pose, fov_deg, max_range_m)
        xs = np.fromiter((c[0] for c in cells), dtype=np.int64, count=len(cells))
        ys = np.fromiter((c[1] for c in cells), dtype=np.int64, count=len(cells))
    else:
        xs, ys = visible.visible_x, visible.visible_y
    fld = scene.distance_field(target_class)
    d_cells = float(fld[ys, xs].min()) if xs.size else math.inf
    if math.isinf(d_cells):
        base = 0.0
    else:
        d_m = d_cells * scene.resolution
        base = model.s_max * math.exp(-d_m / model.decay_lambda_m)
    if model.noise_sigma > 0.0:
        rng = np.random.default_rng(rng_seed)
        base += float(rng.normal(0.0, model.noise_sigma))
    return float(np.clip(base, 0.0, 1.0))
