"""Fusion exploration policy: semantic-cue intensity, dynamic weights,
dual-source frontier scoring, target locking and the per-step goal decision.

All functions are pure over map snapshots; episode state (goal persistence,
counters, traces) lives in the episode runner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

Cell = tuple[int, int]

SCI_DENSE_THRESHOLD = 0.6
SCI_SPARSE_THRESHOLD = 0.3
SCI_CONFIDENCE_THRESHOLD = 0.6
LOCK_CONFIDENCE_THRESHOLD = 0.7
LOCK_NEIGHBORHOOD = 5
DAR_EPSILON = 1e-6


class SceneCategory(Enum):
    DENSE = "dense"
    MODERATE = "moderate"
    SPARSE = "sparse"


@dataclass(frozen=True)
class SciReading:
    value: float
    category: SceneCategory


@dataclass(frozen=True)
class DarWeights:
    w_pred: float
    w_vlm: float


class LockMode(Enum):
    FUSED = "fused"            # single-target + multi-object agreement
    SINGLE_ONLY = "single"     # multi-object localization disabled
    MULTI_ONLY = "multi"       # single-target localization disabled


class DecisionKind(Enum):
    EXPLORE = "explore"
    NAVIGATE = "navigate"
    STOP = "stop"


@dataclass
class GoalDecision:
    kind: DecisionKind
    cell: Cell | None
    dar: float | None
    sci: SciReading
    weights: DarWeights


def categorize_sci(value: float) -> SceneCategory:
    if value > SCI_DENSE_THRESHOLD:
        return SceneCategory.DENSE
    if value < SCI_SPARSE_THRESHOLD:
        return SceneCategory.SPARSE
    return SceneCategory.MODERATE


def compute_sci(smap_multi: np.ndarray, cmap_multi: np.ndarray,
                fov_cells, conf_threshold: float = SCI_CONFIDENCE_THRESHOLD) -> SciReading:
    """Fraction of FOV cells carrying a confident semantic label.

    `fov_cells` is either a set of (x, y) tuples or an (xs, ys) array pair.
    """
    if isinstance(fov_cells, tuple) and len(fov_cells) == 2:
        xs, ys = fov_cells
        xs = np.asarray(xs)
        ys = np.asarray(ys)
    else:
        cells = list(fov_cells)
        xs = np.array([c[0] for c in cells], dtype=np.int64)
        ys = np.array([c[1] for c in cells], dtype=np.int64)
    if xs.size == 0:
        raise ValueError("empty FOV: caller must supply at least the agent's cell")
    qualifying = (smap_multi[ys, xs] != 0) & (cmap_multi[ys, xs] > conf_threshold)
    value = float(qualifying.sum()) / float(xs.size)
    return SciReading(value=value, category=categorize_sci(value))


def weights_from_sci(sci: SciReading) -> DarWeights:
    return DarWeights(w_pred=1.0 - sci.value, w_vlm=sci.value)


def dar_score(d: float, v: float, w: DarWeights, eps: float = DAR_EPSILON) -> float:
    """Exploration priority of one candidate: w_pred / (d + eps) + w_vlm * v.

    `d` is the diagonal-normalized distance-map value in [0, 1].
    """
    return w.w_pred * (1.0 / (d + eps)) + w.w_vlm * v


def grid_diagonal(width: int, height: int) -> float:
    """Normalization constant for distance-map values: the farthest possible
    cell-to-cell distance."""
    return math.hypot(width - 1, height - 1)


def select_frontier(frontier: np.ndarray, dmap_grid: np.ndarray,
                    vsmooth: np.ndarray, w: DarWeights,
                    agent_cell: Cell, eps: float = DAR_EPSILON) -> tuple[Cell, float] | None:
    """Argmax of the DAR score over frontier cells; ties broken by distance to
    the agent, then row-major order. Returns None when no frontier exists."""
    ys, xs = np.nonzero(frontier)
    if xs.size == 0:
        return None
    h, w_cells = frontier.shape
    diag = grid_diagonal(w_cells, h)
    d = dmap_grid[ys, xs] / diag
    v = vsmooth[ys, xs]
    scores = w.w_pred * (1.0 / (d + eps)) + w.w_vlm * v
    best = scores.max()
    tie = scores == best
    ax, ay = agent_cell
    d2 = (xs[tie] - ax) ** 2 + (ys[tie] - ay) ** 2
    order = np.lexsort((xs[tie], ys[tie], d2))
    i = order[0]
    return (int(xs[tie][i]), int(ys[tie][i])), float(best)


def _nearest_mask_cell(mask: np.ndarray, target: Cell) -> Cell | None:
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        return None
    tx, ty = target
    d2 = (xs - tx) ** 2 + (ys - ty) ** 2
    order = np.lexsort((xs, ys, d2))
    i = order[0]
    return (int(xs[i]), int(ys[i]))


def try_lock_target(smap_target: np.ndarray, cmap_target: np.ndarray,
                    smap_multi: np.ndarray, cmap_multi: np.ndarray,
                    explored: np.ndarray, obstacle: np.ndarray,
                    target_class: int,
                    threshold: float = LOCK_CONFIDENCE_THRESHOLD,
                    k: int = LOCK_NEIGHBORHOOD,
                    mode: LockMode = LockMode.FUSED) -> Cell | None:
    """Lock onto the target once its confidence record is trustworthy.

    FUSED: triggered by any single-target confidence above `threshold`; the
    goal comes from the argmax of the averaged confidences over cells where
    both semantic maps agree on the target (falling back to the single-target
    argmax when they never agree). The returned cell is the explored free
    cell nearest to the centroid of the argmax's k x k agreeing neighborhood.
    """
    h, w = cmap_target.shape
    if mode is LockMode.FUSED:
        if not (cmap_target > threshold).any():
            return None
        region = smap_target & (smap_multi == target_class)
        value = (cmap_target + cmap_multi) / 2.0
        if not region.any():
            region = smap_target.astype(bool)
            value = cmap_target
    elif mode is LockMode.SINGLE_ONLY:
        region = smap_target.astype(bool)
        value = cmap_target
        if not (region & (value > threshold)).any():
            return None
    else:
        region = smap_multi == target_class
        value = cmap_multi
        if not (region & (value > threshold)).any():
            return None
    if not region.any():
        return None

    masked = np.where(region, value, -1.0)
    flat = int(np.argmax(masked))  # row-major first maximum
    by, bx = divmod(flat, w)

    half = k // 2
    y0, y1 = max(0, by - half), min(h, by + half + 1)
    x0, x1 = max(0, bx - half), min(w, bx + half + 1)
    win = region[y0:y1, x0:x1]
    wys, wxs = np.nonzero(win)
    if wxs.size:
        cx = int(np.trunc((wxs.mean() + x0) + 0.5))
        cy = int(np.trunc((wys.mean() + y0) + 0.5))
    else:
        cx, cy = bx, by

    navigable = explored & ~obstacle
    goal = _nearest_mask_cell(navigable, (cx, cy))
    return goal if goal is not None else (bx, by)


def decide(frontier: np.ndarray, dmap_grid: np.ndarray, vsmooth: np.ndarray,
           smap_target: np.ndarray, cmap_target: np.ndarray,
           smap_multi: np.ndarray, cmap_multi: np.ndarray,
           explored: np.ndarray, obstacle: np.ndarray,
           agent_cell: Cell, target_class: int, fov_cells,
           lock_threshold: float = LOCK_CONFIDENCE_THRESHOLD,
           lock_k: int = LOCK_NEIGHBORHOOD,
           lock_mode: LockMode = LockMode.FUSED,
           sci_conf_threshold: float = SCI_CONFIDENCE_THRESHOLD,
           eps: float = DAR_EPSILON,
           sci_override: SciReading | None = None,
           weights_override: DarWeights | None = None) -> GoalDecision:
    """One full goal decision: a confident target lock preempts exploration;
    otherwise SCI-derived weights rank the frontier; no frontier means stop.

    The overrides express ablations (forced SCI, pinned weights) without
    changing the decision structure.
    """
    sci = sci_override if sci_override is not None else compute_sci(
        smap_multi, cmap_multi, fov_cells, sci_conf_threshold)
    weights = weights_override if weights_override is not None else weights_from_sci(sci)

    lock = try_lock_target(smap_target, cmap_target, smap_multi, cmap_multi,
                           explored, obstacle, target_class,
                           threshold=lock_threshold, k=lock_k, mode=lock_mode)
    if lock is not None:
        return GoalDecision(DecisionKind.NAVIGATE, lock, None, sci, weights)

    pick = select_frontier(frontier, dmap_grid, vsmooth, weights, agent_cell, eps)
    if pick is None:
        return GoalDecision(DecisionKind.STOP, None, None, sci, weights)
    cell, score = pick
    return GoalDecision(DecisionKind.EXPLORE, cell, score, sci, weights)
