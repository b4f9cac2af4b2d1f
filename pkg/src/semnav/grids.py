"""Layered grid maps: obstacle/explored/frontier plus semantic and confidence layers.

All layers are dense (H, W) numpy arrays indexed [y, x]; class id 0 means
"no label". Confidence cells live in [0, 1] and are coupled to their labels:
a nonzero label always carries a positive confidence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Cell = tuple[int, int]


@dataclass(frozen=True)
class Detection:
    """One detected object cell: (class id, cell, confidence in [0, 1])."""

    class_id: int
    cell: Cell
    confidence: float


def update_target_confidence(cmap: float, c: float) -> float:
    """Single-target confidence update for one cell.

    Keeps the higher confidence outright; a weaker observation is blended in
    by averaging so stale certainty decays instead of being discarded.
    """
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"confidence out of range: {c}")
    if not (0.0 <= cmap <= 1.0):
        raise ValueError(f"stored confidence out of range: {cmap}")
    if c >= cmap:
        return c
    return (cmap + c) / 2.0


def update_multi_maps(smap: int, cmap: float, l_obj: int, c: float) -> tuple[int, float]:
    """Multi-object label/confidence update for one cell.

    A strictly higher confidence overwrites the label; a weaker observation of
    the same class averages the confidence; a weaker observation of a
    different class changes nothing.
    """
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"confidence out of range: {c}")
    if l_obj <= 0:
        raise ValueError(f"invalid object label: {l_obj}")
    if c > cmap:
        return l_obj, c
    if smap == l_obj:
        return smap, (cmap + c) / 2.0
    return smap, cmap


@dataclass
class LayeredMap:
    """The coupled map layers owned by one episode."""

    width: int
    height: int
    resolution: float
    obstacle: np.ndarray
    explored: np.ndarray
    frontier: np.ndarray
    smap_target: np.ndarray
    smap_multi: np.ndarray
    cmap_target: np.ndarray
    cmap_multi: np.ndarray
    num_classes: int | None = field(default=None)

    @classmethod
    def create(cls, width: int, height: int, resolution: float = 0.25,
               num_classes: int | None = None) -> "LayeredMap":
        if width <= 0 or height <= 0 or resolution <= 0:
            raise ValueError("map dimensions and resolution must be positive")
        shape = (height, width)
        return cls(
            width=width,
            height=height,
            resolution=resolution,
            obstacle=np.zeros(shape, dtype=bool),
            explored=np.zeros(shape, dtype=bool),
            frontier=np.zeros(shape, dtype=bool),
            smap_target=np.zeros(shape, dtype=bool),
            smap_multi=np.zeros(shape, dtype=np.int16),
            cmap_target=np.zeros(shape, dtype=np.float64),
            cmap_multi=np.zeros(shape, dtype=np.float64),
            num_classes=num_classes,
        )

    def copy(self) -> "LayeredMap":
        return LayeredMap(
            width=self.width, height=self.height, resolution=self.resolution,
            obstacle=self.obstacle.copy(), explored=self.explored.copy(),
            frontier=self.frontier.copy(), smap_target=self.smap_target.copy(),
            smap_multi=self.smap_multi.copy(), cmap_target=self.cmap_target.copy(),
            cmap_multi=self.cmap_multi.copy(), num_classes=self.num_classes,
        )

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def _check_bounds(self, cells: Iterable[Cell]) -> None:
        for cell in cells:
            if not self.in_bounds(cell):
                raise ValueError(f"cell out of bounds: {cell}")

    def mark_obstacles(self, occupied: Iterable[Cell]) -> None:
        """Set O=1 for each cell. Obstacles are sticky: never cleared."""
        cells = list(occupied)
        self._check_bounds(cells)
        for x, y in cells:
            self.obstacle[y, x] = True

    def mark_explored(self, visible: Iterable[Cell]) -> None:
        """Set E=1 for each visible cell; explored cells never revert."""
        cells = list(visible)
        self._check_bounds(cells)
        for x, y in cells:
            self.explored[y, x] = True

    def mark_explored_arrays(self, xs: np.ndarray, ys: np.ndarray) -> None:
        self.explored[ys, xs] = True

    def mark_obstacles_arrays(self, xs: np.ndarray, ys: np.ndarray) -> None:
        self.obstacle[ys, xs] = True

    def extract_frontiers(self) -> np.ndarray:
        """Recompute the frontier layer: explored, free, with an unexplored 8-neighbor.

        The neighborhood is truncated at the grid edge: a fully explored map
        has no frontiers.
        """
        e = self.explored
        # any-unexplored-neighbor via a padded window; padding counts explored
        padded = np.pad(e, 1, mode="constant", constant_values=True)
        all_explored = np.ones_like(e, dtype=bool)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                all_explored &= padded[1 + dy:1 + dy + self.height,
                                       1 + dx:1 + dx + self.width]
        self.frontier = e & ~self.obstacle & ~all_explored
        return self.frontier

    def apply_detections(self, detections: Sequence[Detection], target_class: int,
                         update_target: bool = True, update_multi: bool = True) -> None:
        """Apply a detection batch in list order.

        Every detection updates the multi-object maps; detections of the
        target class additionally update the single-target maps. The two
        halves can be switched off independently (ablations).
        """
        for det in detections:
            x, y = det.cell
            if not self.in_bounds(det.cell):
                raise ValueError(f"detection out of bounds: {det}")
            if self.num_classes is not None and not (1 <= det.class_id <= self.num_classes):
                raise ValueError(f"unknown class id {det.class_id}")
            if update_multi:
                label, conf = update_multi_maps(
                    int(self.smap_multi[y, x]), float(self.cmap_multi[y, x]),
                    det.class_id, det.confidence)
                self.smap_multi[y, x] = label
                self.cmap_multi[y, x] = conf
            if update_target and det.class_id == target_class:
                self.cmap_target[y, x] = update_target_confidence(
                    float(self.cmap_target[y, x]), det.confidence)
                # zero-confidence detections are vacuous; keep label/confidence coupled
                if self.cmap_target[y, x] > 0.0:
                    self.smap_target[y, x] = True
