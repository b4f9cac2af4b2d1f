"""Static grid-world scenes and their human-editable text format.

Format (documented byte-exact in docs/formats.md):

    W H resolution                  header
    <H rows of W chars>             '#' wall, '.' free, 'A' agent start,
                                    any other char = object, mapped by legend
    class <char> <name>             legend, ids assigned in order from 1
    target <name>                   navigation goal class
    optimal <meters>                optional; validated against the grid
    heading <degrees>               optional start heading, default 0

Objects sit on free cells and do not block movement or sight; only '#'
cells are obstacles. The parser rejects scenes whose target cannot be
reached from the start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .planning import dijkstra_field

Cell = tuple[int, int]


class SceneError(ValueError):
    pass


@dataclass
class Scene:
    name: str
    width: int
    height: int
    resolution: float
    walls: np.ndarray                      # bool (H, W)
    objects: list[tuple[int, Cell]]        # (class_id, (x, y)), row-major order
    class_names: list[str]                 # index = class id; [0] is ""
    class_chars: list[str]                 # index = class id; [0] is "."
    start_xy_m: tuple[float, float]
    start_heading: float
    target_class: int
    optimal_path_length: float             # meters, start -> nearest target cell
    _fields: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def num_classes(self) -> int:
        return len(self.class_names) - 1

    @property
    def free(self) -> np.ndarray:
        return ~self.walls

    def object_cells(self, class_id: int) -> list[Cell]:
        return [cell for cid, cell in self.objects if cid == class_id]

    def distance_field(self, class_id: int) -> np.ndarray:
        """Geodesic distance (cells) from every free cell to the nearest
        object of `class_id`; cached per class."""
        if class_id not in self._fields:
            cells = self.object_cells(class_id)
            self._fields[class_id] = dijkstra_field(self.free, cells)
        return self._fields[class_id]


def _assign_ids(legend: list[tuple[str, str]]) -> tuple[list[str], list[str]]:
    names = [""]
    chars = ["."]
    for ch, name in legend:
        if name in names:
            raise SceneError(f"duplicate class name {name!r}")
        if ch in chars or ch in "#.A":
            raise SceneError(f"bad or duplicate legend char {ch!r}")
        names.append(name)
        chars.append(ch)
    return names, chars


def parse_scene(text: str, name: str = "scene") -> Scene:
    lines = text.splitlines()
    if not lines:
        raise SceneError("empty scene file")
    header = lines[0].split()
    if len(header) != 3:
        raise SceneError(f"bad header {lines[0]!r}, expected 'W H resolution'")
    width, height = int(header[0]), int(header[1])
    resolution = float(header[2])
    if width <= 0 or height <= 0 or resolution <= 0:
        raise SceneError("width, height and resolution must be positive")
    if len(lines) < 1 + height:
        raise SceneError(f"grid truncated: expected {height} rows")

    walls = np.zeros((height, width), dtype=bool)
    start_cell: Cell | None = None
    object_chars: list[tuple[str, Cell]] = []
    for y in range(height):
        row = lines[1 + y]
        if len(row) != width:
            raise SceneError(f"row {y} has length {len(row)}, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                walls[y, x] = True
            elif ch == ".":
                continue
            elif ch == "A":
                if start_cell is not None:
                    raise SceneError("multiple start cells")
                start_cell = (x, y)
            else:
                object_chars.append((ch, (x, y)))

    legend: list[tuple[str, str]] = []
    target_name: str | None = None
    optimal: float | None = None
    heading_deg = 0.0
    for raw in lines[1 + height:]:
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        parts = line.split()
        if parts[0] == "class" and len(parts) == 3:
            legend.append((parts[1], parts[2]))
        elif parts[0] == "target" and len(parts) == 2:
            target_name = parts[1]
        elif parts[0] == "optimal" and len(parts) == 2:
            optimal = float(parts[1])
        elif parts[0] == "heading" and len(parts) == 2:
            heading_deg = float(parts[1])
        else:
            raise SceneError(f"unrecognized scene directive: {line!r}")

    names, chars = _assign_ids(legend)
    char_to_id = {ch: i for i, ch in enumerate(chars) if i > 0}
    objects: list[tuple[int, Cell]] = []
    for ch, cell in object_chars:
        if ch not in char_to_id:
            raise SceneError(f"grid char {ch!r} missing from legend")
        objects.append((char_to_id[ch], cell))
    objects.sort(key=lambda oc: (oc[1][1], oc[1][0], oc[0]))

    if start_cell is None:
        raise SceneError("no start cell 'A'")
    if target_name is None:
        raise SceneError("no target directive")
    if target_name not in names:
        raise SceneError(f"target {target_name!r} not in legend")
    target_class = names.index(target_name)

    scene = Scene(
        name=name, width=width, height=height, resolution=resolution,
        walls=walls, objects=objects, class_names=names, class_chars=chars,
        start_xy_m=(start_cell[0] * resolution, start_cell[1] * resolution),
        start_heading=math.radians(heading_deg) % (2.0 * math.pi),
        target_class=target_class, optimal_path_length=0.0,
    )

    target_cells = scene.object_cells(target_class)
    if not target_cells:
        raise SceneError(f"no objects of target class {target_name!r}")
    dist = scene.distance_field(target_class)
    d_start = dist[start_cell[1], start_cell[0]]
    if not math.isfinite(d_start):
        raise SceneError("target unreachable from start")
    computed = float(d_start) * resolution
    if optimal is not None and abs(optimal - computed) > 1e-6:
        raise SceneError(
            f"declared optimal length {optimal} != computed {computed:.6f}")
    scene.optimal_path_length = computed
    return scene


def load_scene(path: str | FsPath) -> Scene:
    p = FsPath(path)
    return parse_scene(p.read_text(encoding="utf-8"), name=p.stem)


def scene_to_text(scene: Scene) -> str:
    grid = [["#" if scene.walls[y, x] else "." for x in range(scene.width)]
            for y in range(scene.height)]
    for cid, (x, y) in scene.objects:
        grid[y][x] = scene.class_chars[cid]
    res = scene.resolution
    sx = int(round(scene.start_xy_m[0] / res))
    sy = int(round(scene.start_xy_m[1] / res))
    grid[sy][sx] = "A"
    lines = [f"{scene.width} {scene.height} {scene.resolution:g}"]
    lines.extend("".join(row) for row in grid)
    for cid in range(1, len(scene.class_names)):
        lines.append(f"class {scene.class_chars[cid]} {scene.class_names[cid]}")
    lines.append(f"target {scene.class_names[scene.target_class]}")
    lines.append(f"optimal {scene.optimal_path_length:.6f}")
    lines.append(f"heading {math.degrees(scene.start_heading):g}")
    return "\n".join(lines) + "\n"


def save_scene(scene: Scene, path: str | FsPath) -> None:
    FsPath(path).write_text(scene_to_text(scene), encoding="utf-8")
