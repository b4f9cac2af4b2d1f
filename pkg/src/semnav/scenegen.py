"""Deterministic synthetic apartment scenes: BSP room layouts with doorways,
room-typed furniture blobs, and far-apart start/target placement.

Two styles ship with the suite generator: "dense" rooms are heavily
furnished (strong semantic cues), "sparse" rooms are nearly empty except
for the target's own room.
"""
from __future__ import annotations

import math
from pathlib import Path as FsPath

import numpy as np

from .planning import dijkstra_field
from .scenes import Scene, save_scene

Cell = tuple[int, int]

# fixed legend: (name, grid char); ids are 1-based positions in this list
CLASS_LIST: list[tuple[str, str]] = [
    ("bed", "b"), ("wardrobe", "w"), ("lamp", "l"),
    ("sofa", "s"), ("table", "t"), ("tv", "v"), ("shelf", "e"),
    ("stove", "o"), ("fridge", "f"), ("sink", "k"),
    ("toilet", "u"), ("bathtub", "a"), ("plant", "p"),
]
CLASS_NAMES = [""] + [name for name, _ in CLASS_LIST]
CLASS_CHARS = ["."] + [ch for _, ch in CLASS_LIST]

ROOM_TEMPLATES: dict[str, list[str]] = {
    "bathroom": ["toilet", "bathtub", "sink"],
    "kitchen": ["stove", "fridge"],
    "bedroom": ["bed", "wardrobe", "lamp"],
    "living": ["sofa", "table", "tv"],
    "hall": ["plant", "shelf"],
}
TARGET_ROOM: dict[str, str] = {
    "toilet": "bathroom", "fridge": "kitchen", "bed": "bedroom",
    "sofa": "living", "tv": "living",
}
TARGET_CYCLE = ["toilet", "fridge", "bed", "sofa", "tv"]

Room = tuple[int, int, int, int]  # x0, y0, x1, y1 (half-open interior rect)


def _bsp_rooms(rng: np.random.Generator, walls: np.ndarray,
               min_room: int = 5, max_room: int = 11) -> list[Room]:
    h, w = walls.shape
    rooms: list[Room] = []

    def split(x0: int, y0: int, x1: int, y1: int) -> None:
        rw, rh = x1 - x0, y1 - y0
        can_x = rw >= 2 * min_room + 1
        can_y = rh >= 2 * min_room + 1
        if (rw <= max_room and rh <= max_room) or not (can_x or can_y):
            rooms.append((x0, y0, x1, y1))
            return
        vertical = can_x and (rw >= rh or not can_y)
        # 3-cell doorways stay passable when planning inflates obstacles
        if vertical:
            sx = int(rng.integers(x0 + min_room, x1 - min_room))
            walls[y0:y1, sx] = True
            door = int(rng.integers(y0, y1 - 2))
            walls[door:door + 3, sx] = False
            split(x0, y0, sx, y1)
            split(sx + 1, y0, x1, y1)
        else:
            sy = int(rng.integers(y0 + min_room, y1 - min_room))
            walls[sy, x0:x1] = True
            door = int(rng.integers(x0, x1 - 2))
            walls[sy, door:door + 3] = False
            split(x0, y0, x1, sy)
            split(x0, sy + 1, x1, y1)

    split(1, 1, w - 1, h - 1)
    return rooms


def _place_blob(rng: np.random.Generator, room: Room, occupied: np.ndarray,
                walls: np.ndarray, bw: int, bh: int,
                attempts: int = 25, margin: int = 1) -> list[Cell] | None:
    x0, y0, x1, y1 = room
    lo_x, hi_x = x0 + margin, x1 - margin - bw
    lo_y, hi_y = y0 + margin, y1 - margin - bh
    if hi_x < lo_x or hi_y < lo_y:
        return None
    for _ in range(attempts):
        bx = int(rng.integers(lo_x, hi_x + 1))
        by = int(rng.integers(lo_y, hi_y + 1))
        patch_occ = occupied[by:by + bh, bx:bx + bw]
        patch_wall = walls[by:by + bh, bx:bx + bw]
        if patch_occ.any() or patch_wall.any():
            continue
        cells = [(x, y) for y in range(by, by + bh) for x in range(bx, bx + bw)]
        for (x, y) in cells:
            occupied[y, x] = True
        return cells
    return None


def _furnish_dense(rng: np.random.Generator, room: Room, room_type: str,
                   occupied: np.ndarray, walls: np.ndarray,
                   objects: list[tuple[int, Cell]]) -> None:
    x0, y0, x1, y1 = room
    area = (x1 - x0) * (y1 - y0)
    goal_cells = int(area * rng.uniform(0.5, 0.65))
    classes = ROOM_TEMPLATES[room_type]
    placed = 0
    k = 0
    while placed < goal_cells and k < 20:
        cname = classes[k % len(classes)]
        bw = int(rng.integers(2, 5))
        bh = int(rng.integers(2, 4))
        cells = _place_blob(rng, room, occupied, walls, bw, bh)
        if cells is None and k > 6:
            cells = _place_blob(rng, room, occupied, walls, 2, 1, margin=0)
        if cells:
            cid = CLASS_NAMES.index(cname)
            objects.extend((cid, c) for c in cells)
            placed += len(cells)
        k += 1


def _room_doors(room: Room, walls: np.ndarray) -> list[Cell]:
    """Free cells on the room's bounding wall lines (its doorways)."""
    x0, y0, x1, y1 = room
    h, w = walls.shape
    doors: list[Cell] = []
    for x in range(x0, x1):
        if y0 - 1 >= 0 and not walls[y0 - 1, x]:
            doors.append((x, y0 - 1))
        if y1 < h and not walls[y1, x]:
            doors.append((x, y1))
    for y in range(y0, y1):
        if x0 - 1 >= 0 and not walls[y, x0 - 1]:
            doors.append((x0 - 1, y))
        if x1 < w and not walls[y, x1]:
            doors.append((x1, y))
    return doors


def _furnish_sparse_target_room(rng: np.random.Generator, room: Room,
                                room_type: str, target: str,
                                occupied: np.ndarray, walls: np.ndarray,
                                objects: list[tuple[int, Cell]]) -> bool:
    """Mates sit by the doorway (visible from outside, anchoring prediction
    before the target itself is seen); the target sits deep in the room."""
    x0, y0, x1, y1 = room
    doors = _room_doors(room, walls)
    if doors:
        dx, dy = doors[len(doors) // 2]
    else:
        dx, dy = (x0 + x1) // 2, (y0 + y1) // 2
    mates = [c for c in ROOM_TEMPLATES[room_type] if c != target][:2]
    interior = [(x, y) for y in range(y0, y1) for x in range(x0, x1)]
    near_door = sorted(interior, key=lambda c: ((c[0] - dx) ** 2 + (c[1] - dy) ** 2,
                                                c[1], c[0]))
    placed_mates = 0
    for cname in mates:
        for (mx, my) in near_door:
            if occupied[my, mx] or walls[my, mx]:
                continue
            occupied[my, mx] = True
            objects.append((CLASS_NAMES.index(cname), (mx, my)))
            placed_mates += 1
            break
    # target: deep corner, far from the doorway
    far = sorted(interior, key=lambda c: (-((c[0] - dx) ** 2 + (c[1] - dy) ** 2),
                                          c[1], c[0]))
    tid = CLASS_NAMES.index(target)
    placed_target = 0
    for (tx, ty) in far:
        if occupied[ty, tx] or walls[ty, tx]:
            continue
        occupied[ty, tx] = True
        objects.append((tid, (tx, ty)))
        placed_target += 1
        if placed_target == 2:
            break
    return placed_target > 0 and placed_mates > 0


def make_scene(seed: int, style: str = "sparse", width: int = 42,
               height: int = 30, resolution: float = 0.25,
               target: str | None = None, name: str | None = None) -> Scene:
    """Generate one connected apartment scene; fully determined by arguments."""
    if style not in ("sparse", "dense"):
        raise ValueError(f"unknown style {style!r}")
    for attempt in range(8):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt, 17]))
        scene = _try_make_scene(rng, seed, style, width, height, resolution,
                                target, name)
        if scene is not None:
            return scene
    raise RuntimeError(f"could not generate a valid scene for seed {seed}")


def _try_make_scene(rng: np.random.Generator, seed: int, style: str,
                    width: int, height: int, resolution: float,
                    target: str | None, name: str | None) -> Scene | None:
    walls = np.zeros((height, width), dtype=bool)
    walls[0, :] = walls[-1, :] = True
    walls[:, 0] = walls[:, -1] = True
    rooms = _bsp_rooms(rng, walls)
    if len(rooms) < 4:
        return None

    if target is None:
        target = TARGET_CYCLE[int(rng.integers(0, len(TARGET_CYCLE)))]
    target_room_type = TARGET_ROOM[target]

    # room typing: one room hosts the target's room type, the rest cycle
    order = list(rng.permutation(len(rooms)))
    target_room = rooms[order[0]]
    other_types = [t for t in ROOM_TEMPLATES if t != target_room_type]
    room_types: list[tuple[Room, str]] = [(target_room, target_room_type)]
    for j, idx in enumerate(order[1:]):
        room_types.append((rooms[idx], other_types[j % len(other_types)]))

    occupied = np.zeros_like(walls)
    objects: list[tuple[int, Cell]] = []
    if style == "dense":
        tid = CLASS_NAMES.index(target)
        cells = _place_blob(rng, target_room, occupied, walls, 2, 1)
        if not cells:
            return None
        objects.extend((tid, c) for c in cells)
        for room, rtype in room_types:
            _furnish_dense(rng, room, rtype, occupied, walls, objects)
    else:
        if not _furnish_sparse_target_room(rng, target_room, target_room_type,
                                           target, occupied, walls, objects):
            return None
        # a lone prop elsewhere so sparse maps are not completely blank
        for room, rtype in room_types[1:2]:
            cells = _place_blob(rng, room, occupied, walls, 1, 1)
            if cells:
                cid = CLASS_NAMES.index(ROOM_TEMPLATES[rtype][0])
                objects.extend((cid, c) for c in cells)

    objects.sort(key=lambda oc: (oc[1][1], oc[1][0], oc[0]))
    tid = CLASS_NAMES.index(target)
    target_cells = [c for cid, c in objects if cid == tid]
    field = dijkstra_field(~walls, target_cells)

    # start: reachable object-free cell farthest from the target
    cand = np.isfinite(field) & ~occupied & ~walls
    if not cand.any():
        return None
    masked = np.where(cand, field, -1.0)
    flat = int(np.argmax(masked))
    sy, sx = divmod(flat, width)
    d_start = field[sy, sx]
    if d_start * resolution < 4.0:  # degenerate layout: target too close
        return None

    scene = Scene(
        name=name or f"{style}_{seed:04d}",
        width=width, height=height, resolution=resolution, walls=walls,
        objects=objects, class_names=list(CLASS_NAMES),
        class_chars=list(CLASS_CHARS),
        start_xy_m=(sx * resolution, sy * resolution), start_heading=0.0,
        target_class=tid, optimal_path_length=float(d_start) * resolution,
    )
    scene._fields[tid] = field
    return scene


def make_suite(out_dir: str | FsPath, n_sparse: int = 10, n_dense: int = 10,
               base_seed: int = 0, width: int = 42, height: int = 30,
               resolution: float = 0.25) -> list[FsPath]:
    """Write a sparse+dense scene suite; file order encodes the split."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[FsPath] = []
    for i in range(n_sparse):
        scene = make_scene(base_seed + i, "sparse", width, height, resolution,
                           target=TARGET_CYCLE[i % len(TARGET_CYCLE)],
                           name=f"sparse_{i:02d}")
        p = out / f"sparse_{i:02d}.scene"
        save_scene(scene, p)
        paths.append(p)
    for i in range(n_dense):
        scene = make_scene(base_seed + 1000 + i, "dense", width, height,
                           resolution,
                           target=TARGET_CYCLE[i % len(TARGET_CYCLE)],
                           name=f"dense_{i:02d}")
        p = out / f"dense_{i:02d}.scene"
        save_scene(scene, p)
        paths.append(p)
    return paths


def shortest_path_m(scene: Scene) -> float:
    """Recompute the start->nearest-target geodesic length in meters."""
    sx = int(round(scene.start_xy_m[0] / scene.resolution))
    sy = int(round(scene.start_xy_m[1] / scene.resolution))
    field = scene.distance_field(scene.target_class)
    d = field[sy, sx]
    if not math.isfinite(d):
        raise ValueError("target unreachable")
    return float(d) * scene.resolution
