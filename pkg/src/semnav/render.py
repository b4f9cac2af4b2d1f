"""Episode snapshot rendering: 8-bit PGM exports and multi-panel PNG frames.

PGM files are binary P5, maxval 255, comment-free (header documented in
docs/formats.md): values scale linearly from [0, 1] to [0, 255].
"""
from __future__ import annotations

from pathlib import Path as FsPath

import numpy as np
from PIL import Image

from .grids import LayeredMap


def write_pgm(path: str | FsPath, grid01: np.ndarray) -> None:
    arr = np.clip(np.asarray(grid01, dtype=np.float64), 0.0, 1.0)
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5 {w} {h} 255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path: str | FsPath) -> np.ndarray:
    raw = FsPath(path).read_bytes()
    header, _, body = raw.partition(b"\n")
    magic, w, h, maxval = header.split()
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"unsupported PGM header: {header!r}")
    w, h = int(w), int(h)
    data = np.frombuffer(body[:w * h], dtype=np.uint8).reshape(h, w)
    return data.astype(np.float64) / 255.0


def _class_palette(n: int) -> np.ndarray:
    """id 0 -> white; object classes get evenly spaced hues."""
    colors = np.zeros((n + 1, 3), dtype=np.uint8)
    colors[0] = (255, 255, 255)
    for i in range(1, n + 1):
        hue = (i - 1) / max(n, 1)
        colors[i] = _hsv_to_rgb(hue, 0.75, 0.9)
    return colors


def _hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    r, g, b = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return (int(r * 255), int(g * 255), int(b * 255))


def _occupancy_panel(maps: LayeredMap) -> np.ndarray:
    h, w = maps.obstacle.shape
    img = np.full((h, w, 3), 128, dtype=np.uint8)        # unknown: gray
    img[maps.explored] = (255, 255, 255)                 # explored free: white
    img[maps.obstacle] = (0, 0, 0)                       # walls: black
    img[maps.frontier] = (230, 60, 60)                   # frontier: red
    return img


def _semantic_panel(maps: LayeredMap) -> np.ndarray:
    n = int(maps.smap_multi.max())
    palette = _class_palette(max(n, 1))
    return palette[maps.smap_multi]


def _gray_panel(grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    mx = g.max()
    if mx > 0:
        g = g / mx
    v = (np.clip(g, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return np.stack([v, v, v], axis=-1)


def render_panels(maps: LayeredMap, value_grid: np.ndarray | None = None,
                  distance_grid: np.ndarray | None = None,
                  agent_cell: tuple[int, int] | None = None,
                  goal_cell: tuple[int, int] | None = None,
                  scale: int = 6) -> Image.Image:
    """Side-by-side panels: occupancy+frontiers, semantic labels, value map,
    distance map (inverted so near-target regions render bright)."""
    panels = [_occupancy_panel(maps), _semantic_panel(maps)]
    if value_grid is not None:
        panels.append(_gray_panel(value_grid))
    if distance_grid is not None:
        d = np.asarray(distance_grid, dtype=np.float64)
        mx = d[np.isfinite(d)].max() if np.isfinite(d).any() else 1.0
        panels.append(_gray_panel(1.0 - np.clip(d / max(mx, 1e-9), 0.0, 1.0)))
    for overlay, color in ((agent_cell, (40, 90, 255)), (goal_cell, (20, 180, 20))):
        if overlay is not None:
            x, y = overlay
            if 0 <= y < panels[0].shape[0] and 0 <= x < panels[0].shape[1]:
                panels[0][y, x] = color
    sep = np.full((panels[0].shape[0], 2, 3), 40, dtype=np.uint8)
    strips: list[np.ndarray] = []
    for k, p in enumerate(panels):
        if k:
            strips.append(sep)
        strips.append(p)
    frame = np.concatenate(strips, axis=1)
    img = Image.fromarray(frame, mode="RGB")
    return img.resize((frame.shape[1] * scale, frame.shape[0] * scale),
                      Image.NEAREST)


def save_panels(path: str | FsPath, maps: LayeredMap, **kwargs) -> None:
    render_panels(maps, **kwargs).save(str(path))
