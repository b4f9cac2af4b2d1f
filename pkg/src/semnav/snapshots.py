"""Versioned textual dump of all map layers (format v1, row-major, layer-tagged).

Layout (byte-exact, platform independent; see docs/formats.md):

    MAPSNAP v1
    width <W>
    height <H>
    resolution <float %g>
    meta <key> <value>          zero or more free-form metadata lines
    layer <name>
    <H rows of W space-separated values>
    ...
    end

Bit layers print 0/1, the class layer prints integer ids, confidence and
value layers print %.6f fixed-point decimals.
"""
from __future__ import annotations

from pathlib import Path as FsPath

import numpy as np

from .grids import LayeredMap

SNAPSHOT_VERSION = "MAPSNAP v1"

_BIT_LAYERS = ("obstacle", "explored", "frontier", "smap_target")
_INT_LAYERS = ("smap_multi",)
_FLOAT_LAYERS = ("cmap_target", "cmap_multi")


def _format_rows(arr: np.ndarray, fmt: str) -> list[str]:
    return [" ".join(fmt % v for v in row) for row in arr]


def dump_snapshot(maps: LayeredMap, value_grid: np.ndarray | None = None,
                  meta: dict[str, str] | None = None) -> str:
    lines = [SNAPSHOT_VERSION,
             f"width {maps.width}",
             f"height {maps.height}",
             f"resolution {maps.resolution:g}"]
    for key in sorted(meta or {}):
        lines.append(f"meta {key} {(meta or {})[key]}")
    for name in _BIT_LAYERS:
        lines.append(f"layer {name}")
        lines.extend(_format_rows(getattr(maps, name).astype(np.int64), "%d"))
    for name in _INT_LAYERS:
        lines.append(f"layer {name}")
        lines.extend(_format_rows(getattr(maps, name), "%d"))
    for name in _FLOAT_LAYERS:
        lines.append(f"layer {name}")
        lines.extend(_format_rows(getattr(maps, name), "%.6f"))
    if value_grid is not None:
        lines.append("layer value")
        lines.extend(_format_rows(value_grid, "%.6f"))
    lines.append("end")
    return "\n".join(lines) + "\n"


class SnapshotError(ValueError):
    pass


def parse_snapshot(text: str) -> tuple[LayeredMap, np.ndarray | None, dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0] != SNAPSHOT_VERSION:
        raise SnapshotError(f"bad snapshot header: {lines[:1]}")
    i = 1
    dims: dict[str, float] = {}
    meta: dict[str, str] = {}
    while i < len(lines):
        parts = lines[i].split(maxsplit=2)
        if parts and parts[0] in ("width", "height", "resolution"):
            dims[parts[0]] = float(parts[1])
            i += 1
        elif parts and parts[0] == "meta":
            meta[parts[1]] = parts[2] if len(parts) > 2 else ""
            i += 1
        else:
            break
    for key in ("width", "height", "resolution"):
        if key not in dims:
            raise SnapshotError(f"missing {key}")
    w, h = int(dims["width"]), int(dims["height"])
    maps = LayeredMap.create(w, h, dims["resolution"])
    value_grid: np.ndarray | None = None

    while i < len(lines) and lines[i] != "end":
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != "layer":
            raise SnapshotError(f"expected layer tag at line {i}: {lines[i]!r}")
        name = parts[1]
        i += 1
        if i + h > len(lines):
            raise SnapshotError(f"layer {name} truncated")
        rows = [lines[i + r].split() for r in range(h)]
        if any(len(row) != w for row in rows):
            raise SnapshotError(f"layer {name} has a bad row width")
        arr = np.array([[float(v) for v in row] for row in rows])
        i += h
        if name in _BIT_LAYERS:
            setattr(maps, name, arr.astype(bool))
        elif name in _INT_LAYERS:
            setattr(maps, name, arr.astype(np.int16))
        elif name in _FLOAT_LAYERS:
            setattr(maps, name, arr)
        elif name == "value":
            value_grid = arr
        else:
            raise SnapshotError(f"unknown layer {name!r}")
    if i >= len(lines):
        raise SnapshotError("missing end tag")
    return maps, value_grid, meta


def save_snapshot(path: str | FsPath, maps: LayeredMap,
                  value_grid: np.ndarray | None = None,
                  meta: dict[str, str] | None = None) -> None:
    FsPath(path).write_text(dump_snapshot(maps, value_grid, meta), encoding="utf-8")


def load_snapshot(path: str | FsPath):
    return parse_snapshot(FsPath(path).read_text(encoding="utf-8"))
