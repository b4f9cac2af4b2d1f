"""Predicted target locations: a co-occurrence heuristic over the multi-object
semantic map, the distance map it induces, and a client for a remote learned
predictor speaking the line-delimited JSON wire protocol (v1).

Wire protocol (byte-exact spec in docs/formats.md):
  request  {"v":1,"w":W,"h":H,"target_class":T,
            "smap":[row-major class ids],"cmap":[row-major round(conf*1000)]}
  response {"v":1,"points":[[x,y],...]}
"""
from __future__ import annotations

import json
import math
import socket
from dataclasses import dataclass
from importlib import resources
from pathlib import Path as FsPath
from typing import Callable

import numpy as np
from scipy import ndimage

from .world import round_half_away

Cell = tuple[int, int]

WIRE_VERSION = 1
DEFAULT_N_TARGETS = 3

_LABEL_STRUCTURE = np.ones((3, 3), dtype=bool)  # 8-connected clusters


@dataclass
class PredictedTargets:
    points: list[Cell]


@dataclass
class DistanceMap:
    grid: np.ndarray  # (H, W) float64, cell units


class CooccurrencePrior:
    """Symmetric class-affinity weights keyed by class name.

    Unknown pairs fall back to `default`; a class always co-occurs with
    itself at `self_affinity`.
    """

    def __init__(self, affinities: dict[frozenset, float] | None = None,
                 default: float = 0.05, self_affinity: float = 1.0):
        self.affinities = affinities or {}
        self.default = default
        self.self_affinity = self_affinity

    def weight(self, target_name: str, other_name: str) -> float:
        if target_name == other_name:
            return self.self_affinity
        return self.affinities.get(frozenset((target_name, other_name)), self.default)

    @classmethod
    def parse(cls, text: str) -> "CooccurrencePrior":
        affinities: dict[frozenset, float] = {}
        default = 0.05
        self_affinity = 1.0
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "default" and len(parts) == 2:
                default = float(parts[1])
            elif parts[0] == "self" and len(parts) == 2:
                self_affinity = float(parts[1])
            elif parts[0] == "affinity" and len(parts) == 4:
                w = float(parts[3])
                if w < 0:
                    raise ValueError(f"negative affinity: {line!r}")
                affinities[frozenset((parts[1], parts[2]))] = w
            else:
                raise ValueError(f"bad prior line: {line!r}")
        return cls(affinities, default, self_affinity)

    @classmethod
    def load(cls, path: str | FsPath) -> "CooccurrencePrior":
        return cls.parse(FsPath(path).read_text(encoding="utf-8"))

    @classmethod
    def bundled(cls) -> "CooccurrencePrior":
        text = resources.files("semnav").joinpath("data/cooccurrence.txt").read_text()
        return cls.parse(text)


def map_center(width: int, height: int) -> Cell:
    return (width // 2, height // 2)


def predict_targets(smap_multi: np.ndarray, cmap_multi: np.ndarray,
                    target_class: int, prior: CooccurrencePrior,
                    class_names: list[str],
                    n_targets: int = DEFAULT_N_TARGETS) -> PredictedTargets:
    """Affinity-weighted cluster centroids from the multi-object maps.

    Labeled cells are clustered per class (8-connected components); each
    cluster scores prior(target, class) * mean confidence, and the top-N
    centroids come back in score order. No labels at all -> map center.
    """
    h, w = smap_multi.shape
    target_name = class_names[target_class]
    scored: list[tuple[float, int, int]] = []  # (-score, y, x) for sorting
    for class_id in np.unique(smap_multi):
        if class_id == 0:
            continue
        affinity = prior.weight(target_name, class_names[int(class_id)])
        if affinity <= 0.0:
            continue  # zero-affinity labels carry no evidence about the target
        mask = smap_multi == class_id
        labels, n = ndimage.label(mask, structure=_LABEL_STRUCTURE)
        for k in range(1, n + 1):
            ys, xs = np.nonzero(labels == k)
            score = affinity * float(cmap_multi[ys, xs].mean())
            if score <= 0.0:
                continue
            cx = min(max(round_half_away(float(xs.mean())), 0), w - 1)
            cy = min(max(round_half_away(float(ys.mean())), 0), h - 1)
            scored.append((-score, cy, cx))
    if not scored:
        return PredictedTargets(points=[map_center(w, h)])
    scored.sort()
    return PredictedTargets(points=[(x, y) for _, y, x in scored[:n_targets]])


def distance_map(points: PredictedTargets, dims: tuple[int, int]) -> DistanceMap:
    """Per cell, Euclidean distance (in cells) to the nearest predicted target."""
    if not points.points:
        raise ValueError("no predicted targets")
    width, height = dims
    xs = np.arange(width, dtype=np.float64)[None, :]
    ys = np.arange(height, dtype=np.float64)[:, None]
    grid = np.full((height, width), np.inf)
    for (px, py) in points.points:
        np.minimum(grid, np.hypot(xs - px, ys - py), out=grid)
    return DistanceMap(grid=grid)


# --- wire protocol ----------------------------------------------------------

class ProtocolError(RuntimeError):
    pass


def encode_predict_request(smap_multi: np.ndarray, cmap_multi: np.ndarray,
                           target_class: int) -> str:
    h, w = smap_multi.shape
    return json.dumps({
        "v": WIRE_VERSION, "w": w, "h": h, "target_class": int(target_class),
        "smap": [int(v) for v in smap_multi.ravel()],
        "cmap": [int(round(float(v) * 1000)) for v in cmap_multi.ravel()],
    }, separators=(",", ":"))


def decode_predict_request(line: str) -> tuple[int, int, int, np.ndarray, np.ndarray]:
    try:
        msg = json.loads(line)
        if msg.get("v") != WIRE_VERSION:
            raise ProtocolError(f"unsupported version {msg.get('v')!r}")
        w, h = int(msg["w"]), int(msg["h"])
        target_class = int(msg["target_class"])
        smap = np.asarray(msg["smap"], dtype=np.int16)
        cmap = np.asarray(msg["cmap"], dtype=np.float64) / 1000.0
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed request: {e}") from e
    if smap.size != w * h or cmap.size != w * h:
        raise ProtocolError(f"dimension mismatch: {smap.size} cells for {w}x{h}")
    return w, h, target_class, smap.reshape(h, w), cmap.reshape(h, w)


def encode_predict_response(points: list[Cell]) -> str:
    return json.dumps({"v": WIRE_VERSION,
                       "points": [[int(x), int(y)] for x, y in points]},
                      separators=(",", ":"))


def decode_predict_response(line: str, width: int, height: int) -> list[Cell]:
    try:
        msg = json.loads(line)
        if msg.get("v") != WIRE_VERSION:
            raise ProtocolError(f"unsupported version {msg.get('v')!r}")
        pts = [(int(p[0]), int(p[1])) for p in msg["points"]]
    except (KeyError, TypeError, ValueError, IndexError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed response: {e}") from e
    if not pts:
        raise ProtocolError("empty point list")
    return [(min(max(x, 0), width - 1), min(max(y, 0), height - 1))
            for x, y in pts]


def _request_over_socket(endpoint: str, line: str, timeout_s: float) -> str:
    host, _, port = endpoint.rpartition(":")
    with socket.create_connection((host or "127.0.0.1", int(port)),
                                  timeout=timeout_s) as sock:
        sock.sendall(line.encode("utf-8") + b"\n")
        buf = b""
        while not buf.endswith(b"\n"):
            chunk = sock.recv(65536)
            if not chunk:
                raise ProtocolError("connection closed before response")
            buf += chunk
    return buf.decode("utf-8").strip()


def remote_predict(smap_multi: np.ndarray, cmap_multi: np.ndarray,
                   target_class: int, endpoint: str,
                   prior: CooccurrencePrior, class_names: list[str],
                   n_targets: int = DEFAULT_N_TARGETS,
                   timeout_s: float = 1.0,
                   on_fallback: Callable[[str], None] | None = None) -> PredictedTargets:
    """Ask the remote predictor for target points; fall back to the local
    heuristic on connection or protocol failures (reporting via on_fallback)."""
    h, w = smap_multi.shape
    line = encode_predict_request(smap_multi, cmap_multi, target_class)
    try:
        reply = _request_over_socket(endpoint, line, timeout_s)
        pts = decode_predict_response(reply, w, h)
        return PredictedTargets(points=pts)
    except (OSError, ProtocolError) as e:
        if on_fallback is not None:
            on_fallback(f"remote predictor failed ({e}); using heuristic")
        return predict_targets(smap_multi, cmap_multi, target_class, prior,
                               class_names, n_targets)


# --- remote scene scorer (same transport, "score" message kind) -------------

def encode_score_request(width: int, height: int, target_class: int,
                         pose_xyh: tuple[float, float, float],
                         visible_x: np.ndarray, visible_y: np.ndarray) -> str:
    return json.dumps({
        "v": WIRE_VERSION, "kind": "score", "w": width, "h": height,
        "target_class": int(target_class),
        "pose": [float(pose_xyh[0]), float(pose_xyh[1]), float(pose_xyh[2])],
        "visible": [[int(x), int(y)] for x, y in zip(visible_x, visible_y)],
    }, separators=(",", ":"))


def decode_score_response(line: str) -> float:
    try:
        msg = json.loads(line)
        if msg.get("v") != WIRE_VERSION:
            raise ProtocolError(f"unsupported version {msg.get('v')!r}")
        score = float(msg["score"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed score response: {e}") from e
    if math.isnan(score):
        raise ProtocolError("NaN score")
    return min(max(score, 0.0), 1.0)


def remote_score(width: int, height: int, target_class: int,
                 pose_xyh: tuple[float, float, float],
                 visible_x: np.ndarray, visible_y: np.ndarray,
                 endpoint: str, timeout_s: float = 1.0) -> float:
    """Query a remote scene scorer; raises on transport/protocol failure so
    the caller can fall back to the built-in oracle."""
    line = encode_score_request(width, height, target_class, pose_xyh,
                                visible_x, visible_y)
    reply = _request_over_socket(endpoint, line, timeout_s)
    return decode_score_response(reply)
