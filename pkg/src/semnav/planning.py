"""Grid path planning: 8-connected A*, Dijkstra distance fields, waypoint follower.

Paths never cut corners: a diagonal move requires both orthogonal neighbors
to be free. Step costs are 1 / sqrt(2) cells, scaled by resolution for meters.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

Cell = tuple[int, int]

SQRT2 = math.sqrt(2.0)

# (dx, dy, step cost in cells)
_NEIGHBORS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
)


@dataclass
class Path:
    cells: list[Cell]
    length_m: float


@dataclass
class Unreachable:
    """Goal occupied or disconnected; `substitute` is the nearest reachable free cell."""

    substitute: Cell | None
    path: Path | None


def octile(a: Cell, b: Cell) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def _diagonal_ok(obstacle: np.ndarray, x: int, y: int, dx: int, dy: int) -> bool:
    return not (obstacle[y, x + dx] or obstacle[y + dy, x])


def _reconstruct_flat(came: dict[int, int], end: int, cost_cells: float,
                      width: int, resolution: float) -> Path:
    flat = [end]
    cur = came[end]
    while cur >= 0:
        flat.append(cur)
        cur = came[cur]
    flat.reverse()
    cells = [(idx % width, idx // width) for idx in flat]
    return Path(cells=cells, length_m=cost_cells * resolution)


def astar(obstacle: np.ndarray, start: Cell, goal: Cell,
          resolution: float = 0.25) -> Path | Unreachable:
    """Minimal-cost 8-connected path under unit/sqrt(2) costs, octile heuristic.

    If the goal is occupied or disconnected, the whole reachable component is
    swept and the reachable free cell nearest to the goal comes back as a
    substitute (with its path). Internally runs on flat indices with a bytes
    obstacle lookup; profiling showed tuple hashing dominating otherwise.
    """
    h, w = obstacle.shape
    sx, sy = start
    gx, gy = goal
    if not (0 <= sx < w and 0 <= sy < h):
        raise ValueError(f"start out of bounds: {start}")
    if not (0 <= gx < w and 0 <= gy < h):
        raise ValueError(f"goal out of bounds: {goal}")
    if obstacle[sy, sx]:
        raise ValueError(f"start cell is occupied: {start}")

    blocked = np.ascontiguousarray(obstacle, dtype=np.uint8).tobytes()
    start_i = sy * w + sx
    goal_i = gy * w + gx
    goal_blocked = blocked[goal_i] != 0
    diag = SQRT2 - 1.0

    def heuristic(idx: int) -> float:
        y, x = divmod(idx, w)
        dx = x - gx if x > gx else gx - x
        dy = y - gy if y > gy else gy - y
        return (dx + diag * dy) if dx > dy else (dy + diag * dx)

    g_cost: dict[int, float] = {start_i: 0.0}
    came: dict[int, int] = {start_i: -1}
    counter = 0
    heap: list[tuple[float, int, int]] = [(heuristic(start_i), 0, start_i)]
    closed: set[int] = set()

    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        if cur == goal_i and not goal_blocked:
            return _reconstruct_flat(came, goal_i, g_cost[goal_i], w, resolution)
        cy, cx = divmod(cur, w)
        base = g_cost[cur]
        for dx, dy, step in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if nx < 0 or nx >= w or ny < 0 or ny >= h:
                continue
            nb = ny * w + nx
            if blocked[nb]:
                continue
            if dx != 0 and dy != 0 and (blocked[cur + dx] or blocked[cur + dy * w]):
                continue
            ng = base + step
            if ng < g_cost.get(nb, math.inf) - 1e-12:
                g_cost[nb] = ng
                came[nb] = cur
                counter += 1
                heapq.heappush(heap, (ng + heuristic(nb), counter, nb))

    # exhausted the reachable component: pick the closest reachable cell to goal
    best = -1
    best_key: tuple[float, int, int] | None = None
    for idx in g_cost:
        y, x = divmod(idx, w)
        key = ((x - gx) ** 2 + (y - gy) ** 2, y, x)
        if best_key is None or key < best_key:
            best_key = key
            best = idx
    if best < 0:
        return Unreachable(substitute=None, path=None)
    path = _reconstruct_flat(came, best, g_cost[best], w, resolution)
    return Unreachable(substitute=path.cells[-1], path=path)


def dijkstra_field(passable: np.ndarray, sources: list[Cell]) -> np.ndarray:
    """Multi-source shortest-path field in cell units over passable cells.

    Octile metric, no corner cutting. Unreachable / impassable cells hold inf.
    """
    h, w = passable.shape
    dist = np.full((h, w), math.inf, dtype=np.float64)
    obstacle = ~passable
    heap: list[tuple[float, int, int]] = []
    for (x, y) in sources:
        if 0 <= x < w and 0 <= y < h and passable[y, x]:
            dist[y, x] = 0.0
            heap.append((0.0, y, x))
    heapq.heapify(heap)
    while heap:
        d, cy, cx = heapq.heappop(heap)
        if d > dist[cy, cx] + 1e-12:
            continue
        for dx, dy, step in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            if obstacle[ny, nx]:
                continue
            if dx != 0 and dy != 0 and not _diagonal_ok(obstacle, cx, cy, dx, dy):
                continue
            nd = d + step
            if nd < dist[ny, nx] - 1e-12:
                dist[ny, nx] = nd
                heapq.heappush(heap, (nd, ny, nx))
    return dist


def extract_waypoint(path: Path, pose, resolution: float,
                     lookahead_m: float = 1.0) -> Cell:
    """First path cell at least `lookahead_m` of arc length ahead of the agent.

    Arc length accumulates from the path cell nearest the agent; short paths
    yield the goal.
    """
    if not path.cells:
        raise ValueError("empty path")
    px = pose.x_m / resolution
    py = pose.y_m / resolution
    best_i = 0
    best_d = math.inf
    for i, (x, y) in enumerate(path.cells):
        d = (x - px) ** 2 + (y - py) ** 2
        if d < best_d - 1e-12:
            best_d = d
            best_i = i
    acc = 0.0
    prev = path.cells[best_i]
    for i in range(best_i + 1, len(path.cells)):
        cur = path.cells[i]
        acc += math.hypot(cur[0] - prev[0], cur[1] - prev[1]) * resolution
        prev = cur
        if acc >= lookahead_m - 1e-12:
            return cur
    return path.cells[-1]


def wrap_to_pi(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def local_step(pose, waypoint: Cell, resolution: float,
               final_goal: Cell | None = None, align_deg: float = 15.0):
    """One control decision toward a waypoint cell.

    Moves when the heading is within +/-align_deg of the bearing (closed
    boundary), otherwise turns toward the smaller signed error. STOP fires
    only when standing on the waypoint and it is the final navigation goal.
    A waypoint equal to the agent's own cell means "scan": turn left.
    """
    from .world import Action, pose_cell  # local import avoids a module cycle

    agent_cell = pose_cell(pose, resolution)
    if agent_cell == waypoint:
        if final_goal is not None and waypoint == final_goal:
            return Action.STOP
        return Action.TURN_LEFT
    bearing = math.atan2(-(waypoint[1] * resolution - pose.y_m),
                         waypoint[0] * resolution - pose.x_m)
    err = wrap_to_pi(bearing - pose.heading)
    if abs(err) <= math.radians(align_deg) + 1e-12:
        return Action.MOVE_FORWARD
    return Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT
