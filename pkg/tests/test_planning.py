import heapq
import math

import numpy as np
import pytest

from semnav.planning import (SQRT2, Path, Unreachable, astar, dijkstra_field,
                             extract_waypoint, local_step, octile, wrap_to_pi)
from semnav.world import Action, AgentPose


def dijkstra_oracle(obstacle, start):
    """Plain-dict Dijkstra over the same movement rules, written separately
    from the planner for cross-checking."""
    h, w = obstacle.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    moves = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if d > dist.get((x, y), math.inf) + 1e-12:
            continue
        for dx, dy, c in moves:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h) or obstacle[ny, nx]:
                continue
            if dx and dy and (obstacle[y, nx] or obstacle[ny, x]):
                continue
            nd = d + c
            if nd < dist.get((nx, ny), math.inf) - 1e-12:
                dist[(nx, ny)] = nd
                heapq.heappush(heap, (nd, (nx, ny)))
    return dist


def random_grid(rng, size=20, wall_density=0.25):
    grid = rng.random((size, size)) < wall_density
    grid[0, 0] = False
    grid[size - 1, size - 1] = False
    return grid


class TestAstar:
    def test_start_equals_goal(self):
        grid = np.zeros((5, 5), dtype=bool)
        out = astar(grid, (2, 2), (2, 2), resolution=0.25)
        assert isinstance(out, Path)
        assert out.cells == [(2, 2)]
        assert out.length_m == 0.0

    def test_empty_grid_diagonal(self):
        grid = np.zeros((10, 10), dtype=bool)
        out = astar(grid, (0, 0), (9, 9), resolution=1.0)
        assert isinstance(out, Path)
        assert out.length_m == pytest.approx(9 * SQRT2)
        assert len(out.cells) == 10

    def test_start_occupied_is_callers_bug(self):
        grid = np.zeros((4, 4), dtype=bool)
        grid[0, 0] = True
        with pytest.raises(ValueError):
            astar(grid, (0, 0), (3, 3))

    def test_out_of_bounds_rejected(self):
        grid = np.zeros((4, 4), dtype=bool)
        with pytest.raises(ValueError):
            astar(grid, (0, 0), (4, 0))
        with pytest.raises(ValueError):
            astar(grid, (-1, 0), (3, 3))

    def test_no_corner_cutting(self):
        # a diagonal gap that a corner-cutting planner would squeeze through
        grid = np.zeros((3, 3), dtype=bool)
        grid[0, 1] = True
        grid[1, 0] = True
        out = astar(grid, (0, 0), (2, 2), resolution=1.0)
        assert isinstance(out, Unreachable)

    def test_paths_avoid_obstacles_and_stay_adjacent(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            grid = random_grid(rng)
            out = astar(grid, (0, 0), (19, 19), resolution=1.0)
            cells = out.cells if isinstance(out, Path) else (
                out.path.cells if out.path else [])
            for (x, y) in cells:
                assert not grid[y, x]
            for (a, b) in zip(cells, cells[1:]):
                assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1

    def test_cost_matches_dijkstra_oracle(self):
        rng = np.random.default_rng(23)
        solved = 0
        for _ in range(80):
            grid = random_grid(rng)
            dist = dijkstra_oracle(grid, (0, 0))
            out = astar(grid, (0, 0), (19, 19), resolution=1.0)
            if (19, 19) in dist:
                assert isinstance(out, Path)
                assert out.length_m == pytest.approx(dist[(19, 19)], abs=1e-9)
                solved += 1
            else:
                assert isinstance(out, Unreachable)
        assert solved > 20

    def test_octile_heuristic_admissible(self):
        rng = np.random.default_rng(29)
        grid = random_grid(rng, size=15, wall_density=0.2)
        dist = dijkstra_oracle(grid, (0, 0))
        for cell, d in dist.items():
            assert octile((0, 0), cell) <= d + 1e-9

    def test_unreachable_suggests_nearest_reachable_cell(self):
        grid = np.zeros((7, 7), dtype=bool)
        grid[:, 3] = True  # full wall splits the grid
        out = astar(grid, (0, 0), (6, 0), resolution=1.0)
        assert isinstance(out, Unreachable)
        assert out.substitute == (2, 0)  # closest column on the start side
        assert out.path.cells[0] == (0, 0)
        assert out.path.cells[-1] == (2, 0)

    def test_occupied_goal_treated_as_unreachable(self):
        grid = np.zeros((5, 5), dtype=bool)
        grid[2, 2] = True
        out = astar(grid, (0, 0), (2, 2), resolution=1.0)
        assert isinstance(out, Unreachable)
        assert out.substitute in [(1, 1), (2, 1), (1, 2)]


class TestDijkstraField:
    def test_corridor_distances(self):
        grid = np.zeros((1, 5), dtype=bool)
        field = dijkstra_field(~grid, [(0, 0)])
        assert field[0, 4] == pytest.approx(4.0)

    def test_unreachable_is_inf(self):
        passable = np.ones((3, 5), dtype=bool)
        passable[:, 2] = False
        field = dijkstra_field(passable, [(0, 0)])
        assert math.isinf(field[0, 4])

    def test_multi_source_takes_minimum(self):
        passable = np.ones((1, 9), dtype=bool)
        field = dijkstra_field(passable, [(0, 0), (8, 0)])
        assert field[0, 4] == pytest.approx(4.0)
        assert field[0, 7] == pytest.approx(1.0)


def straight_path(n, resolution=0.25):
    return Path(cells=[(i, 0) for i in range(n)],
                length_m=(n - 1) * resolution)


class TestExtractWaypoint:
    def test_short_path_yields_goal(self):
        path = straight_path(3)  # 0.5 m long
        pose = AgentPose(0.0, 0.0, 0.0)
        assert extract_waypoint(path, pose, 0.25) == (2, 0)

    def test_one_meter_ahead_is_fourth_cell(self):
        path = straight_path(9)
        pose = AgentPose(0.0, 0.0, 0.0)
        assert extract_waypoint(path, pose, 0.25) == (4, 0)

    def test_agent_at_goal(self):
        path = straight_path(5)
        pose = AgentPose(1.0, 0.0, 0.0)  # standing on the last cell
        assert extract_waypoint(path, pose, 0.25) == (4, 0)

    def test_measured_from_nearest_path_cell(self):
        path = straight_path(12)
        pose = AgentPose(0.75, 0.05, 0.0)  # nearest path cell is (3,0)
        assert extract_waypoint(path, pose, 0.25) == (7, 0)

    def test_empty_path_rejected(self):
        with pytest.raises(ValueError):
            extract_waypoint(Path(cells=[], length_m=0.0),
                             AgentPose(0, 0, 0), 0.25)


class TestLocalStep:
    def test_waypoint_dead_ahead_moves(self):
        pose = AgentPose(0.0, 0.0, 0.0)
        assert local_step(pose, (4, 0), 0.25) is Action.MOVE_FORWARD

    def test_waypoint_at_plus_ninety_turns_left(self):
        pose = AgentPose(0.0, 0.25, 0.0)
        # waypoint straight "up" (decreasing y): bearing +90 degrees
        assert local_step(pose, (0, 0), 0.25) is Action.TURN_LEFT

    def test_waypoint_at_minus_ninety_turns_right(self):
        pose = AgentPose(0.0, 0.0, 0.0)
        assert local_step(pose, (0, 4), 0.25) is Action.TURN_RIGHT

    def test_boundary_fifteen_degrees_moves(self):
        # bearing exactly +15 and -15 degrees from heading 0
        d = 2.0
        for sign in (1.0, -1.0):
            wy = -sign * d * math.tan(math.radians(15.0)) * 0.25
            pose = AgentPose(0.0, wy, 0.0)
            wp = (int(d), 0)
            assert local_step(pose, wp, 0.25) is Action.MOVE_FORWARD

    def test_just_past_boundary_turns(self):
        pose = AgentPose(0.0, 0.0, math.radians(17.0))
        assert local_step(pose, (8, 0), 0.25) is Action.TURN_RIGHT

    def test_stop_only_at_final_goal(self):
        pose = AgentPose(1.0, 0.0, 0.0)  # on cell (4,0)
        assert local_step(pose, (4, 0), 0.25, final_goal=(4, 0)) is Action.STOP
        assert local_step(pose, (4, 0), 0.25, final_goal=(9, 9)) is Action.TURN_LEFT
        assert local_step(pose, (4, 0), 0.25) is Action.TURN_LEFT

    def test_progress_toward_straight_waypoint(self):
        from semnav.scenes import parse_scene
        from semnav.world import step
        text = "\n".join(["12 3 0.25", "#" * 12, "#" + "." * 10 + "#",
                          "#" * 12, "class u toilet", "target toilet"])
        # build a wall-free corridor scene by hand
        text = text.replace("#" + "." * 10 + "#", "#A.......u.#")
        scene = parse_scene(text)
        pose = AgentPose(0.25, 0.25, 0.0)
        wp = (9, 1)
        dist = math.hypot(wp[0] * 0.25 - pose.x_m, wp[1] * 0.25 - pose.y_m)
        for _ in range(20):
            act = local_step(pose, wp, 0.25)
            if act is not Action.MOVE_FORWARD:
                break
            pose = step(scene, pose, act)
            nd = math.hypot(wp[0] * 0.25 - pose.x_m, wp[1] * 0.25 - pose.y_m)
            assert nd <= dist + 1e-9
            dist = nd
        assert dist < 0.13  # arrived at the waypoint cell


class TestWrap:
    def test_wrap_to_pi(self):
        # range convention is [-pi, pi)
        assert wrap_to_pi(0.0) == 0.0
        assert wrap_to_pi(3 * math.pi) == pytest.approx(-math.pi)
        assert wrap_to_pi(-3 * math.pi) == pytest.approx(-math.pi)
        assert wrap_to_pi(math.radians(350)) == pytest.approx(math.radians(-10))
        assert wrap_to_pi(math.radians(170)) == pytest.approx(math.radians(170))
