"""Episode orchestration: the observe -> map -> value -> predict -> decide ->
plan -> act loop, ablation switches, SR/SPL aggregation and the decision trace.

Episodes are independent; suites can fan out over processes. Everything is
seeded: a fixed (scene, config, seed) reproduces the trace byte for byte.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.ndimage import binary_dilation

from .config import EpisodeConfig
from .grids import LayeredMap
from .planning import Path, Unreachable, astar, local_step, wrap_to_pi
from .policy import (DarWeights, LockMode, SceneCategory, SciReading,
                     compute_sci, select_frontier, try_lock_target,
                     weights_from_sci)
from .prediction import (CooccurrencePrior, distance_map, predict_targets,
                         remote_predict, remote_score)
from .scenes import Scene
from .values import ValueMap, smooth_and_normalize
from .world import (TURN_STEP_RAD, Action, AgentPose, DetectionNoise,
                    ScoreModel, compute_ray_samples, observe, pose_cell,
                    semantic_score, step)

Cell = tuple[int, int]

_SEED_TAG_OBSERVE = 1
_SEED_TAG_SCORE = 2
_SEED_TAG_RANDOM_POLICY = 3

_INFLATE_STRUCTURE = np.ones((3, 3), dtype=bool)


@dataclass
class EpisodeResult:
    scene_name: str
    seed: int
    success: bool
    path_length_m: float
    optimal_length_m: float
    steps: int
    termination: str                 # stop | step_limit | no_frontier
    final_distance_m: float
    mean_sci: float
    mean_w_pred: float
    counters: dict[str, int]
    trace_lines: list[str] | None = None


@dataclass
class SuiteSummary:
    sr: float
    spl: float
    results: list[EpisodeResult]


def _derive_seed(base: int, *key: int) -> int:
    return int(np.random.SeedSequence([base, *key]).generate_state(1)[0])


def _noise_from_config(cfg: EpisodeConfig, scene: Scene) -> DetectionNoise:
    per_class = tuple(
        (scene.class_names.index(name), conf)
        for name, conf in sorted(cfg.det_per_class.items())
        if name in scene.class_names
    )
    return DetectionNoise(
        base_confidence=cfg.det_base_confidence,
        confidence_sigma=cfg.det_confidence_sigma,
        false_negative_rate=cfg.false_negative_rate,
        false_positive_rate=cfg.false_positive_rate,
        false_positive_confidence=cfg.false_positive_confidence,
        per_class_confidence=per_class,
    )


def _jline(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _los_free(obstacle: np.ndarray, x0_m: float, y0_m: float,
              cell: Cell, res: float) -> bool:
    """True when the straight segment from a position to a cell center stays
    on known-free cells (sampled every fifth of a cell)."""
    h, w = obstacle.shape
    x1 = cell[0] * res
    y1 = cell[1] * res
    dist_cells = math.hypot(x1 - x0_m, y1 - y0_m) / res
    n = max(2, int(dist_cells * 5))
    for i in range(1, n + 1):
        f = i / n
        px = (x0_m + (x1 - x0_m) * f) / res
        py = (y0_m + (y1 - y0_m) * f) / res
        cx = int(math.trunc(px + math.copysign(0.5, px)))
        cy = int(math.trunc(py + math.copysign(0.5, py)))
        if not (0 <= cx < w and 0 <= cy < h) or obstacle[cy, cx]:
            return False
    return True


def _los_waypoint(plan: Path, pose: AgentPose, res: float,
                  obstacle: np.ndarray, lookahead_m: float,
                  min_idx: int = 0) -> tuple[Cell, int]:
    """Farthest path cell within `lookahead_m` that the agent can reach on a
    straight known-free segment; falls back to the next path cell.

    `min_idx` pins pursuit progress: the nearest-cell search never moves
    backward along the same plan, which would otherwise produce two-pose
    limit cycles around path hairpins.
    """
    cells = plan.cells
    px, py = pose.x_m / res, pose.y_m / res
    best_i = min_idx
    best_d = math.inf
    for i in range(min_idx, len(cells)):
        x, y = cells[i]
        d = (x - px) ** 2 + (y - py) ** 2
        if d < best_d - 1e-12:
            best_d, best_i = d, i
    if best_i == len(cells) - 1:
        return cells[-1], best_i
    chosen = cells[best_i + 1]
    acc = 0.0
    prev = cells[best_i]
    for i in range(best_i + 1, len(cells)):
        cur = cells[i]
        acc += math.hypot(cur[0] - prev[0], cur[1] - prev[1]) * res
        prev = cur
        if _los_free(obstacle, pose.x_m, pose.y_m, cur, res):
            chosen = cur
        else:
            break
        if acc >= lookahead_m - 1e-12:
            break
    return chosen, best_i


def _final_distance_m(scene: Scene, pose: AgentPose) -> float:
    best = math.inf
    for cid, (x, y) in scene.objects:
        if cid != scene.target_class:
            continue
        d = math.hypot(x * scene.resolution - pose.x_m,
                       y * scene.resolution - pose.y_m)
        best = min(best, d)
    return best


def run_episode(scene: Scene, config: EpisodeConfig,
                collect_trace: bool = False,
                on_step: Callable[[int, LayeredMap, ValueMap, AgentPose], None] | None = None,
                ) -> EpisodeResult:
    """Run one episode under the configured ablations.

    Disabled modules are never consulted: their maps stay empty, their
    counters stay at zero, and the DAR weights are pinned accordingly
    (vm off -> (1,0), tpm off -> (0,1)).
    """
    config.validate()
    res = scene.resolution
    noise = _noise_from_config(config, scene)
    score_model = ScoreModel(s_max=config.score_s_max,
                             decay_lambda_m=config.score_lambda_m,
                             noise_sigma=config.score_noise)
    prior = (CooccurrencePrior.load(config.prior_file)
             if config.prior_file else CooccurrencePrior.bundled())

    maps = LayeredMap.create(scene.width, scene.height, res, scene.num_classes)
    vmap = ValueMap.create(scene.width, scene.height, res,
                           d_max_m=config.value_d_max_m, fov_deg=config.fov_deg)
    pose = AgentPose(scene.start_xy_m[0], scene.start_xy_m[1], scene.start_heading)
    zeros = np.zeros((scene.height, scene.width), dtype=np.float64)

    lock_mode = (LockMode.FUSED if (config.stl and config.mol)
                 else LockMode.SINGLE_ONLY if config.stl else LockMode.MULTI_ONLY)
    pinned: DarWeights | None = None
    if not config.vm:
        pinned = DarWeights(1.0, 0.0)
    elif not config.tpm:
        pinned = DarWeights(0.0, 1.0)

    rng_policy = np.random.default_rng(
        _derive_seed(config.seed, _SEED_TAG_RANDOM_POLICY))

    counters: dict[str, int] = {
        "stl_updates": 0, "mol_updates": 0, "vm_fills": 0, "vm_queries": 0,
        "predictor_calls": 0, "predictor_fallbacks": 0, "scorer_fallbacks": 0,
        "sci_computations": 0, "lock_checks": 0, "replans": 0, "collisions": 0,
    }
    trace: list[str] | None = [] if collect_trace else None
    if trace is not None:
        trace.append(_jline({
            "type": "header", "scene": scene.name, "seed": config.seed,
            "ablation": config.ablation_string(),
            "frontier_policy": config.frontier_policy,
            "predictor": config.predictor, "scorer": config.scorer,
        }))

    goal: Cell | None = None
    goal_kind: str | None = None
    goal_dar: float | None = None
    plan: Path | None = None
    plan_cells: set[Cell] = set()
    plan_target: Cell | None = None
    pursuit_idx = 0
    excluded: set[Cell] = set()  # frontier goals proven unreachable
    escaping = False             # collision recovery: rotate until clear, then move
    dmap_grid = zeros
    vsmooth = zeros
    collision_streak = 0
    path_length_m = 0.0
    sci_sum = 0.0
    wpred_sum = 0.0
    steps_done = 0
    termination = "step_limit"

    def fallback_note(msg: str) -> None:
        counters["predictor_fallbacks"] += 1
        if trace is not None:
            trace.append(_jline({"type": "warning", "message": msg}))

    for t in range(config.max_steps):
        samples = compute_ray_samples(pose.x_m, pose.y_m, pose.heading,
                                      scene.walls.shape, res, config.fov_deg,
                                      config.max_range_m,
                                      config.angular_step_deg,
                                      config.radial_step_cells)
        obs = observe(scene, pose, _derive_seed(config.seed, t, _SEED_TAG_OBSERVE),
                      noise=noise, fov_deg=config.fov_deg,
                      max_range_m=config.max_range_m,
                      angular_step_deg=config.angular_step_deg,
                      radial_step_cells=config.radial_step_cells,
                      samples=samples)
        newly_blocked: list[Cell] = []
        if obs.wall_x.size:
            prev = maps.obstacle[obs.wall_y, obs.wall_x]
            maps.mark_obstacles_arrays(obs.wall_x, obs.wall_y)
            if not prev.all():
                newly_blocked = list(zip(obs.wall_x[~prev].tolist(),
                                         obs.wall_y[~prev].tolist()))
        maps.mark_explored_arrays(obs.visible_x, obs.visible_y)

        if config.stl or config.mol:
            maps.apply_detections(obs.detections, scene.target_class,
                                  update_target=config.stl,
                                  update_multi=config.mol)
            if config.stl:
                counters["stl_updates"] += sum(
                    1 for d in obs.detections if d.class_id == scene.target_class)
            if config.mol:
                counters["mol_updates"] += len(obs.detections)

        if config.vm:
            # noise is keyed by the view (cell + heading quantum), not the
            # step: a scene scorer is consistently wrong about the same view,
            # and per-step noise would ratchet cell values upward through the
            # max-leaning contraharmonic update
            view = pose_cell(pose, res)
            heading_q = int(round(pose.heading / TURN_STEP_RAD)) % 12
            score_seed = _derive_seed(config.seed, view[0], view[1], heading_q,
                                      _SEED_TAG_SCORE)
            if config.scorer == "remote":
                try:
                    s = remote_score(scene.width, scene.height, scene.target_class,
                                     (pose.x_m, pose.y_m, pose.heading),
                                     obs.visible_x, obs.visible_y,
                                     config.scorer_endpoint, config.scorer_timeout_s)
                except Exception:
                    counters["scorer_fallbacks"] += 1
                    s = semantic_score(scene, pose, scene.target_class,
                                       score_seed, model=score_model, visible=obs)
            else:
                s = semantic_score(scene, pose, scene.target_class,
                                   score_seed, model=score_model, visible=obs)
            vmap.sector_fill(pose, s, maps.obstacle,
                             angular_step_deg=config.angular_step_deg,
                             radial_step_cells=config.radial_step_cells,
                             weighting=config.weighted_score, samples=samples)
            counters["vm_fills"] += 1

        frontier = maps.extract_frontiers()
        agent_cell = pose_cell(pose, res)

        if config.mol:
            sci = compute_sci(maps.smap_multi, maps.cmap_multi,
                              (obs.visible_x, obs.visible_y),
                              config.sci_conf_threshold)
            counters["sci_computations"] += 1
        else:
            sci = SciReading(0.0, SceneCategory.SPARSE)
        weights = pinned if pinned is not None else weights_from_sci(sci)
        sci_sum += sci.value
        wpred_sum += weights.w_pred

        counters["lock_checks"] += 1
        lock = try_lock_target(maps.smap_target, maps.cmap_target,
                               maps.smap_multi, maps.cmap_multi,
                               maps.explored, maps.obstacle, scene.target_class,
                               threshold=config.lock_conf_threshold,
                               k=config.lock_neighborhood, mode=lock_mode)

        if lock is not None:
            if goal_kind != "navigate" or goal != lock:
                goal, goal_kind, goal_dar = lock, "navigate", None
                plan = None
        else:
            if goal_kind == "navigate":
                goal, goal_kind = None, None
                plan = None
            if goal is not None and (agent_cell == goal
                                     or not frontier[goal[1], goal[0]]):
                goal = None
                plan = None
            if goal is None:
                if config.tpm:
                    if config.predictor == "remote":
                        preds = remote_predict(
                            maps.smap_multi, maps.cmap_multi, scene.target_class,
                            config.predictor_endpoint, prior, scene.class_names,
                            config.n_targets, config.predictor_timeout_s,
                            on_fallback=fallback_note)
                    else:
                        preds = predict_targets(maps.smap_multi, maps.cmap_multi,
                                                scene.target_class, prior,
                                                scene.class_names, config.n_targets)
                    counters["predictor_calls"] += 1
                    dmap_grid = distance_map(
                        preds, (scene.width, scene.height)).grid
                if config.vm:
                    vsmooth = smooth_and_normalize(vmap, config.gaussian_sigma)
                    counters["vm_queries"] += 1
                candidates = frontier
                if excluded:
                    candidates = frontier.copy()
                    for (ex, ey) in excluded:
                        candidates[ey, ex] = False
                if config.frontier_policy == "random":
                    ys, xs = np.nonzero(candidates)
                    if xs.size == 0:
                        termination = "no_frontier"
                        break
                    i = int(rng_policy.integers(0, xs.size))
                    goal, goal_dar = (int(xs[i]), int(ys[i])), None
                else:
                    pick = select_frontier(candidates, dmap_grid, vsmooth,
                                           weights, agent_cell, config.dar_epsilon)
                    if pick is None:
                        termination = "no_frontier"
                        break
                    goal, goal_dar = pick
                goal_kind = "explore"
                plan = None

        # plan and follow; planning inflates obstacles by one cell so the
        # follower's lateral drift (30-degree heading quanta) keeps clearance
        off_path = plan is not None and agent_cell not in plan_cells and not any(
            (agent_cell[0] + dx, agent_cell[1] + dy) in plan_cells
            for dx in (-1, 0, 1) for dy in (-1, 0, 1))
        need_replan = (plan is None or off_path
                       or any(c in plan_cells for c in newly_blocked))
        if need_replan:
            plan_obstacles = binary_dilation(maps.obstacle, _INFLATE_STRUCTURE)
            # the agent may legitimately stand inside the margin: open its
            # raw-free neighborhood so it can step back out
            ax, ay = agent_cell
            y0, y1 = max(0, ay - 1), min(scene.height, ay + 2)
            x0, x1 = max(0, ax - 1), min(scene.width, ax + 2)
            plan_obstacles[y0:y1, x0:x1] &= maps.obstacle[y0:y1, x0:x1]
            result = astar(plan_obstacles, agent_cell, goal, res)
            if isinstance(result, Unreachable):
                sub = result.substitute
                near_enough = (sub is not None
                               and max(abs(sub[0] - goal[0]),
                                       abs(sub[1] - goal[1])) <= 2)
                if not near_enough:
                    # genuinely blocked by the margin (tight pocket): retry raw
                    raw = astar(maps.obstacle, agent_cell, goal, res)
                    if isinstance(raw, Path):
                        result = raw
            if isinstance(result, Unreachable):
                plan = result.path
                plan_target = result.substitute
            else:
                plan = result
                plan_target = goal
            plan_cells = set(plan.cells) if plan is not None else set()
            pursuit_idx = 0
            counters["replans"] += 1

        if plan is None or plan_target is None:
            # nowhere to go at all; treat as exploration dead end
            termination = "no_frontier"
            break

        waypoint, pursuit_idx = _los_waypoint(plan, pose, res, maps.obstacle,
                                              config.waypoint_lookahead_m,
                                              pursuit_idx)
        final_goal = goal if goal_kind == "navigate" else None
        near_final = (goal_kind == "navigate" and math.hypot(
            plan_target[0] * res - pose.x_m,
            plan_target[1] * res - pose.y_m) <= 1.5 * res)
        if goal_kind == "navigate" and (near_final or agent_cell == plan_target):
            # arrived at (or orbiting within 1.5 cells of) the navigation
            # target or the closest reachable cell to it: stop there; exact
            # cell equality alone is too brittle for 0.25 m moves on
            # 30-degree headings
            action = Action.STOP
        elif (goal_kind == "explore" and plan_target != goal
                and agent_cell == plan_target):
            # as close as planning gets to this frontier; if standing here did
            # not dissolve it, it never will, so drop it for good
            excluded.add(goal)
            goal, goal_kind, plan = None, None, None
            action = Action.TURN_LEFT
        elif escaping or collision_streak >= 2:
            # repeated blocked moves: of the headings whose forward cell is
            # free on the known map, steer toward the one closest to the
            # waypoint bearing, then step out and resume normal tracking
            escaping = True
            bearing = math.atan2(-(waypoint[1] * res - pose.y_m),
                                 waypoint[0] * res - pose.x_m)
            best_h = None
            best_err = math.inf
            for k in range(12):
                hdg = k * TURN_STEP_RAD
                fx = pose.x_m + 0.25 * math.cos(hdg)
                fy = pose.y_m - 0.25 * math.sin(hdg)
                fc = (int(math.trunc(fx / res + math.copysign(0.5, fx))),
                      int(math.trunc(fy / res + math.copysign(0.5, fy))))
                if not (0 <= fc[0] < scene.width and 0 <= fc[1] < scene.height):
                    continue
                if maps.obstacle[fc[1], fc[0]]:
                    continue
                err = abs(wrap_to_pi(bearing - hdg))
                if err < best_err - 1e-12:
                    best_err, best_h = err, hdg
            if best_h is None:
                action = Action.TURN_LEFT
            else:
                delta = wrap_to_pi(best_h - pose.heading)
                if abs(delta) < 1e-9:
                    action = Action.MOVE_FORWARD
                    escaping = False
                    collision_streak = 0
                else:
                    action = Action.TURN_LEFT if delta > 0 else Action.TURN_RIGHT
        else:
            action = local_step(pose, waypoint, res, final_goal=final_goal)

        if trace is not None:
            trace.append(_jline({
                "type": "step", "step": t, "sci": round(sci.value, 9),
                "category": sci.category.value,
                "w_pred": round(weights.w_pred, 9),
                "w_vlm": round(weights.w_vlm, 9),
                "goal": list(goal) if goal is not None else None,
                "goal_kind": goal_kind,
                "dar": round(goal_dar, 9) if goal_dar is not None else None,
                "locked": lock is not None, "action": action.value,
                "x": round(pose.x_m, 9), "y": round(pose.y_m, 9),
                "heading": round(pose.heading, 9),
            }))
        if on_step is not None:
            on_step(t, maps, vmap, pose)

        new_pose = step(scene, pose, action)
        if action is Action.MOVE_FORWARD:
            moved = math.hypot(new_pose.x_m - pose.x_m, new_pose.y_m - pose.y_m)
            path_length_m += moved
            if moved == 0.0:
                collision_streak += 1
                counters["collisions"] += 1
            else:
                collision_streak = 0
        pose = new_pose
        steps_done = t + 1
        if action is Action.STOP:
            termination = "stop"
            break

    final_dist = _final_distance_m(scene, pose)
    success = (termination in ("stop", "no_frontier")
               and final_dist <= config.success_radius_m)
    mean_sci = sci_sum / steps_done if steps_done else 0.0
    mean_wpred = wpred_sum / steps_done if steps_done else 0.0
    result = EpisodeResult(
        scene_name=scene.name, seed=config.seed, success=success,
        path_length_m=path_length_m, optimal_length_m=scene.optimal_path_length,
        steps=steps_done, termination=termination, final_distance_m=final_dist,
        mean_sci=mean_sci, mean_w_pred=mean_wpred, counters=counters,
        trace_lines=trace,
    )
    if trace is not None:
        trace.append(_jline({
            "type": "result", "success": success,
            "path_length_m": round(path_length_m, 9),
            "optimal_length_m": round(scene.optimal_path_length, 9),
            "steps": steps_done, "termination": termination,
            "final_distance_m": round(final_dist, 9),
            "mean_sci": round(mean_sci, 9), "mean_w_pred": round(mean_wpred, 9),
            "counters": counters,
        }))
    return result


def sr(results: list[EpisodeResult]) -> float:
    if not results:
        return 0.0
    return 100.0 * sum(r.success for r in results) / len(results)


def spl(results: list[EpisodeResult]) -> float:
    """Success weighted by path length: (100/N) * sum(S_i * l_i / max(p_i, l_i))."""
    if not results:
        return 0.0
    total = 0.0
    for r in results:
        if r.optimal_length_m <= 0:
            raise ValueError(f"optimal length must be positive: {r.scene_name}")
        if r.success:
            total += r.optimal_length_m / max(r.path_length_m, r.optimal_length_m)
    return 100.0 * total / len(results)


def _run_one(args: tuple[Scene, EpisodeConfig]) -> EpisodeResult:
    scene, cfg = args
    return run_episode(scene, cfg)


def run_suite(scenes: list[Scene], config: EpisodeConfig, repeats: int = 1,
              workers: int = 1) -> SuiteSummary:
    """Run every scene `repeats` times with per-episode derived seeds.

    Episode seeds depend only on (config.seed, scene index, repeat), so
    summaries are identical regardless of `workers`.
    """
    if not scenes:
        raise ValueError("empty scene list")
    jobs: list[tuple[Scene, EpisodeConfig]] = []
    for rep in range(repeats):
        for idx, scene in enumerate(scenes):
            cfg = replace(config,
                          det_per_class=dict(config.det_per_class),
                          seed=_derive_seed(config.seed, idx, rep))
            jobs.append((scene, cfg))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=4))
    else:
        results = [_run_one(j) for j in jobs]
    return SuiteSummary(sr=sr(results), spl=spl(results), results=results)
