"""Command line interface.

    semnav run --scene FILE|--suite DIR [--config FILE] [--seed N]
               [--ablation stl,mol,tpm,vm] [--repeats N] [--workers N]
               [--render DIR] [--trace FILE] [--summary FILE]
    semnav make-scenes --out DIR [--sparse N] [--dense N] [--seed N]
    semnav snapshots --suite DIR|--scene FILE --out DIR [--config FILE]
               [--seed N] [--repeats N] [--fractions 0.2,0.4,...]

`run` prints one line per episode plus the SR/SPL summary and exits 0 when
the suite completes.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path as FsPath

import numpy as np

from .config import EpisodeConfig, load_config
from .episodes import run_episode, run_suite, _derive_seed
from .prediction import distance_map, predict_targets, CooccurrencePrior
from .render import save_panels
from .scenegen import make_suite
from .scenes import Scene, load_scene
from .snapshots import save_snapshot
from .values import smooth_and_normalize
from .world import pose_cell


def _load_scenes(args) -> list[Scene]:
    if args.scene:
        return [load_scene(args.scene)]
    paths = sorted(FsPath(args.suite).glob("*.scene"))
    if not paths:
        sys.exit(f"no .scene files in {args.suite}")
    return [load_scene(p) for p in paths]


def _build_config(args) -> EpisodeConfig:
    cfg = load_config(args.config) if args.config else EpisodeConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.ablation is not None:
        enabled = {tok.strip() for tok in args.ablation.split(",") if tok.strip()}
        unknown = enabled - {"stl", "mol", "tpm", "vm"}
        if unknown:
            sys.exit(f"unknown ablation flags: {sorted(unknown)}")
        for flag in ("stl", "mol", "tpm", "vm"):
            setattr(cfg, flag, flag in enabled)
    cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    scenes = _load_scenes(args)
    cfg = _build_config(args)
    render_dir = FsPath(args.render) if args.render else None
    if render_dir:
        render_dir.mkdir(parents=True, exist_ok=True)

    if args.trace or render_dir:
        # tracing/rendering runs sequentially for a deterministic artifact
        trace_lines: list[str] = []
        results = []
        for rep in range(args.repeats):
            for idx, scene in enumerate(scenes):
                ep_cfg = dataclasses.replace(
                    cfg, det_per_class=dict(cfg.det_per_class),
                    seed=_derive_seed(cfg.seed, idx, rep))
                on_step = _make_renderer(render_dir, scene, ep_cfg) if render_dir else None
                result = run_episode(scene, ep_cfg, collect_trace=bool(args.trace),
                                     on_step=on_step)
                if result.trace_lines:
                    trace_lines.extend(result.trace_lines)
                results.append(result)
        if args.trace:
            FsPath(args.trace).write_text("\n".join(trace_lines) + "\n",
                                          encoding="utf-8")
        from .episodes import SuiteSummary, spl, sr
        summary = SuiteSummary(sr=sr(results), spl=spl(results), results=results)
    else:
        summary = run_suite(scenes, cfg, repeats=args.repeats, workers=args.workers)

    for r in summary.results:
        print(f"{r.scene_name:12s} seed={r.seed:<12d} "
              f"{'SUCCESS' if r.success else 'failure'} steps={r.steps:<4d} "
              f"p={r.path_length_m:6.2f}m l={r.optimal_length_m:6.2f}m "
              f"[{r.termination}]")
    print(f"SR  {summary.sr:.1f}")
    print(f"SPL {summary.spl:.1f}")
    if args.summary:
        payload = {
            "sr": summary.sr, "spl": summary.spl,
            "episodes": [{
                "scene": r.scene_name, "seed": r.seed, "success": r.success,
                "path_length_m": r.path_length_m,
                "optimal_length_m": r.optimal_length_m, "steps": r.steps,
                "termination": r.termination, "mean_sci": r.mean_sci,
                "mean_w_pred": r.mean_w_pred, "counters": r.counters,
            } for r in summary.results],
        }
        FsPath(args.summary).write_text(json.dumps(payload, indent=2),
                                        encoding="utf-8")
    return 0


def _make_renderer(render_dir: FsPath, scene: Scene, cfg: EpisodeConfig):
    prior = (CooccurrencePrior.load(cfg.prior_file) if cfg.prior_file
             else CooccurrencePrior.bundled())

    def on_step(t, maps, vmap, pose):
        preds = predict_targets(maps.smap_multi, maps.cmap_multi,
                                scene.target_class, prior, scene.class_names,
                                cfg.n_targets)
        dgrid = distance_map(preds, (scene.width, scene.height)).grid
        save_panels(render_dir / f"{scene.name}_{cfg.seed}_{t:04d}.png", maps,
                    value_grid=smooth_and_normalize(vmap, cfg.gaussian_sigma),
                    distance_grid=dgrid,
                    agent_cell=pose_cell(pose, scene.resolution))

    return on_step


def _cmd_make_scenes(args) -> int:
    paths = make_suite(args.out, n_sparse=args.sparse, n_dense=args.dense,
                       base_seed=args.seed, width=args.width,
                       height=args.height)
    print(f"wrote {len(paths)} scenes to {args.out}")
    return 0


def _cmd_snapshots(args) -> int:
    scenes = _load_scenes(args)
    cfg = _build_config(args)
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fractions = sorted(float(tok) for tok in args.fractions.split(","))
    written = 0
    for rep in range(args.repeats):
        for idx, scene in enumerate(scenes):
            ep_cfg = dataclasses.replace(
                cfg, det_per_class=dict(cfg.det_per_class),
                seed=_derive_seed(cfg.seed, idx, rep))
            total_free = int((~scene.walls).sum())
            target_cells = ";".join(
                f"{x},{y}" for cid, (x, y) in scene.objects
                if cid == scene.target_class)
            pending = list(fractions)
            counter = [0]

            def on_step(t, maps, vmap, pose, scene=scene, ep_cfg=ep_cfg,
                        pending=pending, counter=counter,
                        target_cells=target_cells, total_free=total_free):
                frac = float((maps.explored & ~scene.walls).sum()) / total_free
                if pending and frac >= pending[0]:
                    while pending and frac >= pending[0]:
                        pending.pop(0)
                    meta = {
                        "scene": scene.name, "step": str(t),
                        "target_class": str(scene.target_class),
                        "target_cells": target_cells,
                        "explored_fraction": f"{frac:.4f}",
                    }
                    fname = f"{scene.name}_r{ep_cfg.seed % 10000:04d}_{counter[0]:02d}.snap"
                    save_snapshot(out / fname, maps, vmap.grid, meta)
                    counter[0] += 1

            run_episode(scene, ep_cfg, on_step=on_step)
            written += counter[0]
    print(f"wrote {written} snapshots to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="semnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run episodes and report SR/SPL")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", help="single scene file")
    src.add_argument("--suite", help="directory of .scene files")
    p_run.add_argument("--config", help="key-value config file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--ablation", default=None,
                       help="comma list of enabled modules: stl,mol,tpm,vm")
    p_run.add_argument("--repeats", type=int, default=1)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--render", help="directory for per-step PNG panels")
    p_run.add_argument("--trace", help="decision trace output file")
    p_run.add_argument("--summary", help="JSON summary output file")
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("make-scenes", help="generate a synthetic suite")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--sparse", type=int, default=10)
    p_gen.add_argument("--dense", type=int, default=10)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--width", type=int, default=42)
    p_gen.add_argument("--height", type=int, default=30)
    p_gen.set_defaults(func=_cmd_make_scenes)

    p_snap = sub.add_parser("snapshots",
                            help="emit map snapshots with ground truth")
    src2 = p_snap.add_mutually_exclusive_group(required=True)
    src2.add_argument("--scene")
    src2.add_argument("--suite")
    p_snap.add_argument("--out", required=True)
    p_snap.add_argument("--config")
    p_snap.add_argument("--seed", type=int, default=None)
    p_snap.add_argument("--ablation", default=None)
    p_snap.add_argument("--repeats", type=int, default=1)
    p_snap.add_argument("--fractions", default="0.2,0.35,0.5,0.65,0.8")
    p_snap.set_defaults(func=_cmd_snapshots)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
