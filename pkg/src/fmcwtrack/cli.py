"""Command-line entry point: run experiments from spec files, list
scenarios, and export maps from finished run directories.

All artifacts land inside the chosen output directory. A manifest records
the config hash, seed, package version and per-stage wall-clock so a run
can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

import fmcwtrack
from fmcwtrack.config import RunSpec, SpecError, parse_runspec
from fmcwtrack.dsp import process_frame
from fmcwtrack.evaluate import auc, roc_sweep, track_metrics
from fmcwtrack.export import (
    OUTPUT_README,
    file_sha256,
    write_manifest,
    write_map_csv,
    write_mask_csv,
    write_metrics_csv,
    write_pgm,
    write_points_csv,
    write_roc_csv,
    write_runtime_csv,
    write_tracks_csv,
)
from fmcwtrack.pipelines import default_pipeline_config, run_pipeline
from fmcwtrack.scene import ground_truth, synthesize_cube
from fmcwtrack.scenarios import builtin_scenarios, make_scenario


def _config_hash(normalized: dict) -> str:
    return hashlib.sha256(json.dumps(normalized, sort_keys=True).encode()).hexdigest()


def _metrics_row(label: str, kind: str, subset: int, m) -> dict:
    return {
        "label": label,
        "pipeline": kind,
        "channels": subset,
        "rmse_m": m.position_rmse_m if math.isfinite(m.position_rmse_m) else -1.0,
        "id_switches": m.id_switches,
        "merge_range_m": m.merge_range_m,
        "matched_pairs": m.matched_pairs,
        "min_matched_fraction": (
            min(m.matched_fraction.values()) if m.matched_fraction else 0.0
        ),
    }


def _run_single(spec: RunSpec, out: Path, stages: dict) -> None:
    t0 = time.perf_counter()
    cube = synthesize_cube(spec.scene, spec.params)
    stages["synthesize_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = run_pipeline(cube, spec.pipeline, keep_maps=True)
    stages["pipeline_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    write_tracks_csv(out / "tracks.csv", result.snapshots, result.frame_times_s)
    write_points_csv(out / "points.csv", result.points, result.frame_times_s)
    write_runtime_csv(out / "runtime.csv", result.stage_ms)
    masks_dir = out / "masks"
    maps_dir = out / "maps"
    masks_dir.mkdir(exist_ok=True)
    maps_dir.mkdir(exist_ok=True)
    for fi, (mask, grid) in enumerate(zip(result.masks, result.maps)):
        write_mask_csv(masks_dir / f"frame_{fi:04d}.csv", mask, fi)
        write_pgm(maps_dir / f"frame_{fi:04d}.pgm", grid.magnitudes)
    truth = ground_truth(spec.scene, spec.params)
    metrics = track_metrics(result, truth)
    write_metrics_csv(
        out / "metrics.csv",
        [_metrics_row("single-run", spec.pipeline.kind, spec.pipeline.channel_subset, metrics)],
    )
    stages["export_s"] = time.perf_counter() - t0


def _run_roc(spec: RunSpec, out: Path, stages: dict) -> None:
    opts = spec.roc_options
    t0 = time.perf_counter()
    points = []
    for kind in opts["cfar_kinds"]:
        points.extend(
            roc_sweep(
                spec.scene,
                spec.params,
                opts["pipeline_kind"],
                kind,
                [tuple(w) for w in opts["windows"]],
                list(opts["design_pfas"]),
                channel_subset=opts["channel_subset"],
            )
        )
    stages["roc_s"] = time.perf_counter() - t0
    write_roc_csv(out / "roc.csv", points)
    by_kind = {}
    for p in points:
        by_kind.setdefault(p.cfar.kind, []).append(p)
    rows = []
    for kind, pts in by_kind.items():
        try:
            area = auc(pts)
        except ValueError:
            area = -1.0
        rows.append({"label": "roc-auc", "pipeline": opts["pipeline_kind"],
                     "cfar": kind, "auc": area})
    write_metrics_csv(out / "metrics.csv", rows)


def _run_ablation(spec: RunSpec, out: Path, stages: dict, threads: int) -> None:
    t0 = time.perf_counter()
    cube = synthesize_cube(spec.scene, spec.params)
    truth = ground_truth(spec.scene, spec.params)
    stages["synthesize_s"] = time.perf_counter() - t0

    base = spec.pipeline

    def one(subset: int):
        cfg = default_pipeline_config(
            base.kind,
            spec.params,
            subset,
            cfar=base.cfar,
            eps_m=base.eps_m,
            min_pts=base.min_pts,
            velocity_weight=base.velocity_weight,
        )
        return subset, track_metrics(run_pipeline(cube, cfg), truth)

    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(one, spec.ablation_subsets))
    else:
        results = dict(one(s) for s in spec.ablation_subsets)
    stages["ablation_s"] = time.perf_counter() - t0
    rows = [
        _metrics_row("ablation", base.kind, subset, results[subset])
        for subset in spec.ablation_subsets
    ]
    write_metrics_csv(out / "ablation.csv", rows)


def _run_suite(spec: RunSpec, out: Path, stages: dict, threads: int) -> None:
    names = list(builtin_scenarios())

    def one(name: str):
        scene = make_scenario(name, seed=spec.seed)
        cube = synthesize_cube(scene, spec.params)
        truth = ground_truth(scene, spec.params)
        rows = []
        for kind in ("RA", "RD"):
            cfg = default_pipeline_config(
                kind,
                spec.params,
                spec.pipeline.channel_subset,
                cfar=spec.pipeline.cfar,
                eps_m=spec.pipeline.eps_m,
                min_pts=spec.pipeline.min_pts,
                velocity_weight=spec.pipeline.velocity_weight,
            )
            m = track_metrics(run_pipeline(cube, cfg), truth)
            rows.append(_metrics_row(name, kind, spec.pipeline.channel_subset, m))
        return name, rows

    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            by_name = dict(pool.map(one, names))
    else:
        by_name = dict(one(n) for n in names)
    stages["suite_s"] = time.perf_counter() - t0
    rows = [row for name in names for row in by_name[name]]
    write_metrics_csv(out / "metrics.csv", rows)


def run(spec: RunSpec, threads: int = 1) -> Path:
    """Execute a run spec; returns the run directory."""
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stages: dict[str, float] = {}
    with open(out / "config.json", "w") as f:
        json.dump(spec.normalized, f, indent=2, sort_keys=True)
        f.write("\n")
    (out / "README.txt").write_text(OUTPUT_README)

    if spec.experiment == "single-run":
        _run_single(spec, out, stages)
    elif spec.experiment == "roc-sweep":
        _run_roc(spec, out, stages)
    elif spec.experiment == "ablation":
        _run_ablation(spec, out, stages, threads)
    else:
        _run_suite(spec, out, stages, threads)

    primary = [
        p for p in ("tracks.csv", "roc.csv", "metrics.csv", "ablation.csv", "points.csv")
        if (out / p).is_file()
    ]
    write_manifest(
        out / "manifest.json",
        {
            "config_sha256": _config_hash(spec.normalized),
            "seed": spec.seed,
            "experiment": spec.experiment,
            "version": fmcwtrack.__version__,
            "stage_wallclock_s": {k: round(v, 3) for k, v in stages.items()},
            "primary_files": {p: file_sha256(out / p) for p in primary},
        },
    )
    return out


def export_maps(run_dir: str | Path) -> Path:
    """Regenerate map PGMs/CSVs for a finished run from its config snapshot.

    Deterministic: the same config and seed reproduce the same maps.
    """
    run_path = Path(run_dir)
    cfg_file = run_path / "config.json"
    if not cfg_file.is_file():
        raise SpecError(f"no config.json in {run_path}")
    from fmcwtrack.config import parse_runspec_dict

    spec = parse_runspec_dict(json.loads(cfg_file.read_text()))
    cube = synthesize_cube(spec.scene, spec.params)
    maps_dir = run_path / "maps"
    maps_dir.mkdir(exist_ok=True)
    for fi in range(cube.n_frames):
        pf = process_frame(cube.samples[fi], spec.params, spec.pipeline.channel_subset, fi)
        grid = pf.ra_map if spec.pipeline.kind == "RA" else pf.rd_map
        write_pgm(maps_dir / f"frame_{fi:04d}.pgm", grid.magnitudes)
        write_map_csv(maps_dir / f"frame_{fi:04d}.csv", grid)
    return maps_dir


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fmcwtrack",
        description="FMCW indoor tracking workbench: run experiments from JSON specs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment spec")
    p_run.add_argument("spec", help="path to a JSON run spec")
    p_run.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent runs (ablation/suite)")

    p_sc = sub.add_parser("scenarios", help="scenario library")
    p_sc.add_argument("action", choices=["list"])

    p_exp = sub.add_parser("export-maps", help="regenerate maps for a run directory")
    p_exp.add_argument("run_dir")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            spec = parse_runspec(args.spec, seed_override=args.seed, out_override=args.out)
            out = run(spec, threads=max(1, args.threads))
            print(f"run complete: {out}")
        elif args.command == "scenarios":
            for name in builtin_scenarios():
                print(name)
        else:
            out = export_maps(args.run_dir)
            print(f"maps written: {out}")
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # stage failures carry their origin
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
