"""Artifact export: 16-bit PGM images, CSV tables, and run directories.

All CSV floats use repr-stable formatting so identical runs produce
byte-identical files. Map PGMs are log-scaled with a documented dB floor.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from fmcwtrack.cfar import DetectionMask
from fmcwtrack.dsp import MapGrid

PGM_DB_FLOOR = -60.0  # relative to map maximum
PGM_MAXVAL = 65535


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def write_pgm(path: Path, magnitudes: np.ndarray) -> None:
    """16-bit binary PGM, row-major, log-scaled over [floor, 0] dB."""
    m = np.asarray(magnitudes, dtype=float)
    peak = m.max()
    if peak <= 0:
        scaled = np.zeros(m.shape, dtype=np.uint16)
    else:
        db = 10.0 * np.log10(np.maximum(m / peak, 10 ** (PGM_DB_FLOOR / 10.0)))
        scaled = np.round((db - PGM_DB_FLOOR) / -PGM_DB_FLOOR * PGM_MAXVAL).astype(np.uint16)
    header = f"P5\n# log-scaled power, floor {PGM_DB_FLOOR} dB re max\n{m.shape[1]} {m.shape[0]}\n{PGM_MAXVAL}\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(scaled.astype(">u2").tobytes())


def read_pgm(path: Path) -> np.ndarray:
    """Read back a 16-bit PGM written by write_pgm (for tests)."""
    data = Path(path).read_bytes()
    parts = []
    idx = 0
    while len(parts) < 4:
        end = data.index(b"\n", idx)
        line = data[idx:end].decode("ascii")
        idx = end + 1
        if line.startswith("#"):
            continue
        parts.extend(line.split())
    if parts[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    n = w * h
    raw = struct.unpack(f">{n}H", data[idx : idx + 2 * n])
    return np.array(raw, dtype=np.uint16).reshape(h, w)


def write_map_csv(path: Path, grid: MapGrid) -> None:
    """Map matrix with axis headers: first row axis1, first column axis0."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([grid.kind] + [_fmt(v) for v in grid.axis1])
        for i, r in enumerate(grid.axis0):
            w.writerow([_fmt(r)] + [_fmt(v) for v in grid.magnitudes[i]])


def write_mask_csv(path: Path, mask: DetectionMask, frame: int) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "row", "col", "power"])
        for row, col, power in mask.cells:
            w.writerow([frame, row, col, _fmt(power)])


def write_tracks_csv(path: Path, snapshots_per_frame, frame_times) -> None:
    """Track snapshots: frame, time_s, id, status, x, y, vx, vy, diagnostics."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["frame", "time_s", "id", "status", "x_m", "y_m", "vx_mps", "vy_mps",
             "gated_count", "miss_probability"]
        )
        for fi, snaps in enumerate(snapshots_per_frame):
            for s in sorted(snaps, key=lambda s: s.track_id):
                w.writerow(
                    [s.frame, _fmt(frame_times[fi]), s.track_id, s.status,
                     _fmt(s.x_m), _fmt(s.y_m), _fmt(s.vx_mps), _fmt(s.vy_mps),
                     s.gated_count, _fmt(s.miss_probability)]
                )


def write_points_csv(path: Path, points_per_frame, frame_times, cluster_ids=None) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "time_s", "x_m", "y_m", "rdot_mps", "power", "cluster"])
        for fi, pts in enumerate(points_per_frame):
            cids = cluster_ids[fi] if cluster_ids is not None else [-1] * len(pts)
            for p, cid in zip(pts, cids):
                w.writerow(
                    [fi, _fmt(frame_times[fi]), _fmt(p.x_m), _fmt(p.y_m),
                     _fmt(p.radial_velocity_mps), _fmt(p.power), cid]
                )


def write_runtime_csv(path: Path, stage_ms: dict[str, list[float]]) -> None:
    stages = list(stage_ms)
    n = len(next(iter(stage_ms.values()), []))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame"] + [f"{s}_ms" for s in stages])
        for fi in range(n):
            w.writerow([fi] + [_fmt(stage_ms[s][fi]) for s in stages])


def write_roc_csv(path: Path, points) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["kind", "n_tc", "n_g", "design_pfa", "emp_pfa", "emp_pd"])
        for p in points:
            w.writerow(
                [p.cfar.kind, p.cfar.training_cells[0], p.cfar.guard_cells[0],
                 _fmt(p.cfar.design_pfa), _fmt(p.empirical_pfa), _fmt(p.empirical_pd)]
            )


def write_metrics_csv(path: Path, rows: list[dict]) -> None:
    """Generic metric table; rows share the same keys."""
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in (r[k] for k in keys)])


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path: Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


OUTPUT_README = """Output columns
==============

roc.csv       kind, n_tc (training cells/side), n_g (guard cells/side),
              design_pfa, emp_pfa (detected negative cells / negative cells),
              emp_pd (fraction of truth targets with a detection in their
              positive block, averaged over frames). Positive block: cells
              within 1 cell of the truth cell; a 2-cell guard band around it
              is excluded from both tallies.
tracks.csv    frame, time_s, id, status, x_m, y_m, vx_mps, vy_mps,
              gated_count (measurements in gate), miss_probability (JPDA
              missed-detection probability this frame).
points.csv    frame, time_s, x_m, y_m, rdot_mps, power, cluster (-1 noise).
metrics.csv   scenario/pipeline metric rows: RMSE over matched confirmed
              tracks, id switches, merge range (radial extent of the widest
              contiguous band where two truths share one confirmed track),
              per-target matched fraction.
ablation.csv  one metrics row per channel subset.
runtime.csv   per-frame stage times in milliseconds.
maps/         16-bit PGM per frame, log power, -60 dB floor re map max.
masks/        detected cells per frame (row, col, power).
"""
