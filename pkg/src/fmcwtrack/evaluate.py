"""Desk-scale evaluation: ROC sweeps for the CFAR family, channel-count
ablation, and tracking metrics against scene ground truth.

ROC protocol: detection probability is per target (a target counts as
detected in a frame when at least one cell of its positive block fires),
false-alarm probability is per cell over the negative region. Cells within
one cell of a truth cell are positive, a two-cell guard band around the
positive block is excluded from both tallies, everything else is negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from fmcwtrack.cfar import CfarConfig, compute_background, detect_with_background
from fmcwtrack.dsp import MapGrid, drop_zero_doppler, process_frame
from fmcwtrack.pipelines import PipelineConfig, PipelineResult, run_pipeline
from fmcwtrack.scene import RadarParams, Scene, ground_truth, synthesize_cube

POSITIVE_TOLERANCE_CELLS = 1
GUARD_BAND_CELLS = 2
MATCH_GATE_M = 1.5
MERGE_MIN_CONSECUTIVE_FRAMES = 3


@dataclass(frozen=True)
class RocPoint:
    """One operating point of a detector configuration."""

    empirical_pfa: float
    empirical_pd: float
    cfar: CfarConfig

    def __post_init__(self):
        if not (0.0 <= self.empirical_pfa <= 1.0 and 0.0 <= self.empirical_pd <= 1.0):
            raise ValueError("probabilities must be in [0, 1]")


@dataclass
class TrackMetrics:
    """Tracking quality summary for one pipeline run against truth."""

    position_rmse_m: float
    id_switches: int
    confirmed_per_frame: list[int]
    merge_range_m: float
    matched_fraction: dict[int, float]
    matched_pairs: int


def _truth_cell(grid: MapGrid, x: float, y: float, vr: float) -> tuple[int, int] | None:
    """Map cell of a truth target, or None when it falls off the map."""
    r = math.hypot(x, y)
    if grid.kind == "RA":
        col_value = math.atan2(x, y)
    else:
        col_value = vr
    row = int(np.argmin(np.abs(grid.axis0 - r)))
    col = int(np.argmin(np.abs(grid.axis1 - col_value)))
    row_spacing = float(np.median(np.diff(grid.axis0)))
    col_spacing = float(np.median(np.diff(grid.axis1)))
    if abs(grid.axis0[row] - r) > row_spacing:
        return None
    if abs(grid.axis1[col] - col_value) > col_spacing:
        return None
    return row, col


def truth_labels(
    grid: MapGrid,
    truth_rows: list[tuple[int, float, float, float]],
    tolerance_cells: int = POSITIVE_TOLERANCE_CELLS,
) -> tuple[list[np.ndarray], np.ndarray]:
    """(per-target positive masks, negative mask) partitioning the map.

    Every cell is exactly one of: positive (within tolerance of a truth
    cell), excluded guard band, or negative.
    """
    shape = grid.magnitudes.shape
    rows = np.arange(shape[0])[:, None]
    cols = np.arange(shape[1])[None, :]
    positives: list[np.ndarray] = []
    excluded = np.zeros(shape, dtype=bool)
    for _tid, x, y, vr in truth_rows:
        cell = _truth_cell(grid, x, y, vr)
        if cell is None:
            positives.append(np.zeros(shape, dtype=bool))
            continue
        cheb = np.maximum(np.abs(rows - cell[0]), np.abs(cols - cell[1]))
        positives.append(cheb <= tolerance_cells)
        excluded |= cheb <= tolerance_cells + GUARD_BAND_CELLS
    any_positive = np.zeros(shape, dtype=bool)
    for p in positives:
        any_positive |= p
    negative = ~(excluded | any_positive)
    return positives, negative


def roc_sweep(
    scene: Scene,
    params: RadarParams,
    pipeline_kind: str,
    cfar_kind: str,
    window_grid: list[tuple[int, int]],
    pfa_grid: list[float],
    channel_subset: int = 15,
) -> list[RocPoint]:
    """Empirical (Pfa, Pd) for every (training, guard) window and design Pfa.

    The cube is synthesized once; per frame the map's background statistic
    is computed once per window geometry and re-thresholded per design Pfa.
    """
    if not window_grid or not pfa_grid:
        raise ValueError("window_grid and pfa_grid must be non-empty")
    cube = synthesize_cube(scene, params)
    truth = ground_truth(scene, params)
    configs = [
        [
            CfarConfig(
                kind=cfar_kind, training_cells=(ntc, ntc), guard_cells=(ng, ng), design_pfa=pfa
            )
            for pfa in pfa_grid
        ]
        for ntc, ng in window_grid
    ]
    detected_targets = np.zeros((len(window_grid), len(pfa_grid)))
    total_targets = 0
    false_cells = np.zeros((len(window_grid), len(pfa_grid)))
    negative_cells = 0

    for fi in range(cube.n_frames):
        pf = process_frame(cube.samples[fi], params, channel_subset, frame_index=fi)
        if pipeline_kind == "RA":
            grid = pf.ra_map
        else:
            grid, _ = drop_zero_doppler(pf.rd_map, params)
        positives, negative = truth_labels(grid, truth[fi])
        total_targets += len(positives)
        negative_cells += int(negative.sum())
        for wi, cfg_row in enumerate(configs):
            bg = compute_background(grid.magnitudes, cfg_row[0])
            for pi, cfg in enumerate(cfg_row):
                mask = detect_with_background(grid.magnitudes, bg, cfg.design_pfa).mask
                false_cells[wi, pi] += int((mask & negative).sum())
                for p in positives:
                    if (mask & p).any():
                        detected_targets[wi, pi] += 1

    points = []
    for wi, cfg_row in enumerate(configs):
        for pi, cfg in enumerate(cfg_row):
            pd = detected_targets[wi, pi] / total_targets if total_targets else 0.0
            pfa = false_cells[wi, pi] / negative_cells if negative_cells else 0.0
            points.append(RocPoint(empirical_pfa=pfa, empirical_pd=pd, cfar=cfg))
    return points


def auc(points: list[RocPoint]) -> float:
    """Trapezoidal area under the ROC, normalized by the Pfa span."""
    if len(points) < 2:
        raise ValueError("need at least 2 ROC points")
    order = sorted(points, key=lambda p: (p.empirical_pfa, p.empirical_pd))
    x = np.array([p.empirical_pfa for p in order])
    y = np.array([p.empirical_pd for p in order])
    span = x[-1] - x[0]
    if span <= 0:
        raise ValueError("ROC points span zero false-alarm range")
    return float(np.trapezoid(y, x) / span)


def _match_frame(
    snaps, truth_rows, gate_m: float = MATCH_GATE_M
) -> dict[int, tuple[int, float]]:
    """Min-cost truth-to-track matching; returns truth id -> (track id, distance)."""
    if not snaps or not truth_rows:
        return {}
    cost = np.full((len(truth_rows), len(snaps)), 1e6)
    for ti, (_tid, x, y, _vr) in enumerate(truth_rows):
        for si, s in enumerate(snaps):
            d = math.hypot(s.x_m - x, s.y_m - y)
            if d <= gate_m:
                cost[ti, si] = d
    rows, cols = linear_sum_assignment(cost)
    out = {}
    for ti, si in zip(rows, cols):
        if cost[ti, si] <= gate_m:
            out[truth_rows[ti][0]] = (snaps[si].track_id, float(cost[ti, si]))
    return out


def track_metrics(
    result: PipelineResult,
    truth: list[list[tuple[int, float, float, float]]],
    gate_m: float = MATCH_GATE_M,
) -> TrackMetrics:
    """RMSE over matched confirmed tracks, id switches and merge statistics.

    merge_range_m is the radial extent (max minus min truth range) of the
    band in which the two truths of a two-target run resolve to a single
    confirmed track for at least MERGE_MIN_CONSECUTIVE_FRAMES in a row;
    0 when that never happens or the scene is not a two-target scene.
    """
    n = min(result.n_frames, len(truth))
    confirmed = result.confirmed_snapshots()
    sq_err: list[float] = []
    last_match: dict[int, int] = {}
    switches = 0
    per_target_matched: dict[int, int] = {}
    per_target_frames: dict[int, int] = {}
    merged_flags: list[bool] = []
    merged_ranges: list[float] = []

    for fi in range(n):
        snaps = confirmed[fi]
        rows = truth[fi]
        for tid, *_ in rows:
            per_target_frames[tid] = per_target_frames.get(tid, 0) + 1
        matches = _match_frame(snaps, rows, gate_m)
        for tid, (track_id, dist) in matches.items():
            sq_err.append(dist**2)
            per_target_matched[tid] = per_target_matched.get(tid, 0) + 1
            if tid in last_match and last_match[tid] != track_id:
                switches += 1
            last_match[tid] = track_id

        if len(rows) == 2:
            # Merged: exactly one confirmed track is available to both truths
            # (each truth's in-gate candidate set is the same singleton).
            candidate_sets = []
            for _tid, x, y, _vr in rows:
                cands = {
                    s.track_id
                    for s in snaps
                    if math.hypot(s.x_m - x, s.y_m - y) <= gate_m
                }
                candidate_sets.append(cands)
            merged = (
                len(candidate_sets[0]) == 1
                and candidate_sets[0] == candidate_sets[1]
            )
            merged_flags.append(merged)
            merged_ranges.append(
                float(np.mean([math.hypot(r[1], r[2]) for r in rows]))
            )

    merge_range = _merge_extent(merged_flags, merged_ranges)
    rmse = float(np.sqrt(np.mean(sq_err))) if sq_err else math.inf
    return TrackMetrics(
        position_rmse_m=rmse,
        id_switches=switches,
        confirmed_per_frame=[len(f) for f in confirmed[:n]],
        merge_range_m=merge_range,
        matched_fraction={
            tid: per_target_matched.get(tid, 0) / cnt
            for tid, cnt in per_target_frames.items()
        },
        matched_pairs=len(sq_err),
    )


def _merge_extent(flags: list[bool], ranges: list[float]) -> float:
    """Radial span of the widest contiguous merged band (>= 3 frames)."""
    best = 0.0
    run: list[float] = []
    for merged, rng in zip(flags, ranges):
        if merged:
            run.append(rng)
        else:
            if len(run) >= MERGE_MIN_CONSECUTIVE_FRAMES:
                best = max(best, max(run) - min(run))
            run = []
    if len(run) >= MERGE_MIN_CONSECUTIVE_FRAMES:
        best = max(best, max(run) - min(run))
    return float(best)


def channel_ablation(
    scene: Scene,
    params: RadarParams,
    base_config_factory,
    subsets: tuple[int, ...] = (15, 12, 8, 6, 4),
) -> dict[int, TrackMetrics]:
    """Re-run one pipeline over the same cube with each channel subset.

    base_config_factory(subset) must return the PipelineConfig to use for
    that subset (so measurement noise can track the angular resolution).
    """
    cube = synthesize_cube(scene, params)
    truth = ground_truth(scene, params)
    out: dict[int, TrackMetrics] = {}
    for subset in subsets:
        cfg: PipelineConfig = base_config_factory(subset)
        result = run_pipeline(cube, cfg)
        out[subset] = track_metrics(result, truth)
    return out
