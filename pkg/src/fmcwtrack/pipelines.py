"""End-to-end processing pipelines: radar cube to confirmed tracks.

Two variants share all pre-processing and differ only in the detection
domain: the RA pipeline detects on range-azimuth maps and looks up Doppler
per detection; the RD pipeline detects on range-Doppler maps (zero-Doppler
column excluded) and looks up azimuth per detection.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from fmcwtrack.cfar import CfarConfig, DetectionMask, cfar_2d
from fmcwtrack.clustering import (
    DEFAULT_EPS_M,
    DEFAULT_MIN_PTS,
    DEFAULT_VELOCITY_WEIGHT,
    PointMeasurement,
    centroids,
    dbscan,
    mask_to_points,
)
from fmcwtrack.dsp import MapGrid, drop_zero_doppler, process_frame
from fmcwtrack.scene import RadarCube, RadarParams, resolutions
from fmcwtrack.tracking import Measurement, Tracker, TrackerConfig, TrackSnapshot

log = logging.getLogger(__name__)

STANDARD_CHANNEL_SUBSETS = (4, 6, 8, 12, 15)
FRAME_BUDGET_MS = 100.0

_STAGES = ("preprocess", "detect", "points", "cluster", "track")


@dataclass(frozen=True)
class PipelineConfig:
    """One pipeline variant: detection domain, channels, and stage configs."""

    kind: str
    channel_subset: int = 15
    cfar: CfarConfig = field(default_factory=lambda: CfarConfig(kind="OS"))
    eps_m: float = DEFAULT_EPS_M
    min_pts: int = DEFAULT_MIN_PTS
    velocity_weight: float = DEFAULT_VELOCITY_WEIGHT
    tracker: TrackerConfig = field(default_factory=TrackerConfig)

    def __post_init__(self):
        if self.kind not in ("RA", "RD"):
            raise ValueError("pipeline kind must be 'RA' or 'RD'")
        if self.channel_subset not in STANDARD_CHANNEL_SUBSETS:
            raise ValueError(f"channel subset must be one of {STANDARD_CHANNEL_SUBSETS}")
        if self.eps_m <= 0:
            raise ValueError("eps_m must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


def default_pipeline_config(
    kind: str,
    params: RadarParams,
    channel_subset: int = 15,
    cfar: CfarConfig | None = None,
    eps_m: float = DEFAULT_EPS_M,
    min_pts: int = DEFAULT_MIN_PTS,
    velocity_weight: float = DEFAULT_VELOCITY_WEIGHT,
    tracker_overrides: dict | None = None,
) -> PipelineConfig:
    """Pipeline config with measurement noise tied to the resolution.

    Each noise sigma is half a resolution cell; the angular sigma therefore
    depends on the channel subset, which is what couples tracking quality to
    channel count.
    """
    res = resolutions(params)
    lam = params.wavelength_m
    d_m = params.element_spacing_wavelengths * lam
    dtheta = lam / (channel_subset * d_m)
    overrides = dict(tracker_overrides or {})
    tracker = TrackerConfig(
        sigma_r_m=overrides.pop("sigma_r_m", res.range_res_m / 2),
        sigma_theta_rad=overrides.pop("sigma_theta_rad", dtheta / 2),
        sigma_rdot_mps=overrides.pop("sigma_rdot_mps", res.velocity_res_mps / 2),
        frame_period_s=overrides.pop("frame_period_s", params.frame_period_s),
        **overrides,
    )
    return PipelineConfig(
        kind=kind,
        channel_subset=channel_subset,
        cfar=cfar if cfar is not None else CfarConfig(kind="OS"),
        eps_m=eps_m,
        min_pts=min_pts,
        velocity_weight=velocity_weight,
        tracker=tracker,
    )


@dataclass
class PipelineResult:
    """Per-frame outputs of one pipeline run."""

    kind: str
    config: PipelineConfig
    snapshots: list[list[TrackSnapshot]]
    points: list[list[PointMeasurement]]
    masks: list[DetectionMask]
    maps: list[MapGrid]
    stage_ms: dict[str, list[float]]
    preprocess_checksums: list[str]
    frame_times_s: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.snapshots)

    def confirmed_snapshots(self) -> list[list[TrackSnapshot]]:
        return [[s for s in frame if s.status == "confirmed"] for frame in self.snapshots]


def run_pipeline(cube: RadarCube, cfg: PipelineConfig, keep_maps: bool = False) -> PipelineResult:
    """Run the configured pipeline over every frame of a cube."""
    params = cube.params
    tracker = Tracker(cfg.tracker)
    snapshots: list[list[TrackSnapshot]] = []
    all_points: list[list[PointMeasurement]] = []
    masks: list[DetectionMask] = []
    maps: list[MapGrid] = []
    checksums: list[str] = []
    stage_ms: dict[str, list[float]] = {s: [] for s in _STAGES}

    for fi in range(cube.n_frames):
        t0 = time.perf_counter()
        pf = process_frame(cube.samples[fi], params, cfg.channel_subset, frame_index=fi)
        checksums.append(pf.cube_checksum())
        if cfg.kind == "RA":
            grid = pf.ra_map
        else:
            grid, _ = drop_zero_doppler(pf.rd_map, params)
        t1 = time.perf_counter()
        mask = cfar_2d(grid, cfg.cfar)
        t2 = time.perf_counter()
        points = mask_to_points(mask, pf, grid)
        t3 = time.perf_counter()
        clusters, _noise = dbscan(points, cfg.eps_m, cfg.min_pts, cfg.velocity_weight)
        meas = [
            Measurement.from_cartesian(c.x_m, c.y_m, c.radial_velocity_mps, c.power)
            for c in centroids(clusters)
            if (c.x_m, c.y_m) != (0.0, 0.0)
        ]
        t4 = time.perf_counter()
        snaps = tracker.step(meas)
        t5 = time.perf_counter()

        snapshots.append(snaps)
        all_points.append(points)
        masks.append(mask)
        if keep_maps:
            maps.append(grid)
        for name, dt in zip(
            _STAGES, (t1 - t0, t2 - t1, t3 - t2, t4 - t3, t5 - t4)
        ):
            stage_ms[name].append(dt * 1e3)
        frame_total_ms = (t5 - t0) * 1e3
        if frame_total_ms > FRAME_BUDGET_MS:
            log.warning("frame %d took %.1f ms (budget %.0f ms)", fi, frame_total_ms, FRAME_BUDGET_MS)

    return PipelineResult(
        kind=cfg.kind,
        config=cfg,
        snapshots=snapshots,
        points=all_points,
        masks=masks,
        maps=maps,
        stage_ms=stage_ms,
        preprocess_checksums=checksums,
        frame_times_s=cube.frame_times_s.copy(),
    )


def run_ra_pipeline(cube: RadarCube, cfg: PipelineConfig, keep_maps: bool = False) -> PipelineResult:
    if cfg.kind != "RA":
        raise ValueError("config kind must be 'RA'")
    return run_pipeline(cube, cfg, keep_maps)


def run_rd_pipeline(cube: RadarCube, cfg: PipelineConfig, keep_maps: bool = False) -> PipelineResult:
    if cfg.kind != "RD":
        raise ValueError("config kind must be 'RD'")
    return run_pipeline(cube, cfg, keep_maps)
