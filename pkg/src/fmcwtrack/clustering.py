"""Detection masks to Cartesian point clouds, and DBSCAN grouping.

Points are clustered in (x, y, w*vr) space: the weighted radial velocity
axis lets two targets that overlap in position but differ in velocity
separate. The DBSCAN here is the textbook queue-based algorithm; border
points go to the first core cluster that reaches them, and points are
visited in input order, so results are reproducible for a fixed input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fmcwtrack.cfar import DetectionMask
from fmcwtrack.dsp import MapGrid, ProcessedFrame, angle_at, doppler_at, velocity_axis_mps

DEFAULT_EPS_M = 0.9
DEFAULT_MIN_PTS = 3
DEFAULT_VELOCITY_WEIGHT = 0.5  # metres of distance per m/s of velocity gap


@dataclass(frozen=True)
class PointMeasurement:
    """Cartesian detection point with radial velocity and power."""

    x_m: float
    y_m: float
    radial_velocity_mps: float
    power: float

    def __post_init__(self):
        if not (math.isfinite(self.x_m) and math.isfinite(self.y_m)):
            raise ValueError("point coordinates must be finite")


@dataclass
class Cluster:
    """DBSCAN cluster with its power-weighted centroid."""

    points: list[PointMeasurement]
    centroid: PointMeasurement

    @property
    def size(self) -> int:
        return len(self.points)


def mask_to_points(
    mask: DetectionMask, source: ProcessedFrame, grid: MapGrid
) -> list[PointMeasurement]:
    """Convert detected cells of an RA or RD map into Cartesian points.

    RA cells carry (r, az) directly and fetch velocity from the Doppler
    spectrum beamformed at that azimuth; RD cells carry (r, vr) and fetch
    azimuth from DOA estimation on that (range, Doppler) snapshot.
    """
    points: list[PointMeasurement] = []
    if grid.kind == "RA":
        for row, col, power in mask.cells:
            r = float(grid.axis0[row])
            az = float(grid.axis1[col])
            vr = doppler_at(source, row, az)
            points.append(PointMeasurement(r * math.sin(az), r * math.cos(az), vr, power))
    else:
        # The RD grid may have the zero-Doppler column removed, so recover
        # the cube's Doppler bin from the velocity value, not the column.
        velocity_axis = velocity_axis_mps(source.params)
        for row, col, power in mask.cells:
            r = float(grid.axis0[row])
            vr = float(grid.axis1[col])
            doppler_bin = int(np.argmin(np.abs(velocity_axis - vr)))
            az = angle_at(source, row, doppler_bin)
            points.append(PointMeasurement(r * math.sin(az), r * math.cos(az), vr, power))
    return points


def _feature_matrix(points: list[PointMeasurement], velocity_weight: float) -> np.ndarray:
    return np.array(
        [[p.x_m, p.y_m, velocity_weight * p.radial_velocity_mps] for p in points]
    )


def dbscan(
    points: list[PointMeasurement],
    eps_m: float = DEFAULT_EPS_M,
    min_pts: int = DEFAULT_MIN_PTS,
    velocity_weight: float = DEFAULT_VELOCITY_WEIGHT,
) -> tuple[list[Cluster], list[PointMeasurement]]:
    """Cluster points; returns (clusters, noise points).

    Core points have >= min_pts neighbours within eps (the point itself
    counts). Border points join the first core cluster that discovers them.
    """
    if eps_m <= 0:
        raise ValueError("eps_m must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    if not points:
        return [], []
    feats = _feature_matrix(points, velocity_weight)
    n = len(points)
    dist2 = ((feats[:, None, :] - feats[None, :, :]) ** 2).sum(axis=-1)
    neighbors = [np.flatnonzero(dist2[i] <= eps_m**2) for i in range(n)]
    is_core = np.array([len(nb) >= min_pts for nb in neighbors])

    UNVISITED, NOISE = -2, -1
    labels = np.full(n, UNVISITED)
    cluster_id = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not is_core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cluster_id
        queue = list(neighbors[i])
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == NOISE:
                labels[j] = cluster_id  # border point reclaimed
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster_id
            if is_core[j]:
                queue.extend(neighbors[j])
        cluster_id += 1

    clusters = []
    for cid in range(cluster_id):
        members = [points[i] for i in np.flatnonzero(labels == cid)]
        clusters.append(Cluster(points=members, centroid=_centroid(members)))
    noise = [points[i] for i in np.flatnonzero(labels == NOISE)]
    return clusters, noise


def _centroid(members: list[PointMeasurement]) -> PointMeasurement:
    w = np.array([max(p.power, 0.0) for p in members])
    if w.sum() <= 0:
        w = np.ones(len(members))
    w = w / w.sum()
    x = float(np.dot(w, [p.x_m for p in members]))
    y = float(np.dot(w, [p.y_m for p in members]))
    vr = float(np.dot(w, [p.radial_velocity_mps for p in members]))
    return PointMeasurement(x, y, vr, float(sum(p.power for p in members)))


def centroids(clusters: list[Cluster]) -> list[PointMeasurement]:
    """Power-weighted centroids, one measurement per cluster."""
    return [c.centroid for c in clusters]
