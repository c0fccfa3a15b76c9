"""Indoor human tracking workbench for MIMO FMCW radar.

Synthesizes raw radar cubes for configurable indoor scenes and runs two
detection pipelines over them: detection on range-azimuth maps and detection
on range-Doppler maps, each followed by DBSCAN clustering and JPDA/EKF
multi-target tracking. Includes ROC, channel-count ablation and tracking
metric evaluation on the synthetic scenes.
"""

from fmcwtrack.scene import (
    RadarParams,
    Resolutions,
    Scatterer,
    HumanTarget,
    GhostSpec,
    Scene,
    RadarCube,
    resolutions,
    scatterers_at,
    synthesize_frame,
    synthesize_cube,
    ground_truth,
)
from fmcwtrack.cfar import CfarConfig, DetectionMask, cfar_2d, threshold_factor
from fmcwtrack.clustering import PointMeasurement, Cluster, mask_to_points, dbscan, centroids
from fmcwtrack.tracking import TrackerConfig, TrackState, Measurement, Tracker
from fmcwtrack.pipelines import PipelineConfig, PipelineResult, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "RadarParams",
    "Resolutions",
    "Scatterer",
    "HumanTarget",
    "GhostSpec",
    "Scene",
    "RadarCube",
    "resolutions",
    "scatterers_at",
    "synthesize_frame",
    "synthesize_cube",
    "ground_truth",
    "CfarConfig",
    "DetectionMask",
    "cfar_2d",
    "threshold_factor",
    "PointMeasurement",
    "Cluster",
    "mask_to_points",
    "dbscan",
    "centroids",
    "TrackerConfig",
    "TrackState",
    "Measurement",
    "Tracker",
    "PipelineConfig",
    "PipelineResult",
    "run_pipeline",
    "__version__",
]
