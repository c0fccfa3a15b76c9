"""Run specifications: a documented JSON format describing one experiment.

A spec selects an experiment kind (single-run, roc-sweep, ablation or
scenario-suite), a scene (built-in by name, or explicit), radar parameter
overrides, and pipeline settings. Unknown keys are rejected; omitted radar
fields fall back to the reference 24 GHz parameter set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from fmcwtrack.cfar import CFAR_KINDS, CfarConfig
from fmcwtrack.pipelines import (
    STANDARD_CHANNEL_SUBSETS,
    PipelineConfig,
    default_pipeline_config,
)
from fmcwtrack.scene import (
    GhostSpec,
    HumanTarget,
    Limb,
    RadarParams,
    Scatterer,
    Scene,
)
from fmcwtrack.scenarios import builtin_scenarios, make_scenario

EXPERIMENT_KINDS = ("single-run", "roc-sweep", "ablation", "scenario-suite")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_LIMB_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "rcs_fraction": {"type": "number", "minimum": 0},
        "velocity_amplitude_mps": _NUM,
        "gait_frequency_hz": {"type": "number", "minimum": 0},
        "phase_rad": _NUM,
        "offset_x_m": _NUM,
        "offset_y_m": _NUM,
    },
    "required": ["rcs_fraction", "velocity_amplitude_mps", "gait_frequency_hz"],
}

_HUMAN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "path": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM},
        },
        "speed_mps": _POS,
        "start_time_s": {"type": "number", "minimum": 0},
        "torso_rcs": {"type": "number", "minimum": 0},
        "limbs": {"type": "array", "items": _LIMB_SCHEMA},
    },
    "required": ["path", "speed_mps"],
}

_SCENE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "builtin": {"type": "string"},
        "humans": {"type": "array", "items": _HUMAN_SCHEMA},
        "clutter": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "range_m": _POS,
                    "azimuth_rad": _NUM,
                    "amplitude": {"type": "number", "minimum": 0},
                },
                "required": ["range_m", "azimuth_rad", "amplitude"],
            },
        },
        "ghosts": {
            "type": "array",
            "items": {
                "anyOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "enabled": {"type": "boolean"},
                            "mirror_x_m": _NUM,
                            "attenuation_db": _NUM,
                        },
                    },
                ]
            },
        },
        "duration_s": _POS,
    },
}

_RADAR_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "carrier_freq_hz": _POS,
        "bandwidth_hz": _POS,
        "sweep_time_s": _POS,
        "chirp_repetition_interval_s": _POS,
        "chirps_per_frame": {"type": "integer", "minimum": 1},
        "adc_samples": {"type": "integer", "minimum": 1},
        "adc_rate_sps": _POS,
        "n_virtual_channels": {"type": "integer", "minimum": 1},
        "element_spacing_wavelengths": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "frame_rate_hz": _POS,
        "noise_power": {"type": "number", "minimum": 0},
    },
}

_CFAR_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(CFAR_KINDS)},
        "training_cells": {"type": "integer", "minimum": 1},
        "guard_cells": {"type": "integer", "minimum": 0},
        "design_pfa": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "os_rank_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
    "required": ["kind"],
}

_TRACKER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "process_noise_intensity": _POS,
        "sigma_r_m": _POS,
        "sigma_theta_rad": _POS,
        "sigma_rdot_mps": _POS,
        "gate_chi2": _POS,
        "detection_probability": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "clutter_density": {"type": "number", "minimum": 0},
        "confirm_m": {"type": "integer", "minimum": 1},
        "confirm_n": {"type": "integer", "minimum": 1},
        "delete_after_misses": {"type": "integer", "minimum": 1},
    },
}

_PIPELINE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["RA", "RD"]},
        "channel_subset": {"enum": list(STANDARD_CHANNEL_SUBSETS)},
        "cfar": _CFAR_SCHEMA,
        "eps_m": _POS,
        "min_pts": {"type": "integer", "minimum": 1},
        "velocity_weight": {"type": "number", "minimum": 0},
        "tracker": _TRACKER_SCHEMA,
    },
    "required": ["kind"],
}

RUNSPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENT_KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "radar": _RADAR_SCHEMA,
        "scene": _SCENE_SCHEMA,
        "pipeline": _PIPELINE_SCHEMA,
        "roc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pipeline_kind": {"enum": ["RA", "RD"]},
                "cfar_kinds": {"type": "array", "minItems": 1, "items": {"enum": list(CFAR_KINDS)}},
                "windows": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "minItems": 2,
                        "maxItems": 2,
                        "items": {"type": "integer", "minimum": 0},
                    },
                },
                "design_pfas": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                },
                "channel_subset": {"enum": list(STANDARD_CHANNEL_SUBSETS)},
            },
        },
        "ablation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "subsets": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": list(STANDARD_CHANNEL_SUBSETS)},
                },
            },
        },
    },
    "required": ["experiment", "scene"],
}


class SpecError(ValueError):
    """Run spec could not be parsed or validated."""


@dataclass
class RunSpec:
    """Fully resolved experiment description."""

    experiment: str
    seed: int
    output_dir: str
    params: RadarParams
    scene: Scene
    pipeline: PipelineConfig
    roc_options: dict = field(default_factory=dict)
    ablation_subsets: tuple[int, ...] = (15, 12, 8, 6, 4)
    normalized: dict = field(default_factory=dict)


def _scene_from_dict(spec: dict, seed: int) -> Scene:
    if "builtin" in spec:
        extra = set(spec) - {"builtin"}
        if extra:
            raise SpecError(f"scene.builtin cannot be combined with {sorted(extra)}")
        name = spec["builtin"]
        if name not in builtin_scenarios():
            raise SpecError(f"unknown builtin scenario {name!r}; known: {sorted(builtin_scenarios())}")
        return make_scenario(name, seed=seed)
    humans = []
    for h in spec.get("humans", []):
        limbs = None
        if "limbs" in h:
            limbs = [
                Limb(
                    rcs_fraction=l["rcs_fraction"],
                    velocity_amplitude_mps=l["velocity_amplitude_mps"],
                    gait_frequency_hz=l["gait_frequency_hz"],
                    phase_rad=l.get("phase_rad", 0.0),
                    offset_x_m=l.get("offset_x_m", 0.0),
                    offset_y_m=l.get("offset_y_m", 0.0),
                )
                for l in h["limbs"]
            ]
        humans.append(
            HumanTarget.from_path(
                [tuple(p) for p in h["path"]],
                h["speed_mps"],
                start_time_s=h.get("start_time_s", 0.0),
                torso_rcs=h.get("torso_rcs", 1.0),
                limbs=limbs,
            )
        )
    clutter = tuple(
        Scatterer(c["range_m"], c["azimuth_rad"], 0.0, c["amplitude"])
        for c in spec.get("clutter", [])
    )
    ghosts = tuple(
        None
        if g is None
        else GhostSpec(
            enabled=g.get("enabled", True),
            mirror_x_m=g.get("mirror_x_m", 3.0),
            attenuation_db=g.get("attenuation_db", 12.0),
        )
        for g in spec.get("ghosts", [])
    )
    duration = spec.get("duration_s")
    if duration is None:
        ends = [h.waypoints[-1][2] for h in humans]
        duration = (max(ends) + 0.3) if ends else 5.0
    return Scene(
        humans=tuple(humans), clutter=clutter, ghosts=ghosts, duration_s=duration, seed=seed
    )


def _pipeline_from_dict(spec: dict, params: RadarParams) -> PipelineConfig:
    cfar_spec = spec.get("cfar", {"kind": "OS"})
    cfar = CfarConfig(
        kind=cfar_spec["kind"],
        training_cells=cfar_spec.get("training_cells", 4),
        guard_cells=cfar_spec.get("guard_cells", 1),
        design_pfa=cfar_spec.get("design_pfa", 1e-3),
        os_rank_fraction=cfar_spec.get("os_rank_fraction", 0.75),
    )
    return default_pipeline_config(
        kind=spec["kind"],
        params=params,
        channel_subset=spec.get("channel_subset", 15),
        cfar=cfar,
        eps_m=spec.get("eps_m", 0.4),
        min_pts=spec.get("min_pts", 3),
        velocity_weight=spec.get("velocity_weight", 0.5),
        tracker_overrides=spec.get("tracker"),
    )


def parse_runspec_dict(raw: dict, seed_override: int | None = None,
                       out_override: str | None = None) -> RunSpec:
    """Validate and resolve an already-loaded spec dictionary."""
    validator = jsonschema.Draft202012Validator(RUNSPEC_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "(top level)"
        raise SpecError(f"spec field {path}: {e.message}")
    seed = seed_override if seed_override is not None else raw.get("seed", 0)
    out = out_override if out_override is not None else raw.get("output_dir", "runs/out")
    params = RadarParams(**raw.get("radar", {}))
    try:
        scene = _scene_from_dict(raw["scene"], seed)
    except (ValueError, KeyError) as exc:
        raise SpecError(f"scene: {exc}") from exc
    pipeline = _pipeline_from_dict(raw.get("pipeline", {"kind": "RA"}), params)
    roc = dict(raw.get("roc", {}))
    roc.setdefault("pipeline_kind", "RA")
    roc.setdefault("cfar_kinds", ["CA", "OS"])
    roc.setdefault("windows", [[4, 1]])
    roc.setdefault("design_pfas", [1e-4, 1e-3, 1e-2])
    roc.setdefault("channel_subset", 15)
    subsets = tuple(raw.get("ablation", {}).get("subsets", [15, 12, 8, 6, 4]))
    normalized = normalize_spec(raw, seed, out)
    return RunSpec(
        experiment=raw["experiment"],
        seed=seed,
        output_dir=out,
        params=params,
        scene=scene,
        pipeline=pipeline,
        roc_options=roc,
        ablation_subsets=subsets,
        normalized=normalized,
    )


def normalize_spec(raw: dict, seed: int, out: str) -> dict:
    norm = json.loads(json.dumps(raw))
    norm["seed"] = seed
    norm["output_dir"] = out
    return norm


def parse_runspec(path: str | Path, seed_override: int | None = None,
                  out_override: str | None = None) -> RunSpec:
    """Load, validate and resolve a spec file."""
    p = Path(path)
    if not p.is_file():
        raise SpecError(f"spec file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise SpecError(f"{p}: top level must be an object")
    return parse_runspec_dict(raw, seed_override, out_override)
