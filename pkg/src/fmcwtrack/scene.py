"""Synthetic indoor scenes and raw MIMO FMCW radar cube synthesis.

Coordinate convention: the radar sits at the origin, boresight along +y,
x to the right. Azimuth is measured from boresight, positive clockwise
(towards +x), so x = r*sin(az), y = r*cos(az).

Humans are modeled as extended targets: a torso point scatterer plus a few
limb scatterers whose radial velocities carry a sinusoidal gait modulation.
Optional multipath ghosts mirror a target across a vertical plane x = x0
with a fixed attenuation, standing in for wall/curtain reflections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

# Horizontal 3 dB beamwidth of the reference radar (76.5 deg), applied as a
# hard field-of-view clip on scatterer azimuths; no pattern weighting.
FOV_HALF_ANGLE_RAD = math.radians(76.5) / 2.0

# Sub-stream tags for per-frame seed derivation.
_NOISE_STREAM = 0x11CE


@dataclass(frozen=True)
class RadarParams:
    """FMCW/MIMO waveform and virtual array description.

    Defaults follow the 24 GHz reference radar: 250 MHz sweep, 56 ADC
    samples at 120 ksps, 90 chirps per frame at 483 us repetition, 15
    virtual channels spaced half a wavelength, 10 Hz frame rate.
    """

    carrier_freq_hz: float = 24e9
    bandwidth_hz: float = 250e6
    sweep_time_s: float = 467e-6
    chirp_repetition_interval_s: float = 483e-6
    chirps_per_frame: int = 90
    adc_samples: int = 56
    adc_rate_sps: float = 120e3
    n_virtual_channels: int = 15
    element_spacing_wavelengths: float = 0.5
    frame_rate_hz: float = 10.0
    # Raw per-sample noise power putting a unit-amplitude scatterer around
    # 20 dB above the processed map floor: strong but not sidelobe-dominated.
    noise_power: float = 10.0

    def __post_init__(self):
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier_freq_hz must be > 0")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.sweep_time_s <= 0:
            raise ValueError("sweep_time_s must be > 0")
        if self.chirp_repetition_interval_s < self.sweep_time_s:
            raise ValueError(
                "chirp_repetition_interval_s must be >= sweep_time_s"
            )
        if self.chirps_per_frame < 1:
            raise ValueError("chirps_per_frame must be >= 1")
        if self.adc_samples < 1:
            raise ValueError("adc_samples must be >= 1")
        if self.adc_samples > self.adc_rate_sps * self.sweep_time_s + 1e-9:
            raise ValueError("adc_samples must fit within adc_rate_sps * sweep_time_s")
        if self.n_virtual_channels < 1:
            raise ValueError("n_virtual_channels must be >= 1")
        if not (0.0 < self.element_spacing_wavelengths <= 0.5):
            raise ValueError("element_spacing_wavelengths must be in (0, 0.5]")
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be > 0")
        if self.noise_power < 0:
            raise ValueError("noise_power must be >= 0")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def chirp_slope_hz_per_s(self) -> float:
        return self.bandwidth_hz / self.sweep_time_s

    @property
    def frame_period_s(self) -> float:
        return 1.0 / self.frame_rate_hz

    @property
    def max_unambiguous_velocity_mps(self) -> float:
        return self.wavelength_m / (4.0 * self.chirp_repetition_interval_s)


@dataclass(frozen=True)
class Resolutions:
    """Range, velocity and boresight angular resolution of a parameter set."""

    range_res_m: float
    velocity_res_mps: float
    angle_res_rad_boresight: float


def resolutions(params: RadarParams) -> Resolutions:
    """Resolution triple for a waveform/array configuration.

    Range resolution is c/(2*BW). Velocity resolution uses the chirp
    repetition interval (the slow-time sampling period), not the sweep
    duration. Angular resolution at boresight is lambda/(N*d).
    """
    lam = params.wavelength_m
    dr = SPEED_OF_LIGHT / (2.0 * params.bandwidth_hz)
    dv = lam / (2.0 * params.chirps_per_frame * params.chirp_repetition_interval_s)
    d_m = params.element_spacing_wavelengths * lam
    dtheta = lam / (params.n_virtual_channels * d_m)
    return Resolutions(range_res_m=dr, velocity_res_mps=dv, angle_res_rad_boresight=dtheta)


@dataclass(frozen=True)
class Scatterer:
    """Point scatterer in polar radar coordinates."""

    range_m: float
    azimuth_rad: float
    radial_velocity_mps: float
    amplitude: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("range_m must be > 0")
        if abs(self.azimuth_rad) > FOV_HALF_ANGLE_RAD + 1e-12:
            raise ValueError("azimuth_rad outside the field of view")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")


@dataclass(frozen=True)
class Limb:
    """Gait-modulated secondary scatterer attached to a human torso."""

    rcs_fraction: float
    velocity_amplitude_mps: float
    gait_frequency_hz: float
    phase_rad: float
    offset_x_m: float = 0.0
    offset_y_m: float = 0.0

    def __post_init__(self):
        if self.rcs_fraction < 0:
            raise ValueError("rcs_fraction must be >= 0")
        if self.gait_frequency_hz < 0:
            raise ValueError("gait_frequency_hz must be >= 0")


def default_limbs() -> list[Limb]:
    """Two-arm/two-leg limb set producing a plausible Doppler spread."""
    return [
        Limb(0.25, 0.8, 2.0, 0.0, 0.10, 0.05),
        Limb(0.25, 0.8, 2.0, math.pi, -0.10, 0.05),
        Limb(0.15, 1.2, 2.0, math.pi / 2, 0.05, -0.12),
        Limb(0.15, 1.2, 2.0, 3 * math.pi / 2, -0.05, -0.12),
    ]


@dataclass(frozen=True)
class HumanTarget:
    """Walking person described by time-stamped waypoints.

    Position is piecewise-linear between waypoints (x_m, y_m, arrival_s);
    before the first and after the last waypoint the target stands still.
    """

    waypoints: tuple[tuple[float, float, float], ...]
    walking_speed_mps: float
    torso_rcs: float = 1.0
    limbs: tuple[Limb, ...] = ()

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("waypoints must not be empty")
        times = [w[2] for w in self.waypoints]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("waypoints must be strictly time-ordered")
        if self.torso_rcs < 0:
            raise ValueError("torso_rcs must be >= 0")

    @classmethod
    def from_path(
        cls,
        points: list[tuple[float, float]],
        speed_mps: float,
        start_time_s: float = 0.0,
        torso_rcs: float = 1.0,
        limbs: tuple[Limb, ...] | None = None,
    ) -> "HumanTarget":
        """Build a target walking the given polyline at constant speed."""
        if speed_mps <= 0:
            raise ValueError("speed_mps must be > 0")
        t = start_time_s
        wps = [(points[0][0], points[0][1], t)]
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            t += math.hypot(x1 - x0, y1 - y0) / speed_mps
            wps.append((x1, y1, t))
        return cls(
            waypoints=tuple(wps),
            walking_speed_mps=speed_mps,
            torso_rcs=torso_rcs,
            limbs=tuple(limbs) if limbs is not None else tuple(default_limbs()),
        )

    def position_velocity(self, t: float) -> tuple[float, float, float, float]:
        """(x, y, vx, vy) of the torso at time t."""
        wps = self.waypoints
        if t <= wps[0][2]:
            return wps[0][0], wps[0][1], 0.0, 0.0
        if t >= wps[-1][2]:
            return wps[-1][0], wps[-1][1], 0.0, 0.0
        for (x0, y0, t0), (x1, y1, t1) in zip(wps, wps[1:]):
            if t0 <= t < t1:
                frac = (t - t0) / (t1 - t0)
                vx = (x1 - x0) / (t1 - t0)
                vy = (y1 - y0) / (t1 - t0)
                return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0), vx, vy
        return wps[-1][0], wps[-1][1], 0.0, 0.0


@dataclass(frozen=True)
class GhostSpec:
    """Multipath ghost: target mirrored across the plane x = mirror_x_m."""

    enabled: bool = False
    mirror_x_m: float = 3.0
    attenuation_db: float = 12.0


@dataclass(frozen=True)
class Scene:
    """Scene description: humans, static clutter, ghosts, duration, seed."""

    humans: tuple[HumanTarget, ...] = ()
    clutter: tuple[Scatterer, ...] = ()
    ghosts: tuple[GhostSpec | None, ...] = ()
    duration_s: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.ghosts and len(self.ghosts) != len(self.humans):
            raise ValueError("ghosts must be empty or match humans in length")
        for cl in self.clutter:
            if cl.radial_velocity_mps != 0.0:
                raise ValueError("clutter scatterers must be static")

    def ghost_for(self, human_index: int) -> GhostSpec | None:
        if not self.ghosts:
            return None
        return self.ghosts[human_index]


@dataclass
class RadarCube:
    """Raw complex samples indexed [frame][chirp][channel][fast-time sample]."""

    samples: np.ndarray
    params: RadarParams
    frame_times_s: np.ndarray

    def __post_init__(self):
        p = self.params
        expected = (len(self.frame_times_s), p.chirps_per_frame, p.n_virtual_channels, p.adc_samples)
        if self.samples.shape != expected:
            raise ValueError(f"cube shape {self.samples.shape} != expected {expected}")

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]


def n_frames(scene: Scene, params: RadarParams) -> int:
    return int(math.floor(scene.duration_s * params.frame_rate_hz))


def frame_time(params: RadarParams, frame_index: int) -> float:
    return frame_index / params.frame_rate_hz


def _polar(x: float, y: float) -> tuple[float, float]:
    return math.hypot(x, y), math.atan2(x, y)


def _radial_velocity(x: float, y: float, vx: float, vy: float) -> float:
    r = math.hypot(x, y)
    if r == 0.0:
        return 0.0
    return (x * vx + y * vy) / r


def _human_scatterers(human: HumanTarget, ghost: GhostSpec | None, t: float) -> list[Scatterer]:
    out: list[Scatterer] = []
    mirrors = [False] + ([True] if ghost is not None and ghost.enabled else [])
    x, y, vx, vy = human.position_velocity(t)
    for mirrored in mirrors:
        if mirrored:
            cx, cy = 2.0 * ghost.mirror_x_m - x, y
            cvx, cvy = -vx, vy
            gain = 10.0 ** (-ghost.attenuation_db / 20.0)
        else:
            cx, cy, cvx, cvy = x, y, vx, vy
            gain = 1.0
        torso_vr = _radial_velocity(cx, cy, cvx, cvy)
        r0, az0 = _polar(cx, cy)
        candidates = [(r0, az0, torso_vr, gain * math.sqrt(human.torso_rcs))]
        for limb in human.limbs:
            lx, ly = cx + limb.offset_x_m, cy + limb.offset_y_m
            r, az = _polar(lx, ly)
            vr = torso_vr + limb.velocity_amplitude_mps * math.sin(
                2.0 * math.pi * limb.gait_frequency_hz * t + limb.phase_rad
            )
            candidates.append((r, az, vr, gain * math.sqrt(human.torso_rcs * limb.rcs_fraction)))
        for r, az, vr, amp in candidates:
            if r > 0.0 and abs(az) <= FOV_HALF_ANGLE_RAD:
                out.append(Scatterer(r, az, vr, amp))
    return out


def scatterers_at(scene: Scene, t: float) -> list[Scatterer]:
    """All point scatterers (humans, ghosts, clutter) present at time t.

    Scatterers outside the field of view are dropped (hard clip).
    """
    if not (0.0 <= t <= scene.duration_s):
        raise ValueError(f"t={t} outside scene duration [0, {scene.duration_s}]")
    out: list[Scatterer] = []
    for i, human in enumerate(scene.humans):
        out.extend(_human_scatterers(human, scene.ghost_for(i), t))
    for cl in scene.clutter:
        if abs(cl.azimuth_rad) <= FOV_HALF_ANGLE_RAD:
            out.append(cl)
    return out


def _frame_rng(scene_seed: int, frame_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([scene_seed, _NOISE_STREAM, frame_index]))


def synthesize_frame(scene: Scene, params: RadarParams, frame_index: int) -> np.ndarray:
    """One raw frame [chirp][channel][sample] of the de-chirped beat signal.

    Each scatterer contributes A*exp(j*2pi*(f_b*k/f_s + f_D*m*T_r +
    n*(d/lambda)*sin(az))) with beat frequency f_b = 2*mu*r/c and Doppler
    f_D = 2*v_r/lambda; contributions are summed and complex circular
    Gaussian noise of the configured power is added. Deterministic given
    (scene, params, frame_index).
    """
    nf = n_frames(scene, params)
    if not (0 <= frame_index < nf):
        raise ValueError(f"frame_index {frame_index} outside [0, {nf})")
    t = frame_time(params, frame_index)
    m = np.arange(params.chirps_per_frame)
    n = np.arange(params.n_virtual_channels)
    k = np.arange(params.adc_samples)
    lam = params.wavelength_m
    mu = params.chirp_slope_hz_per_s
    frame = np.zeros(
        (params.chirps_per_frame, params.n_virtual_channels, params.adc_samples),
        dtype=np.complex128,
    )
    for sc in scatterers_at(scene, t):
        f_b = 2.0 * mu * sc.range_m / SPEED_OF_LIGHT
        f_d = 2.0 * sc.radial_velocity_mps / lam
        ph_chirp = np.exp(2j * np.pi * f_d * params.chirp_repetition_interval_s * m)
        ph_chan = np.exp(
            2j * np.pi * params.element_spacing_wavelengths * math.sin(sc.azimuth_rad) * n
        )
        ph_fast = np.exp(2j * np.pi * f_b / params.adc_rate_sps * k)
        frame += sc.amplitude * (
            ph_chirp[:, None, None] * ph_chan[None, :, None] * ph_fast[None, None, :]
        )
    if params.noise_power > 0.0:
        rng = _frame_rng(scene.seed, frame_index)
        sigma = math.sqrt(params.noise_power / 2.0)
        noise = rng.standard_normal(frame.shape) + 1j * rng.standard_normal(frame.shape)
        frame += sigma * noise
    return frame


def synthesize_cube(scene: Scene, params: RadarParams) -> RadarCube:
    """Full radar cube for the scene, frame by frame."""
    nf = n_frames(scene, params)
    if nf < 1:
        raise ValueError("scene duration too short for a single frame")
    frames = np.stack([synthesize_frame(scene, params, i) for i in range(nf)])
    times = np.array([frame_time(params, i) for i in range(nf)])
    return RadarCube(samples=frames, params=params, frame_times_s=times)


def ground_truth(scene: Scene, params: RadarParams) -> list[list[tuple[int, float, float, float]]]:
    """Per-frame truth rows (target id, x, y, radial velocity) for the torsos."""
    out = []
    for i in range(n_frames(scene, params)):
        t = frame_time(params, i)
        rows = []
        for tid, human in enumerate(scene.humans):
            x, y, vx, vy = human.position_velocity(t)
            rows.append((tid, x, y, _radial_velocity(x, y, vx, vy)))
        out.append(rows)
    return out
