"""Radar cube pre-processing: range/Doppler/angle FFTs, clutter filtering,
and the RA / RD power maps the detectors run on.

All FFTs use orthonormal scaling so every stage preserves total power
(Parseval) exactly with rectangular windows. Static clutter is removed by
subtracting the per-chirp mean over each frame (zero-Doppler suppression),
applied before the slow-time window so constant returns are annihilated
exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from fmcwtrack.scene import RadarParams, resolutions

ANGLE_FFT_BINS = 64


def _window(kind: str, n: int) -> np.ndarray:
    if kind == "hann":
        return np.hanning(n)
    if kind == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window kind {kind!r}")


@dataclass(frozen=True)
class MapGrid:
    """2D power map with axis metadata.

    kind "RA": magnitudes[range bin, azimuth bin], axis1 in radians.
    kind "RD": magnitudes[range bin, Doppler bin], axis1 in m/s.
    """

    kind: str
    magnitudes: np.ndarray
    axis0: np.ndarray
    axis1: np.ndarray
    frame_index: int

    def __post_init__(self):
        if self.kind not in ("RA", "RD"):
            raise ValueError("kind must be 'RA' or 'RD'")
        if self.magnitudes.shape != (len(self.axis0), len(self.axis1)):
            raise ValueError("magnitude shape does not match axes")
        if np.any(self.magnitudes < 0) or not np.all(np.isfinite(self.magnitudes)):
            raise ValueError("magnitudes must be finite and >= 0")
        if np.any(np.diff(self.axis0) <= 0) or np.any(np.diff(self.axis1) <= 0):
            raise ValueError("axes must be strictly increasing")


@dataclass
class ProcessedFrame:
    """Post-FFT frame: complex cube [Doppler][channel][range] plus maps."""

    cube: np.ndarray
    ra_map: MapGrid
    rd_map: MapGrid
    channel_subset: int
    frame_index: int
    params: RadarParams

    def cube_checksum(self) -> str:
        """Digest of the shared pre-processing output (pipeline-independent)."""
        return hashlib.sha256(np.ascontiguousarray(self.cube).tobytes()).hexdigest()


def range_axis_m(params: RadarParams) -> np.ndarray:
    """Range of FFT bin k: k*(f_s/N_s)*c*T_c/(2*BW)."""
    k = np.arange(params.adc_samples)
    hz_per_bin = params.adc_rate_sps / params.adc_samples
    m_per_hz = SPEED_OF_LIGHT * params.sweep_time_s / (2.0 * params.bandwidth_hz)
    return k * hz_per_bin * m_per_hz


def velocity_axis_mps(params: RadarParams) -> np.ndarray:
    """Velocity of each (fft-shifted) Doppler bin; 0 at index N_c//2."""
    dv = resolutions(params).velocity_res_mps
    nc = params.chirps_per_frame
    return (np.arange(nc) - nc // 2) * dv


def zero_doppler_bin(params: RadarParams) -> int:
    return params.chirps_per_frame // 2


def angle_axis_rad(params: RadarParams, n_fft: int = ANGLE_FFT_BINS) -> np.ndarray:
    """Azimuths of the angle-FFT bins that satisfy |sin(az)| <= 1."""
    u = np.arange(n_fft) - n_fft // 2
    sin_az = u / (n_fft * params.element_spacing_wavelengths)
    valid = np.abs(sin_az) <= 1.0
    return np.arcsin(sin_az[valid])


def _angle_bin_mask(params: RadarParams, n_fft: int = ANGLE_FFT_BINS) -> np.ndarray:
    u = np.arange(n_fft) - n_fft // 2
    return np.abs(u / (n_fft * params.element_spacing_wavelengths)) <= 1.0


def range_fft(frame: np.ndarray, params: RadarParams, window: str = "hann") -> np.ndarray:
    """Fast-time FFT: [chirp][channel][sample] -> [chirp][channel][range bin]."""
    if params.adc_samples < 8:
        raise ValueError("adc_samples must be >= 8 for range processing")
    w = _window(window, frame.shape[-1])
    return np.fft.fft(frame * w, axis=-1, norm="ortho")


def mti_filter(profiles: np.ndarray) -> np.ndarray:
    """Subtract the per-frame mean over chirps for each (channel, range bin).

    Annihilates static (zero-Doppler) returns exactly; moving returns lose
    only their DC projection.
    """
    if profiles.shape[0] < 2:
        raise ValueError("need at least 2 chirps for clutter filtering")
    return profiles - profiles.mean(axis=0, keepdims=True)


def doppler_fft(profiles: np.ndarray, window: str = "hann") -> np.ndarray:
    """Slow-time FFT: [chirp][channel][range] -> [Doppler][channel][range].

    FFT-shifted so velocity 0 sits at the center bin.
    """
    w = _window(window, profiles.shape[0])
    spec = np.fft.fft(profiles * w[:, None, None], axis=0, norm="ortho")
    return np.fft.fftshift(spec, axes=0)


def angle_spectrum(
    snapshot: np.ndarray,
    params: RadarParams,
    channel_subset: int,
    n_fft: int = ANGLE_FFT_BINS,
) -> np.ndarray:
    """Power vs azimuth for one channel snapshot (zero-padded FFT beamformer).

    Accepts a vector over channels or any array whose last axis is channels;
    returns power over the azimuth bins of angle_axis_rad, ascending.
    """
    if channel_subset < 2:
        raise ValueError("channel_subset must be >= 2")
    sub = np.asarray(snapshot)[..., :channel_subset]
    spec = np.fft.fft(sub, n=n_fft, axis=-1, norm="ortho")
    spec = np.fft.fftshift(spec, axes=-1)
    power = np.abs(spec) ** 2
    return power[..., _angle_bin_mask(params, n_fft)]


def process_frame(
    frame: np.ndarray,
    params: RadarParams,
    channel_subset: int | None = None,
    frame_index: int = 0,
    window: str = "hann",
) -> ProcessedFrame:
    """Full pre-processing of one raw frame: both maps plus the RDA cube."""
    subset = params.n_virtual_channels if channel_subset is None else channel_subset
    if not (2 <= subset <= params.n_virtual_channels):
        raise ValueError("channel subset must be in [2, n_virtual_channels]")
    profiles = range_fft(frame, params, window=window)
    filtered = mti_filter(profiles)
    cube = doppler_fft(filtered, window=window)
    ra = _ra_map_from_cube(cube, params, subset, frame_index)
    rd = _rd_map_from_cube(cube, params, subset, frame_index)
    return ProcessedFrame(
        cube=cube,
        ra_map=ra,
        rd_map=rd,
        channel_subset=subset,
        frame_index=frame_index,
        params=params,
    )


def _ra_map_from_cube(
    cube: np.ndarray, params: RadarParams, subset: int, frame_index: int
) -> MapGrid:
    # Angle spectrum of every (Doppler, range) snapshot, power integrated
    # noncoherently over Doppler with the zero-Doppler bin excluded.
    snapshots = np.moveaxis(cube, 1, -1)  # [Doppler][range][channel]
    power = angle_spectrum(snapshots, params, subset)  # [Doppler][range][azimuth]
    keep = np.arange(cube.shape[0]) != zero_doppler_bin(params)
    ra = power[keep].sum(axis=0)  # [range][azimuth]
    return MapGrid(
        kind="RA",
        magnitudes=ra,
        axis0=range_axis_m(params),
        axis1=angle_axis_rad(params),
        frame_index=frame_index,
    )


def _rd_map_from_cube(
    cube: np.ndarray, params: RadarParams, subset: int, frame_index: int
) -> MapGrid:
    rd = (np.abs(cube[:, :subset, :]) ** 2).mean(axis=1)  # [Doppler][range]
    return MapGrid(
        kind="RD",
        magnitudes=rd.T,
        axis0=range_axis_m(params),
        axis1=velocity_axis_mps(params),
        frame_index=frame_index,
    )


def make_ra_map(
    frame: np.ndarray,
    params: RadarParams,
    channel_subset: int | None = None,
    frame_index: int = 0,
) -> MapGrid:
    return process_frame(frame, params, channel_subset, frame_index).ra_map


def make_rd_map(
    frame: np.ndarray,
    params: RadarParams,
    channel_subset: int | None = None,
    frame_index: int = 0,
) -> MapGrid:
    return process_frame(frame, params, channel_subset, frame_index).rd_map


def drop_zero_doppler(grid: MapGrid, params: RadarParams) -> tuple[MapGrid, np.ndarray]:
    """RD map without the zero-Doppler column (post-clutter-filter residue).

    Returns the reduced map and the original column indices of its columns.
    """
    if grid.kind != "RD":
        raise ValueError("only RD maps carry a zero-Doppler column")
    keep = np.arange(grid.magnitudes.shape[1]) != zero_doppler_bin(params)
    reduced = MapGrid(
        kind="RD",
        magnitudes=grid.magnitudes[:, keep],
        axis0=grid.axis0,
        axis1=grid.axis1[keep],
        frame_index=grid.frame_index,
    )
    return reduced, np.flatnonzero(keep)


def doppler_at(processed: ProcessedFrame, range_bin: int, azimuth_rad: float) -> float:
    """Radial velocity of the strongest non-zero Doppler bin at (range, az).

    Beamforms each Doppler bin's channel snapshot towards the given azimuth
    and returns the velocity of the argmax bin (zero-Doppler excluded).
    """
    params = processed.params
    sub = processed.cube[:, : processed.channel_subset, range_bin]
    n = np.arange(processed.channel_subset)
    steer = np.exp(
        -2j * np.pi * params.element_spacing_wavelengths * math.sin(azimuth_rad) * n
    )
    power = np.abs(sub @ steer) ** 2
    power[zero_doppler_bin(params)] = -np.inf
    return float(velocity_axis_mps(params)[int(np.argmax(power))])


def angle_at(processed: ProcessedFrame, range_bin: int, doppler_bin: int) -> float:
    """Azimuth of the angle-spectrum peak at one (range, Doppler) cell."""
    snapshot = processed.cube[doppler_bin, : processed.channel_subset, range_bin]
    power = angle_spectrum(snapshot, processed.params, processed.channel_subset)
    return float(angle_axis_rad(processed.params)[int(np.argmax(power))])
