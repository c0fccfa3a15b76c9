"""Multi-target tracking: EKF with polar measurements, JPDA association,
and history-based track management.

State is Cartesian constant-velocity (x, y, vx, vy); measurements are the
polar triplets (r, theta, rdot) produced by the detection pipelines. Data
association computes, per track, the marginal probability of each gated
measurement (plus the missed-detection hypothesis) by exact enumeration of
joint assignment events; a nearest-neighbour fallback guards against event
blow-up. Tracks are confirmed by an M-of-N hit rule and deleted after K
consecutive misses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SINGULAR_RANGE_M = 0.01  # below this the polar model is degenerate

# Probability that a track was detected this frame must reach this level
# for the frame to count as a hit in the M-of-N history.
HIT_PROBABILITY = 0.5


@dataclass(frozen=True)
class TrackerConfig:
    """Noise, gating, association and track-management parameters.

    Defaults assume the reference waveform at 10 Hz: measurement noise is
    half a resolution cell per component, the gate is the 99% chi-square
    for 3 degrees of freedom, confirmation is 3-of-5 and deletion after 5
    consecutive misses. clutter_density 0 selects a unit clutter prior
    (unassigned measurements carry no density penalty in the association).
    """

    process_noise_intensity: float = 1.0
    sigma_r_m: float = 0.3
    sigma_theta_rad: float = 0.0667
    sigma_rdot_mps: float = 0.072
    gate_chi2: float = 11.345
    detection_probability: float = 0.9
    clutter_density: float = 0.0
    confirm_m: int = 3
    confirm_n: int = 5
    delete_after_misses: int = 5
    frame_period_s: float = 0.1
    max_joint_events: int = 1_000_000
    init_pos_var_inflation: float = 4.0
    init_tangential_vel_std: float = 1.5

    def __post_init__(self):
        positives = (
            "process_noise_intensity", "sigma_r_m", "sigma_theta_rad",
            "sigma_rdot_mps", "gate_chi2", "frame_period_s",
        )
        for name in positives:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not (0.0 < self.detection_probability < 1.0):
            raise ValueError("detection_probability must be in (0, 1)")
        if self.clutter_density < 0:
            raise ValueError("clutter_density must be >= 0")
        if not (1 <= self.confirm_m <= self.confirm_n):
            raise ValueError("confirm rule requires 1 <= M <= N")
        if self.delete_after_misses < 1:
            raise ValueError("delete_after_misses must be >= 1")

    @property
    def measurement_covariance(self) -> np.ndarray:
        return np.diag(
            [self.sigma_r_m**2, self.sigma_theta_rad**2, self.sigma_rdot_mps**2]
        )


@dataclass(frozen=True)
class Measurement:
    """Polar measurement (r, theta, rdot) from one cluster centroid."""

    r_m: float
    theta_rad: float
    rdot_mps: float
    power: float = 0.0

    def __post_init__(self):
        if self.r_m <= 0:
            raise ValueError("r_m must be > 0")

    @classmethod
    def from_cartesian(cls, x: float, y: float, vr: float, power: float = 0.0) -> "Measurement":
        return cls(math.hypot(x, y), math.atan2(x, y), vr, power)

    def as_vector(self) -> np.ndarray:
        return np.array([self.r_m, self.theta_rad, self.rdot_mps])


TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DELETED = "deleted"


@dataclass
class TrackState:
    """EKF state, covariance, identity and confirmation history."""

    track_id: int
    state: np.ndarray
    covariance: np.ndarray
    status: str = TENTATIVE
    hit_history: list[bool] = field(default_factory=list)
    consecutive_misses: int = 0
    last_update_frame: int = -1
    gated_count: int = 0
    miss_probability: float = 1.0

    @property
    def position(self) -> np.ndarray:
        return self.state[:2].copy()

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:].copy()


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    if w == -math.pi:
        return math.pi
    return w


def transition_matrix(dt: float) -> np.ndarray:
    f = np.eye(4)
    f[0, 2] = dt
    f[1, 3] = dt
    return f


def process_noise(q: float, dt: float) -> np.ndarray:
    """Continuous white-noise-acceleration discretization.

    Exactly composable: two half-interval predicts equal one full predict.
    """
    a = q * dt**3 / 3.0
    b = q * dt**2 / 2.0
    c = q * dt
    return np.array(
        [
            [a, 0.0, b, 0.0],
            [0.0, a, 0.0, b],
            [b, 0.0, c, 0.0],
            [0.0, b, 0.0, c],
        ]
    )


def predict(track: TrackState, dt: float, q: float) -> None:
    """Constant-velocity predict in place."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    f = transition_matrix(dt)
    track.state = f @ track.state
    track.covariance = f @ track.covariance @ f.T + process_noise(q, dt)


def measure_h(state: np.ndarray) -> np.ndarray:
    """Predicted (r, theta, rdot) of a state vector."""
    x, y, vx, vy = state
    r = math.hypot(x, y)
    if r <= SINGULAR_RANGE_M:
        raise ValueError("range below singular-geometry threshold")
    return np.array([r, math.atan2(x, y), (x * vx + y * vy) / r])


def measure_jacobian(state: np.ndarray) -> np.ndarray:
    """Exact 3x4 Jacobian of measure_h."""
    x, y, vx, vy = state
    r2 = x * x + y * y
    r = math.sqrt(r2)
    if r <= SINGULAR_RANGE_M:
        raise ValueError("range below singular-geometry threshold")
    r3 = r2 * r
    return np.array(
        [
            [x / r, y / r, 0.0, 0.0],
            [y / r2, -x / r2, 0.0, 0.0],
            [y * (y * vx - x * vy) / r3, x * (x * vy - y * vx) / r3, x / r, y / r],
        ]
    )


def innovation(track: TrackState, meas: Measurement) -> np.ndarray:
    nu = meas.as_vector() - measure_h(track.state)
    nu[1] = wrap_angle(nu[1])
    return nu


def innovation_covariance(track: TrackState, cfg: TrackerConfig) -> np.ndarray:
    h = measure_jacobian(track.state)
    return h @ track.covariance @ h.T + cfg.measurement_covariance


def gate(
    track: TrackState, meas: Measurement, cfg: TrackerConfig
) -> tuple[bool, float]:
    """(in_gate, squared Mahalanobis distance) for one track/measurement pair.

    Degenerate geometry (range near zero) or a non-invertible innovation
    covariance exclude the pair rather than raising.
    """
    try:
        nu = innovation(track, meas)
        s = innovation_covariance(track, cfg)
        d2 = float(nu @ np.linalg.solve(s, nu))
    except (ValueError, np.linalg.LinAlgError):
        return False, math.inf
    if d2 < 0:
        return False, math.inf
    return d2 <= cfg.gate_chi2, d2


def _gaussian_likelihood(nu: np.ndarray, s: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        return 0.0
    quad = float(nu @ np.linalg.solve(s, nu))
    return math.exp(-0.5 * quad - 0.5 * logdet - 1.5 * math.log(2.0 * math.pi))


def jpda_associate(
    tracks: list[TrackState],
    measurements: list[Measurement],
    cfg: TrackerConfig,
) -> np.ndarray:
    """Marginal association probabilities, shape (n_tracks, n_meas + 1).

    Column 0 is the missed-detection probability; column i+1 the probability
    that measurement i originated from the track. Rows sum to 1. Joint
    events assign each measurement to at most one track and each track to at
    most one measurement; an event's weight is the product of its assigned
    Gaussian likelihoods times Pd per detection, (1-Pd) per miss, and the
    clutter density per unassigned measurement (unit prior when the density
    is configured as 0). If the joint event count would exceed the
    configured cap the association degrades to greedy nearest-neighbour.
    """
    nt, nm = len(tracks), len(measurements)
    beta = np.zeros((nt, nm + 1))
    if nt == 0:
        return beta
    if nm == 0:
        beta[:, 0] = 1.0
        return beta

    pd = cfg.detection_probability
    clutter = cfg.clutter_density if cfg.clutter_density > 0 else 1.0

    likes = np.zeros((nt, nm))
    for j, trk in enumerate(tracks):
        try:
            s = innovation_covariance(trk, cfg)
        except ValueError:
            continue
        for i, meas in enumerate(measurements):
            ok, _ = gate(trk, meas, cfg)
            if ok:
                likes[j, i] = _gaussian_likelihood(innovation(trk, meas), s)

    gated = [np.flatnonzero(likes[j] > 0) for j in range(nt)]
    bound = 1.0
    for g in gated:
        bound *= 1 + len(g)
    if bound > cfg.max_joint_events:
        log.warning(
            "JPDA event bound %.3g exceeds cap %d; using nearest-neighbour fallback",
            bound, cfg.max_joint_events,
        )
        return _nearest_neighbor_beta(tracks, measurements, cfg)

    # Depth-first enumeration over tracks, marginalizing event weights.
    total = 0.0
    marginals = np.zeros((nt, nm + 1))
    assignment = np.full(nt, -1)

    def recurse(j: int, used: int, weight: float) -> None:
        nonlocal total
        if j == nt:
            n_assigned = int(np.count_nonzero(assignment >= 0))
            w = weight * clutter ** (nm - n_assigned)
            total += w
            for jj in range(nt):
                col = assignment[jj] + 1
                marginals[jj, col] += w
            return
        recurse(j + 1, used, weight * (1.0 - pd))
        for i in gated[j]:
            if used & (1 << i):
                continue
            assignment[j] = i
            recurse(j + 1, used | (1 << i), weight * pd * likes[j, i])
            assignment[j] = -1

    recurse(0, 0, 1.0)
    if total <= 0:
        beta[:, 0] = 1.0
        return beta
    return marginals / total


def _nearest_neighbor_beta(
    tracks: list[TrackState], measurements: list[Measurement], cfg: TrackerConfig
) -> np.ndarray:
    nt, nm = len(tracks), len(measurements)
    beta = np.zeros((nt, nm + 1))
    pairs = []
    for j, trk in enumerate(tracks):
        for i, meas in enumerate(measurements):
            ok, d2 = gate(trk, meas, cfg)
            if ok:
                pairs.append((d2, j, i))
    pairs.sort()
    used_t: set[int] = set()
    used_m: set[int] = set()
    for _, j, i in pairs:
        if j in used_t or i in used_m:
            continue
        beta[j, i + 1] = 1.0
        used_t.add(j)
        used_m.add(i)
    for j in range(nt):
        if j not in used_t:
            beta[j, 0] = 1.0
    return beta


def update(
    track: TrackState,
    measurements: list[Measurement],
    beta_row: np.ndarray,
    cfg: TrackerConfig,
) -> None:
    """Probability-weighted EKF update in place.

    beta_row[0] is the missed-detection probability; the covariance blends
    the predicted and updated covariances and adds the spread-of-innovations
    term. beta_row must sum to 1.
    """
    if abs(float(np.sum(beta_row)) - 1.0) > 1e-9:
        raise ValueError("association probabilities must sum to 1")
    beta0 = float(beta_row[0])
    track.miss_probability = beta0
    if beta0 >= 1.0 - 1e-15:
        return
    h = measure_jacobian(track.state)
    s = innovation_covariance(track, cfg)
    k = np.linalg.solve(s, h @ track.covariance).T
    nu_c = np.zeros(3)
    spread = np.zeros((3, 3))
    for i, meas in enumerate(measurements):
        b = float(beta_row[i + 1])
        if b <= 0.0:
            continue
        nu = innovation(track, meas)
        nu_c += b * nu
        spread += b * np.outer(nu, nu)
    spread -= np.outer(nu_c, nu_c)
    p_updated = track.covariance - k @ s @ k.T
    p = beta0 * track.covariance + (1.0 - beta0) * p_updated + k @ spread @ k.T
    track.state = track.state + k @ nu_c
    track.covariance = 0.5 * (p + p.T)


def initial_track_state(meas: Measurement, cfg: TrackerConfig) -> tuple[np.ndarray, np.ndarray]:
    """State/covariance for a new tentative track from one measurement.

    Velocity is the radial rate along the line of sight with zero tangential
    component; the tangential velocity variance is large to admit crossing
    targets, and the position variance is inflated.
    """
    sin_t, cos_t = math.sin(meas.theta_rad), math.cos(meas.theta_rad)
    u = np.array([sin_t, cos_t])  # radial unit vector
    tang = np.array([cos_t, -sin_t])
    state = np.array(
        [meas.r_m * sin_t, meas.r_m * cos_t, meas.rdot_mps * sin_t, meas.rdot_mps * cos_t]
    )
    pos_cov = cfg.init_pos_var_inflation * (
        cfg.sigma_r_m**2 * np.outer(u, u)
        + (meas.r_m * cfg.sigma_theta_rad) ** 2 * np.outer(tang, tang)
    )
    vel_cov = cfg.sigma_rdot_mps**2 * np.outer(u, u) + (
        cfg.init_tangential_vel_std**2
    ) * np.outer(tang, tang)
    cov = np.zeros((4, 4))
    cov[:2, :2] = pos_cov
    cov[2:, 2:] = vel_cov
    return state, cov


@dataclass
class TrackSnapshot:
    frame: int
    track_id: int
    status: str
    x_m: float
    y_m: float
    vx_mps: float
    vy_mps: float
    gated_count: int = 0
    miss_probability: float = 1.0


class Tracker:
    """Sequential multi-target tracker; one instance per experiment run."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.tracks: list[TrackState] = []
        self._next_id = 0
        self._frame = -1

    def _spawn(self, meas: Measurement, frame: int) -> TrackState:
        state, cov = initial_track_state(meas, self.cfg)
        trk = TrackState(
            track_id=self._next_id,
            state=state,
            covariance=cov,
            hit_history=[True],
            last_update_frame=frame,
        )
        self._next_id += 1
        return trk

    def _record(self, trk: TrackState, hit: bool, frame: int) -> None:
        trk.hit_history.append(hit)
        if len(trk.hit_history) > self.cfg.confirm_n:
            trk.hit_history = trk.hit_history[-self.cfg.confirm_n :]
        if hit:
            trk.consecutive_misses = 0
            trk.last_update_frame = frame
        else:
            trk.consecutive_misses += 1
        if trk.status == TENTATIVE and sum(trk.hit_history) >= self.cfg.confirm_m:
            trk.status = CONFIRMED
        if trk.consecutive_misses >= self.cfg.delete_after_misses:
            trk.status = DELETED

    def manage_tracks(self, unassociated: list[Measurement], frame: int) -> None:
        """Spawn tentative tracks and apply confirm/delete rules."""
        for meas in unassociated:
            self.tracks.append(self._spawn(meas, frame))
        self.tracks = [t for t in self.tracks if t.status != DELETED]

    def step(self, measurements: list[Measurement]) -> list[TrackSnapshot]:
        """Predict, gate, associate, update and manage one frame.

        Returns snapshots of all live tracks after the frame (confirmed and
        tentative; consumers filter by status).
        """
        self._frame += 1
        frame = self._frame
        cfg = self.cfg
        for trk in self.tracks:
            predict(trk, cfg.frame_period_s, cfg.process_noise_intensity)

        gated_any = np.zeros(len(measurements), dtype=bool)
        for trk in self.tracks:
            trk.gated_count = 0
            for i, meas in enumerate(measurements):
                ok, _ = gate(trk, meas, cfg)
                if ok:
                    trk.gated_count += 1
                    gated_any[i] = True

        beta = jpda_associate(self.tracks, measurements, cfg)
        for j, trk in enumerate(self.tracks):
            update(trk, measurements, beta[j], cfg)
            self._record(trk, 1.0 - beta[j, 0] >= HIT_PROBABILITY, frame)

        unassociated = [m for i, m in enumerate(measurements) if not gated_any[i]]
        self.manage_tracks(unassociated, frame)
        return [
            TrackSnapshot(
                frame=frame,
                track_id=t.track_id,
                status=t.status,
                x_m=float(t.state[0]),
                y_m=float(t.state[1]),
                vx_mps=float(t.state[2]),
                vy_mps=float(t.state[3]),
                gated_count=t.gated_count,
                miss_probability=t.miss_probability,
            )
            for t in self.tracks
        ]
