"""2D constant-false-alarm-rate detectors over power maps.

Five detector kinds share one sliding-window geometry: a rectangular
training ring around the cell under test, isolated by a guard block.

  CA    mean of the ring
  GO    greatest of the four side-band means (top/bottom/left/right)
  SO    smallest of those four means
  OS    k-th order statistic of the ring cells
  OSCA  cell averaging along each window row, order statistic across
        the row averages (fast 2D hybrid)

Threshold factors assume a square-law (exponential) background. CA and OS
have exact closed forms; GO, SO and OSCA are calibrated by Monte-Carlo on
synthetic exponential noise against the design false-alarm probability.
Cells near the map border use the truncated ring with the factor re-derived
for the truncated geometry, so detections at minimum range remain possible.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

CFAR_KINDS = ("CA", "GO", "SO", "OS", "OSCA")

_MC_DRAWS_INTERIOR = 200_000
_MC_DRAWS_EDGE = 60_000


class CalibrationError(RuntimeError):
    """Threshold calibration failed to converge; never silently ignored."""


@dataclass(frozen=True)
class CfarConfig:
    """Detector kind plus window geometry and design false-alarm rate.

    training_cells / guard_cells are per side and per axis: (axis0, axis1).
    An int applies to both axes.
    """

    kind: str
    training_cells: tuple[int, int] = (4, 4)
    guard_cells: tuple[int, int] = (1, 1)
    design_pfa: float = 1e-3
    os_rank_fraction: float = 0.75

    def __post_init__(self):
        if self.kind not in CFAR_KINDS:
            raise ValueError(f"kind must be one of {CFAR_KINDS}")
        tc = _as_pair(self.training_cells)
        gc = _as_pair(self.guard_cells)
        object.__setattr__(self, "training_cells", tc)
        object.__setattr__(self, "guard_cells", gc)
        if min(tc) < 1:
            raise ValueError("training_cells must be >= 1 per axis")
        if min(gc) < 0:
            raise ValueError("guard_cells must be >= 0")
        if not (0.0 < self.design_pfa < 1.0):
            raise ValueError("design_pfa must be in (0, 1)")
        if not (0.0 < self.os_rank_fraction < 1.0):
            raise ValueError("os_rank_fraction must be in (0, 1)")

    @property
    def half_extents(self) -> tuple[int, int]:
        return (
            self.training_cells[0] + self.guard_cells[0],
            self.training_cells[1] + self.guard_cells[1],
        )

    @property
    def interior_ring_cells(self) -> int:
        h0, h1 = self.half_extents
        g0, g1 = self.guard_cells
        return (2 * h0 + 1) * (2 * h1 + 1) - (2 * g0 + 1) * (2 * g1 + 1)


def _as_pair(v) -> tuple[int, int]:
    if isinstance(v, (int, np.integer)):
        return (int(v), int(v))
    a, b = v
    return (int(a), int(b))


@dataclass
class DetectionMask:
    """Binary detection image aligned to a map, plus the detected cells."""

    mask: np.ndarray
    cells: list[tuple[int, int, float]]

    @classmethod
    def from_mask(cls, mask: np.ndarray, values: np.ndarray) -> "DetectionMask":
        rows, cols = np.nonzero(mask)
        cells = [(int(r), int(c), float(values[r, c])) for r, c in zip(rows, cols)]
        return cls(mask=mask, cells=cells)


# ---------------------------------------------------------------------------
# Calibration cache: alpha per (kind, geometry signature, pfa). Monte-Carlo
# statistic samples are cached per (kind, signature) and reused across pfa
# values, which also makes alpha monotone in pfa for a fixed geometry.
# ---------------------------------------------------------------------------

_cache_lock = threading.Lock()
_alpha_cache: dict[tuple, float] = {}
_sample_cache: dict[tuple, np.ndarray] = {}


def _sig_rng(kind: str, sig: tuple) -> np.random.Generator:
    digest = hashlib.sha256(repr((kind, sig)).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def alpha_ca(n: int | np.ndarray, pfa: float):
    """Exact CA-CFAR factor for exponential background: N*(Pfa^(-1/N)-1)."""
    n = np.asarray(n, dtype=float)
    return n * (pfa ** (-1.0 / n) - 1.0)


def _os_pfa(alpha: float, n: int, k: int) -> float:
    # P(cut > alpha * x_(k)) for the k-th smallest of n unit exponentials.
    i = np.arange(k)
    return float(np.exp(np.sum(np.log(n - i) - np.log(n - i + alpha))))


def _bisect_decreasing(f, target: float, lo: float = 0.0, hi: float = 64.0) -> float:
    """Solve f(alpha) = target for decreasing f, expanding hi as needed."""
    for _ in range(200):
        if f(hi) < target:
            break
        hi *= 2.0
    else:
        raise CalibrationError("could not bracket the threshold factor")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    if not math.isfinite(hi) or hi <= 0.0:
        raise CalibrationError("threshold bisection failed")
    return 0.5 * (lo + hi)


@lru_cache(maxsize=4096)
def alpha_os(n: int, k: int, pfa: float) -> float:
    """OS-CFAR factor from the closed-form exponential order-statistic Pfa."""
    if not (1 <= k <= n):
        raise ValueError(f"order-statistic rank {k} must be in [1, {n}]")
    return _bisect_decreasing(lambda a: _os_pfa(a, n, k), pfa)


def _rank(frac: float, count: int) -> int:
    return min(count, max(1, math.ceil(frac * count)))


def _mc_alpha(kind: str, sig: tuple, pfa: float, interior: bool) -> float:
    """Monte-Carlo factor: solve E[exp(-alpha*g)] = pfa over sampled g.

    For GO/SO the signature is the tuple of side-band cell counts; for OSCA
    it is (rank, row segment lengths...). Averaging the conditional
    false-alarm probability exp(-alpha*g) instead of thresholded draws gives
    a low-variance estimate even at small pfa.
    """
    key = (kind, sig, pfa)
    with _cache_lock:
        if key in _alpha_cache:
            return _alpha_cache[key]
        g = _sample_cache.get((kind, sig))
    if g is None:
        draws = _MC_DRAWS_INTERIOR if interior else _MC_DRAWS_EDGE
        rng = _sig_rng(kind, sig)
        if kind in ("GO", "SO"):
            counts = np.array(sig, dtype=float)
            means = rng.gamma(shape=counts, scale=1.0 / counts, size=(draws, len(counts)))
            g = means.max(axis=1) if kind == "GO" else means.min(axis=1)
        elif kind == "OSCA":
            k, lengths = sig[0], np.array(sig[1:], dtype=float)
            means = rng.gamma(shape=lengths, scale=1.0 / lengths, size=(draws, len(lengths)))
            g = np.partition(means, k - 1, axis=1)[:, k - 1]
        else:
            raise ValueError(f"no Monte-Carlo calibration for kind {kind}")
        with _cache_lock:
            _sample_cache.setdefault((kind, sig), g)
            g = _sample_cache[(kind, sig)]
    alpha = _bisect_decreasing(lambda a: float(np.mean(np.exp(-a * g))), pfa)
    with _cache_lock:
        _alpha_cache[key] = alpha
    return alpha


def threshold_factor(cfg: CfarConfig, n_training_cells: int) -> float:
    """Factor alpha such that cell > alpha * statistic fires at design Pfa.

    For GO/SO the given cell count is split evenly across the four
    side-bands; for OSCA the count must match the interior ring of cfg
    (the statistic depends on the row structure, not just the count).
    """
    n = int(n_training_cells)
    if n < 1:
        raise ValueError("n_training_cells must be >= 1")
    pfa = cfg.design_pfa
    if cfg.kind == "CA":
        return float(alpha_ca(n, pfa))
    if cfg.kind == "OS":
        return alpha_os(n, _rank(cfg.os_rank_fraction, n), pfa)
    if cfg.kind in ("GO", "SO"):
        if n == cfg.interior_ring_cells:
            sig = _interior_band_sig(cfg)
        else:
            base, extra = divmod(n, 4)
            sig = tuple(sorted((base + (1 if i < extra else 0) for i in range(4)), reverse=True))
            sig = tuple(c for c in sig if c > 0)
        return _mc_alpha(cfg.kind, sig, pfa, interior=True)
    # OSCA
    if n != cfg.interior_ring_cells:
        raise ValueError("OSCA factor is defined by the window geometry; pass the interior ring count")
    lengths = _interior_row_sig(cfg)
    sig = (_rank(cfg.os_rank_fraction, len(lengths)),) + lengths
    return _mc_alpha("OSCA", sig, pfa, interior=True)


def _interior_band_sig(cfg: CfarConfig) -> tuple:
    t0, t1 = cfg.training_cells
    g0, g1 = cfg.guard_cells
    h1 = cfg.half_extents[1]
    top = t0 * (2 * h1 + 1)
    side = (2 * g0 + 1) * t1
    return tuple(sorted((top, top, side, side), reverse=True))


def _interior_row_sig(cfg: CfarConfig) -> tuple:
    t0, t1 = cfg.training_cells
    g0, g1 = cfg.guard_cells
    h1 = cfg.half_extents[1]
    full = [2 * h1 + 1] * (2 * t0)
    outer = [2 * t1] * (2 * g0 + 1)
    return tuple(sorted(full + outer))


# ---------------------------------------------------------------------------
# Per-cell background statistics (vectorized, border-truncating).
# ---------------------------------------------------------------------------


def _sat(arr: np.ndarray) -> np.ndarray:
    p = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1))
    p[1:, 1:] = arr.cumsum(axis=0).cumsum(axis=1)
    return p


def _box(p: np.ndarray, r0, r1, c0, c1):
    """Sum over rows [r0, r1] x cols [c0, c1] from a summed-area table.

    Bounds are per-cell arrays, already clipped; empty boxes (r0 > r1 or
    c0 > c1) yield 0.
    """
    r0c = np.minimum(r0, r1 + 1)
    c0c = np.minimum(c0, c1 + 1)
    return p[r1 + 1, c1 + 1] - p[r0c, c1 + 1] - p[r1 + 1, c0c] + p[r0c, c0c]


def _grid_bounds(shape, lo_off: int, hi_off: int, axis: int):
    idx = np.arange(shape[axis])
    lo = np.clip(idx + lo_off, 0, shape[axis] - 1)
    hi = np.clip(idx + hi_off, 0, shape[axis] - 1)
    raw_lo = idx + lo_off
    raw_hi = idx + hi_off
    # empty when the raw interval misses the map entirely
    empty = (raw_hi < 0) | (raw_lo > shape[axis] - 1) | (raw_lo > raw_hi)
    if axis == 0:
        return lo[:, None], hi[:, None], empty[:, None]
    return lo[None, :], hi[None, :], empty[None, :]


def _band_sum_count(values: np.ndarray, p: np.ndarray, row_rng, col_rng):
    (r0, r1, rempty) = row_rng
    (c0, c1, cempty) = col_rng
    s = _box(p, np.broadcast_to(r0, values.shape), np.broadcast_to(r1, values.shape),
             np.broadcast_to(c0, values.shape), np.broadcast_to(c1, values.shape))
    n = (r1 - r0 + 1) * (c1 - c0 + 1)
    n = np.where(rempty | cempty, 0, n)
    s = np.where(n > 0, s, 0.0)
    return s, n.astype(np.int64)


@dataclass
class CfarBackground:
    """Per-cell statistic plus the calibration geometry of every cell.

    alpha for any pfa is looked up per distinct geometry, so sweeping pfa
    over a fixed map re-uses this object.
    """

    cfg: CfarConfig
    stat: np.ndarray
    sig_index: np.ndarray
    signatures: list[tuple]
    interior_flags: list[bool]

    def alphas(self, pfa: float) -> np.ndarray:
        out = np.empty(len(self.signatures))
        for i, sig in enumerate(self.signatures):
            out[i] = self._alpha_for(sig, pfa, self.interior_flags[i])
        return out[self.sig_index]

    def _alpha_for(self, sig: tuple, pfa: float, interior: bool) -> float:
        kind = self.cfg.kind
        if kind == "CA":
            return float(alpha_ca(sig[0], pfa))
        if kind == "OS":
            n = sig[0]
            return alpha_os(n, _rank(self.cfg.os_rank_fraction, n), pfa)
        return _mc_alpha(kind, sig, pfa, interior)


def _unique_sig_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def compute_background(values: np.ndarray, cfg: CfarConfig) -> CfarBackground:
    """Background statistic of every cell under cfg's window geometry."""
    values = np.asarray(values, dtype=float)
    h, w = values.shape
    h0, h1 = cfg.half_extents
    if h < 2 * h0 + 1 or w < 2 * h1 + 1:
        raise ValueError(f"map {values.shape} smaller than CFAR window {(2*h0+1, 2*h1+1)}")
    g0, g1 = cfg.guard_cells
    if cfg.kind == "CA":
        stat, n = _stat_ca(values, h0, h1, g0, g1)
        sigs, idx = _unique_sig_rows(n.reshape(-1, 1))
        signatures = [(int(s[0]),) for s in sigs]
        interior = [s[0] == cfg.interior_ring_cells for s in sigs]
    elif cfg.kind in ("GO", "SO"):
        stat, counts = _stat_goso(values, h0, h1, g0, g1, greatest=cfg.kind == "GO")
        sigs, idx = _unique_sig_rows(counts.reshape(-1, 4))
        signatures = [tuple(int(c) for c in s if c > 0) for s in sigs]
        interior_sig = _interior_band_sig(cfg)
        interior = [tuple(int(c) for c in s if c > 0) == interior_sig for s in sigs]
    elif cfg.kind == "OS":
        stat, n = _stat_os(values, h0, h1, g0, g1, cfg.os_rank_fraction)
        sigs, idx = _unique_sig_rows(n.reshape(-1, 1))
        signatures = [(int(s[0]),) for s in sigs]
        interior = [s[0] == cfg.interior_ring_cells for s in sigs]
    else:  # OSCA
        stat, lengths = _stat_osca(values, h0, h1, g0, g1, cfg.os_rank_fraction)
        sigs, idx = _unique_sig_rows(lengths.reshape(lengths.shape[0] * lengths.shape[1], -1))
        frac = cfg.os_rank_fraction

        def osca_sig(row) -> tuple:
            lens = tuple(int(v) for v in row if v > 0)
            return (_rank(frac, len(lens)),) + lens

        signatures = [osca_sig(s) for s in sigs]
        interior_lens = _interior_row_sig(cfg)
        interior_sig = (_rank(frac, len(interior_lens)),) + interior_lens
        interior = [sig == interior_sig for sig in signatures]
    return CfarBackground(
        cfg=cfg,
        stat=stat,
        sig_index=idx.reshape(h, w),
        signatures=signatures,
        interior_flags=interior,
    )


def _stat_ca(values, h0, h1, g0, g1):
    p = _sat(values)
    win_r = _grid_bounds(values.shape, -h0, h0, axis=0)
    win_c = _grid_bounds(values.shape, -h1, h1, axis=1)
    grd_r = _grid_bounds(values.shape, -g0, g0, axis=0)
    grd_c = _grid_bounds(values.shape, -g1, g1, axis=1)
    win_s, win_n = _band_sum_count(values, p, win_r, win_c)
    grd_s, grd_n = _band_sum_count(values, p, grd_r, grd_c)
    n = win_n - grd_n
    s = win_s - grd_s
    stat = np.where(n > 0, s / np.maximum(n, 1), np.inf)
    return stat, n


def _stat_goso(values, h0, h1, g0, g1, greatest: bool):
    p = _sat(values)
    shape = values.shape
    full_c = _grid_bounds(shape, -h1, h1, axis=1)
    guard_r = _grid_bounds(shape, -g0, g0, axis=0)
    bands = [
        (_grid_bounds(shape, -h0, -g0 - 1, axis=0), full_c),        # top
        (_grid_bounds(shape, g0 + 1, h0, axis=0), full_c),          # bottom
        (guard_r, _grid_bounds(shape, -h1, -g1 - 1, axis=1)),       # left
        (guard_r, _grid_bounds(shape, g1 + 1, h1, axis=1)),         # right
    ]
    means = np.full((4,) + shape, np.nan)
    counts = np.zeros((4,) + shape, dtype=np.int64)
    for i, (rr, cc) in enumerate(bands):
        s, n = _band_sum_count(values, p, rr, cc)
        counts[i] = n
        means[i] = np.where(n > 0, s / np.maximum(n, 1), np.nan)
    with np.errstate(invalid="ignore"):
        stat = np.nanmax(means, axis=0) if greatest else np.nanmin(means, axis=0)
    stat = np.where(np.isnan(stat), np.inf, stat)
    counts_sorted = np.sort(counts.reshape(4, -1).T, axis=1)[:, ::-1]
    return stat, counts_sorted.reshape(shape + (4,))


def _stat_os(values, h0, h1, g0, g1, frac):
    h, w = values.shape
    padded = np.full((h + 2 * h0, w + 2 * h1), np.nan)
    padded[h0 : h0 + h, h1 : h1 + w] = values
    win = np.lib.stride_tricks.sliding_window_view(padded, (2 * h0 + 1, 2 * h1 + 1))
    win = win.copy()
    win[:, :, h0 - g0 : h0 + g0 + 1, h1 - g1 : h1 + g1 + 1] = np.nan
    flat = np.sort(win.reshape(h, w, -1), axis=-1)  # NaNs sort to the end
    n = (2 * h0 + 1) * (2 * h1 + 1) - np.isnan(flat).sum(axis=-1)
    k = np.maximum(1, np.ceil(frac * n).astype(int))
    k = np.minimum(k, np.maximum(n, 1))
    stat = np.take_along_axis(flat, (k - 1)[..., None], axis=-1)[..., 0]
    stat = np.where(n > 0, stat, np.inf)
    return stat, n


def _stat_osca(values, h0, h1, g0, g1, frac):
    h, w = values.shape
    p1 = np.zeros((h, w + 1))
    p1[:, 1:] = values.cumsum(axis=1)
    cols = np.arange(w)

    def row_seg(lo_off, hi_off):
        lo = np.clip(cols + lo_off, 0, w - 1)
        hi = np.clip(cols + hi_off, 0, w - 1)
        empty = (cols + hi_off < 0) | (cols + lo_off > w - 1)
        s = p1[:, hi + 1] - p1[:, np.minimum(lo, hi + 1)]
        n = np.where(empty, 0, hi - lo + 1)
        return s, np.broadcast_to(n, (h, w))

    full_s, full_n = row_seg(-h1, h1)
    inner_s, inner_n = row_seg(-g1, g1)
    outer_s, outer_n = full_s - inner_s, full_n - inner_n
    with np.errstate(invalid="ignore", divide="ignore"):
        full_mean = np.where(full_n > 0, full_s / np.maximum(full_n, 1), np.nan)
        outer_mean = np.where(outer_n > 0, outer_s / np.maximum(outer_n, 1), np.nan)

    n_rows = 2 * h0 + 1
    stack = np.full((n_rows, h, w), np.nan)
    lens = np.zeros((n_rows, h, w), dtype=np.int64)
    rows = np.arange(h)
    for di, delta in enumerate(range(-h0, h0 + 1)):
        src = rows + delta
        ok = (src >= 0) & (src < h)
        use_outer = abs(delta) <= g0
        mean = outer_mean if use_outer else full_mean
        length = outer_n if use_outer else full_n
        stack[di, ok, :] = mean[src[ok], :]
        lens[di, ok, :] = length[src[ok], :]
    valid = ~np.isnan(stack)
    r_count = valid.sum(axis=0)
    srt = np.sort(stack, axis=0)
    k = np.maximum(1, np.ceil(frac * r_count).astype(int))
    k = np.minimum(k, np.maximum(r_count, 1))
    stat = np.take_along_axis(srt, (k - 1)[None, ...], axis=0)[0]
    stat = np.where(r_count > 0, stat, np.inf)
    lens_sorted = np.sort(lens.reshape(n_rows, -1).T, axis=1)
    return stat, lens_sorted.reshape(h, w, n_rows)


def detect_with_background(
    values: np.ndarray, bg: CfarBackground, pfa: float | None = None
) -> DetectionMask:
    """Threshold a map against a previously computed background."""
    values = np.asarray(values, dtype=float)
    alphas = bg.alphas(bg.cfg.design_pfa if pfa is None else pfa)
    with np.errstate(invalid="ignore"):
        mask = values > alphas * bg.stat
    return DetectionMask.from_mask(mask, values)


def cfar_2d(grid, cfg: CfarConfig) -> DetectionMask:
    """Detect cells of a map (MapGrid or 2D array) at cfg's design Pfa."""
    values = getattr(grid, "magnitudes", grid)
    bg = compute_background(values, cfg)
    return detect_with_background(values, bg, cfg.design_pfa)
