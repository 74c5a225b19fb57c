"""Decay-rate fits, the deviation metric D and breakdown detection.

All windows are explicit, inclusive (t_start, t_end) pairs.  The helpers
that suggest windows (``decay_onset``, ``suggest_fgr_window``,
``lyapunov_window``, ...) only compute candidates from a measured series;
callers pass the result on and record it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InterpolationError, WindowError
from .series import EchoSeries


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    window: tuple
    rms_residual: float
    n_points: int


@dataclass(frozen=True)
class DeviationReport:
    D: float
    window: tuple
    normalization: str
    n_points: int


@dataclass(frozen=True)
class ScanResult:
    controls: np.ndarray
    D: np.ndarray
    threshold: float
    detected: float | None

    def as_rows(self):
        return [(float(c), float(d)) for c, d in zip(self.controls, self.D)]


def _in_window(times, window):
    t0, t1 = window
    if not t0 < t1:
        raise WindowError(f"window start {t0} must precede end {t1}")
    return (times >= t0 - 1e-12) & (times <= t1 + 1e-12)


def fit_exponential(series: EchoSeries, window, min_points: int = 4) -> DecayFit:
    """Least squares of ln M against t; rate = -slope."""
    sel = _in_window(series.times, window)
    t = series.times[sel].astype(np.float64)
    if t.size < min_points:
        raise WindowError(f"window {window} holds {t.size} points, need {min_points}")
    if series.logM is None and np.any(series.M[sel] <= 0):
        raise WindowError("nonpositive echo value inside the fit window")
    y = series.log_M[sel]
    A = np.stack([t, np.ones_like(t)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * t + intercept)
    return DecayFit(float(-slope), float(intercept), tuple(window), float(np.sqrt(np.mean(resid**2))), int(t.size))


def _log_on(times_target, series) -> np.ndarray:
    """ln M of ``series`` on the target times (linear interpolation in ln M)."""
    src_t = np.asarray(series.times, dtype=np.float64)
    logm = series.log_M if isinstance(series, EchoSeries) else np.log(series.M_pred)
    tt = np.asarray(times_target, dtype=np.float64)
    if tt.size and (tt.min() < src_t.min() - 1e-12 or tt.max() > src_t.max() + 1e-12):
        raise InterpolationError("reference series does not cover the comparison window")
    if src_t.shape == tt.shape and np.allclose(src_t, tt, rtol=0, atol=1e-12):
        return np.asarray(logm, dtype=np.float64)
    return np.interp(tt, src_t, logm)


def deviation_D(series_exact: EchoSeries, series_pred, window, normalization: str = "none", N_p: int | None = None) -> DeviationReport:
    """Standard deviation of x_n = |ln M_exact - ln M_pred| over the window.

    ``normalization="perSpin"`` divides x_n by N_p (taken from the series
    metadata when not given).
    """
    if normalization not in ("none", "perSpin"):
        raise ValueError("normalization must be 'none' or 'perSpin'")
    sel = _in_window(series_exact.times, window)
    t = series_exact.times[sel]
    if t.size == 0:
        raise WindowError(f"no exact points inside {window}")
    if series_exact.logM is None and np.any(series_exact.M[sel] <= 0):
        raise WindowError("exact echo must be positive on the window")
    x = np.abs(series_exact.log_M[sel] - _log_on(t, series_pred))
    if normalization == "perSpin":
        N_p = N_p if N_p is not None else series_exact.metadata["N_p"]
        x = x / N_p
    D = float(np.sqrt(np.mean((x - x.mean()) ** 2)))
    return DeviationReport(D, tuple(window), normalization, int(t.size))


def detect_td(series_exact: EchoSeries, fgr_pred, delta_ln: float = 0.5, w_sustain: int = 3, t_from=None):
    """First t where |ln M_e - ln M_FGR| > delta_ln on w_sustain consecutive points.

    Returns None when the deviation never triggers.
    """
    times = series_exact.times
    sel = np.ones(len(times), dtype=bool) if t_from is None else times >= t_from
    pred_t = np.asarray(fgr_pred.times, dtype=np.float64)
    sel &= (times >= pred_t.min()) & (times <= pred_t.max())
    t = times[sel]
    dev = np.abs(series_exact.log_M[sel] - _log_on(t, fgr_pred))
    run = 0
    for i, d in enumerate(dev):
        run = run + 1 if d > delta_ln else 0
        if run >= w_sustain:
            return t[i - w_sustain + 1].item()
    return None


def t_n_formula(N: float, sigma: float) -> float:
    """45 ln N / (sigma^2 pi^4): time for exp(-pi^4 sigma^2 t / 45) to reach 1/N."""
    if sigma == 0:
        raise DomainError("t_n undefined for sigma = 0")
    if N < 2:
        raise DomainError("t_n needs N >= 2")
    return 45.0 * np.log(N) / (sigma**2 * np.pi**4)


def saturation_time_fgr(N: float, sigma: float, R: float) -> float:
    """ln N / (2 sigma^2 R): same as t_n_formula for a general diffusion constant."""
    return np.log(N) / (2.0 * sigma**2 * R)


def detect_threshold(scan, D_threshold: float | None = None, reference: str = "high") -> ScanResult:
    """Smallest control value above which D stays at or below the threshold.

    ``scan`` is a sequence of (control, D) with strictly increasing controls.
    Default thresholds: ``reference="high"`` uses 2x the median D of the top
    quartile of controls (a small-D plateau at large controls);
    ``reference="peak"`` uses half the largest D (a half-maximum rule for
    scans where D falls off from a small-control plateau without a floor).
    ``detected`` is None when every point is above or every point below.
    """
    rows = list(scan)
    if len(rows) < 3:
        raise ValueError("need at least 3 scan points")
    controls = np.array([r[0] for r in rows], dtype=np.float64)
    D = np.array([r[1] for r in rows], dtype=np.float64)
    if np.any(np.diff(controls) <= 0):
        raise ValueError("control values must be strictly increasing")
    q = max(1, int(np.ceil(len(D) / 4)))
    if D_threshold is None:
        if reference == "high":
            D_threshold = 2.0 * float(np.median(D[-q:]))
        elif reference == "peak":
            D_threshold = 0.5 * float(D.max())
        else:
            raise ValueError("reference must be 'high' or 'peak'")
    above = D > D_threshold
    detected = None
    if above.any() and not above.all():
        last_above = int(np.nonzero(above)[0][-1])
        if last_above + 1 < len(D):
            detected = float(controls[last_above + 1])
    return ScanResult(controls, D, float(D_threshold), detected)


def saturation_check(series: EchoSeries, N: float, window):
    sel = _in_window(series.times, window)
    if not sel.any():
        raise WindowError(f"no points inside {window}")
    mean_M = float(series.M[sel].mean())
    return mean_M, mean_M * N


def scaling_collapse(curves, window) -> float:
    """Max pairwise |ln M/N_p - ln M'/N_p'| on a common grid inside the window.

    ``curves`` is a sequence of (N_p, EchoSeries); the grid is the first
    series' times restricted to the window and to the common support.
    """
    curves = list(curves)
    if len(curves) < 2:
        raise ValueError("need at least 2 series")
    lo = max(float(np.min(s.times)) for _, s in curves)
    hi = min(float(np.max(s.times)) for _, s in curves)
    t0, t1 = max(window[0], lo), min(window[1], hi)
    if not t0 < t1:
        raise WindowError(f"series do not overlap inside {window}")
    base = curves[0][1].times
    grid = base[(base >= t0) & (base <= t1)].astype(np.float64)
    scaled = [np.interp(grid, s.times.astype(np.float64), s.log_M) / n for n, s in curves]
    return float(max(np.max(np.abs(a - b)) for a, b in itertools.combinations(scaled, 2)))


def decay_onset(series: EchoSeries, level: float = 0.5):
    """First time at which ln M <= -level (end of the initial slow stage)."""
    hit = np.nonzero(series.log_M <= -level)[0]
    return series.times[hit[0]].item() if hit.size else None


def saturation_time(series: EchoSeries, N: float, factor: float = 2.0):
    """First time at which M <= factor / N."""
    hit = np.nonzero(series.M <= factor / N)[0]
    return series.times[hit[0]].item() if hit.size else None


def suggest_fgr_window(series: EchoSeries, N: float, sigma: float, R: float, t_d=None, onset_level: float = 0.5):
    """(onset, min(t_d, 0.8 t_n)) for a first-stage FGR fit.

    The window opens where the echo has left its initial slow stage
    (ln M <= -onset_level), never before t = 2.
    """
    start = decay_onset(series, onset_level)
    start = 2 if start is None else max(2, start)
    end = 0.8 * saturation_time_fgr(N, sigma, R)
    if t_d is not None:
        end = min(end, t_d)
    return start, end


def lyapunov_window(series: EchoSeries, length: int = 3, onset_level: float = 0.5):
    """``length`` consecutive kicks starting at the decay onset."""
    start = decay_onset(series, onset_level)
    if start is None:
        raise WindowError("echo never leaves its initial stage")
    return start, start + length - 1
