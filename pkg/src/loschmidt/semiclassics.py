"""Closed-form semiclassical echo curves, evaluated from classical oracle output."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InterpolationError
from .series import EchoSeries


class Regime(enum.Enum):
    FGR = "FGR"
    LYAPUNOV = "Lyapunov"
    REGULAR_1D = "Regular1D"
    MANY_MODE_FGR = "ManyModeFGR"


@dataclass
class PredictionCurve:
    times: np.ndarray
    M_pred: np.ndarray
    regime: Regime
    parameters: dict = field(default_factory=dict)

    def as_series(self) -> EchoSeries:
        meta = {"regime": self.regime.value}
        meta.update({k: v for k, v in self.parameters.items() if np.isscalar(v) or v is None})
        return EchoSeries(self.times, self.M_pred, None, 0, meta)

    @property
    def log_M(self):
        return np.log(self.M_pred)


def fgr_prediction(sigma: float, R: float, times, anchor: tuple[float, float] | None = None) -> PredictionCurve:
    """exp(-2 sigma^2 R t), optionally rescaled to pass through ``anchor`` = (t0, M0)."""
    if not R > 0:
        raise DomainError(f"action diffusion constant must be positive, got {R}")
    times = np.asarray(times)
    rate = 2.0 * sigma**2 * R
    log_m = -rate * times.astype(np.float64)
    if anchor is not None:
        t0, m0 = anchor
        log_m = log_m + np.log(m0) + rate * t0
    params = {"sigma": sigma, "R": R, "rate": rate}
    if anchor is not None:
        params.update(anchor_t=float(anchor[0]), anchor_M=float(anchor[1]))
    return PredictionCurve(times, np.exp(log_m), Regime.FGR, params)


def lyapunov_prediction(lambda1_series, times, anchor: tuple[float, float]) -> PredictionCurve:
    """M0 exp[-(Lambda_1(t) t - Lambda_1(t0) t0)].

    ``lambda1_series`` is a Lambda1Series, or a pair (times, values), or a
    constant exponent (homogeneous phase space).
    """
    times = np.asarray(times)
    t0, m0 = anchor
    if np.isscalar(lambda1_series):
        lam = float(lambda1_series)

        def exponent(t):
            return lam * np.asarray(t, dtype=np.float64)
    elif hasattr(lambda1_series, "exponent"):
        exponent = lambda1_series.exponent
    else:
        ts, vals = (np.asarray(a, dtype=np.float64) for a in lambda1_series)
        tt = np.concatenate([[0.0], ts])
        yy = np.concatenate([[0.0], vals * ts])

        def exponent(t):
            t = np.asarray(t, dtype=np.float64)
            if np.any(t < 0) or np.any(t > tt[-1]):
                raise InterpolationError(f"Lambda_1 known only on [0, {tt[-1]}]")
            return np.interp(t, tt, yy)

    log_m = np.log(m0) - (exponent(times) - exponent(t0))
    return PredictionCurve(times, np.exp(log_m), Regime.LYAPUNOV, {"anchor_t": float(t0), "anchor_M": float(m0)})


def regular_1d_prediction(Gamma: float, xi_rate: float, c0: float, times) -> PredictionCurve:
    """c0 (1 + xi^2 t^2)^(-1/2) exp[-Gamma t^2 / (1 + xi^2 t^2)] for a regular 1D orbit.

    c0 is of order one; pass 1.0 absent a better estimate.
    """
    if Gamma < 0 or xi_rate < 0:
        raise DomainError("Gamma and xi_rate must be nonnegative")
    t = np.asarray(times, dtype=np.float64)
    q = 1.0 + (xi_rate * t) ** 2
    M = c0 / np.sqrt(q) * np.exp(-Gamma * t**2 / q)
    return PredictionCurve(np.asarray(times), M, Regime.REGULAR_1D, {"Gamma": Gamma, "xi_rate": xi_rate, "c0": c0})


def gamma_xi_from_derivatives(epsilon: float, w_p: float, hbar: float, dU_dp: float, d2U_dp2: float):
    """(Gamma, xi_rate) of the regular-orbit formula.

    Gamma = (eps w_p U' / hbar)^2 / 2 and xi_rate = |eps w_p^2 U'' / (2 hbar)|,
    with w_p the width of the momentum weight exp[-(p0 - p~0)^2 / w_p^2].
    """
    gamma = 0.5 * (epsilon * w_p * dU_dp / hbar) ** 2
    xi_rate = abs(epsilon * w_p**2 * d2U_dp2 / (2.0 * hbar))
    return gamma, xi_rate


def many_mode_rate(v_series_ensemble, t: int | None = None) -> float:
    """R = (<s^2> - <s>^2) / (2t) for integrated perturbation samples s = sum_{t'<t} v(t').

    ``v_series_ensemble`` has shape (n_samples, T) holding v along each
    trajectory; only the first ``t`` columns are integrated (all by default).
    """
    v = np.asarray(v_series_ensemble, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    t = v.shape[1] if t is None else int(t)
    if t <= 0:
        raise DomainError("many-mode rate undefined at t = 0")
    s = v[:, :t].sum(axis=1)
    return float(s.var() / (2.0 * t))
