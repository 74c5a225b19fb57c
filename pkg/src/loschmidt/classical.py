"""Classical sawtooth and standard maps and the oracles built on them.

Everything here is vectorized over trajectories: a PhasePoint may hold
scalars or equal-shape arrays.  Tangent vectors are ordered (dp, dr) when
acted on by the Jacobian

    J(r) = [[1, K f'(r)], [1, 1 + K f'(r)]]

with f' = 1 for the sawtooth and f' = cos r for the standard map, which
is the linearization of p' = p + K f(r), r' = r + p'.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .models import ModelKind, force, force_derivative, potential
from .torus import TWO_PI, GaussianPacketSpec

DEFAULT_BURN_IN = 20


class PhasePoint(NamedTuple):
    r: np.ndarray
    p: np.ndarray


class TangentVector(NamedTuple):
    dr: np.ndarray
    dp: np.ndarray


def _kind(model) -> ModelKind:
    return model if isinstance(model, ModelKind) else ModelKind(model)


def wrap(x):
    """Reduce to [0, 2 pi); np.mod of a tiny negative number rounds to 2 pi."""
    y = np.mod(x, TWO_PI)
    return np.where(y >= TWO_PI, 0.0, y)[()]


def step_sawtooth(x: PhasePoint, K: float) -> PhasePoint:
    p = wrap(x.p + K * (x.r - np.pi))
    r = wrap(x.r + p)
    return PhasePoint(r, p)


def step_standard(x: PhasePoint, K: float) -> PhasePoint:
    p = wrap(x.p + K * np.sin(x.r))
    r = wrap(x.r + p)
    return PhasePoint(r, p)


def step(model, x: PhasePoint, K: float) -> PhasePoint:
    if _kind(model) is ModelKind.SAWTOOTH:
        return step_sawtooth(x, K)
    return step_standard(x, K)


def jacobian(model, r, K: float) -> np.ndarray:
    """Jacobian acting on (dp, dr), evaluated at the pre-step position."""
    g = K * force_derivative(_kind(model), r)
    return np.array([[np.ones_like(g), g], [np.ones_like(g), 1.0 + g]])


def tangent_step(x: PhasePoint, v: TangentVector, K: float, model) -> TangentVector:
    g = K * force_derivative(_kind(model), x.r)
    dp = v.dp + g * v.dr
    dr = v.dr + dp
    return TangentVector(dr, dp)


def sawtooth_lyapunov(K: float) -> float:
    """ln of the larger eigenvalue of [[1, K], [1, K + 1]]."""
    return float(np.log((2.0 + K + np.sqrt((2.0 + K) ** 2 - 4.0)) / 2.0))


@dataclass
class TrajectoryEnsemble:
    points: PhasePoint
    tangents: TangentVector
    log_stretch: np.ndarray
    model: ModelKind
    K: float
    seed: int
    observables: list = field(default_factory=list)

    def __len__(self):
        return len(self.log_stretch)


def trajectory_ensemble(model, K: float, n_traj: int, seed: int, burn_in: int = DEFAULT_BURN_IN) -> TrajectoryEnsemble:
    """Uniformly distributed points with unit tangents aligned to the local unstable direction.

    Points start uniform on the torus ``burn_in`` steps earlier and are
    mapped forward; Lebesgue measure is invariant, so the returned points
    are still uniform while their tangents have relaxed onto the unstable
    direction.  ``burn_in=0`` keeps random tangent directions.
    """
    kind = _kind(model)
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, TWO_PI, n_traj)
    p = rng.uniform(0.0, TWO_PI, n_traj)
    angle = rng.uniform(0.0, TWO_PI, n_traj)
    x = PhasePoint(r, p)
    v = TangentVector(np.cos(angle), np.sin(angle))
    for _ in range(burn_in):
        v = tangent_step(x, v, K, kind)
        x = step(kind, x, K)
        n = np.hypot(v.dr, v.dp)
        v = TangentVector(v.dr / n, v.dp / n)
    return TrajectoryEnsemble(x, v, np.zeros(n_traj), kind, K, seed)


def advance(ens: TrajectoryEnsemble, record: bool = False) -> np.ndarray:
    """One map step for the whole ensemble; returns ln of this step's stretch factors.

    With ``record`` the potential at the pre-step position is appended to
    ``ens.observables``.
    """
    x, v = ens.points, ens.tangents
    if record:
        ens.observables.append(potential(ens.model, x.r))
    v = tangent_step(x, v, ens.K, ens.model)
    ens.points = step(ens.model, x, ens.K)
    n = np.hypot(v.dr, v.dp)
    ens.tangents = TangentVector(v.dr / n, v.dp / n)
    growth = np.log(n)
    ens.log_stretch = ens.log_stretch + growth
    return growth


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    warning: bool

    def __float__(self):
        return self.value


def lyapunov_exponent(model, K: float, n_traj: int = 100, t_max: int = 1000, seed: int = 0) -> LyapunovEstimate:
    if t_max < 1000:
        raise ValueError("t_max must be at least 1000 for a Lyapunov estimate")
    ens = trajectory_ensemble(model, K, n_traj, seed)
    for _ in range(t_max):
        advance(ens)
    per_traj = ens.log_stretch / t_max
    value = float(per_traj.mean())
    stderr = float(per_traj.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    flagged = not value > 10.0 * stderr
    if flagged:
        warnings.warn(f"Lyapunov estimate {value:.3g} not resolved from zero (stderr {stderr:.2g})", RuntimeWarning, stacklevel=2)
    return LyapunovEstimate(value, stderr, flagged)


@dataclass(frozen=True)
class Lambda1Series:
    times: np.ndarray   # 1..t_max
    values: np.ndarray  # Lambda_1(t)
    n_traj: int
    model: ModelKind
    K: float

    def exponent(self, t):
        """Lambda_1(t) * t, linearly interpolated; zero at t = 0."""
        t = np.asarray(t, dtype=np.float64)
        tt = np.concatenate([[0.0], self.times])
        yy = np.concatenate([[0.0], self.values * self.times])
        if np.any(t < 0) or np.any(t > tt[-1]):
            from .errors import InterpolationError

            raise InterpolationError(f"Lambda_1 known only on [0, {tt[-1]}]")
        return np.interp(t, tt, yy)


def lambda1_of_t(model, K: float, n_traj: int = 10**5, t_max: int = 20, seed: int = 0, burn_in: int = DEFAULT_BURN_IN) -> Lambda1Series:
    """Lambda_1(t) = -(1/t) ln < |dx(t)/dx(0)|^-1 > over the ensemble."""
    if n_traj < 100:
        raise ValueError("n_traj must be at least 100")
    ens = trajectory_ensemble(model, K, n_traj, seed, burn_in)
    vals = np.empty(t_max)
    log_n = np.log(n_traj)
    for t in range(1, t_max + 1):
        advance(ens)
        log_mean_inverse = logsumexp(-ens.log_stretch) - log_n
        if not np.isfinite(log_mean_inverse):
            raise FloatingPointError("log-space stretch tracking produced a non-finite value")
        vals[t - 1] = -log_mean_inverse / t
    return Lambda1Series(np.arange(1, t_max + 1), vals, n_traj, _kind(model), K)


@dataclass(frozen=True)
class CorrelationSeries:
    C: np.ndarray
    stderr: np.ndarray
    n_samples: int
    model: ModelKind
    K: float
    mean: float


def potential_correlation(model, K: float, l_max: int = 20, n_samples: int = 200, seed: int = 0, traj_len: int = 10_000) -> CorrelationSeries:
    """C(l) = <(v(r_l) - <v>)(v(r_0) - <v>)> by time averaging along trajectories.

    ``n_samples`` independent trajectories, uniform starts, each of length
    ``traj_len``; the stderr of each C(l) is the spread across trajectories.
    """
    kind = _kind(model)
    rng = np.random.default_rng(seed)
    x = PhasePoint(rng.uniform(0.0, TWO_PI, n_samples), rng.uniform(0.0, TWO_PI, n_samples))
    ring = np.empty((l_max + 1, n_samples))
    prod = np.zeros((l_max + 1, n_samples))
    head_sum = np.zeros(n_samples)
    lag_sum = np.zeros((l_max + 1, n_samples))
    count = 0
    total = traj_len + l_max
    for t in range(total):
        v = potential(kind, x.r)
        ring[t % (l_max + 1)] = v
        if t >= l_max:
            lags = [(t - l) % (l_max + 1) for l in range(l_max + 1)]
            past = ring[lags]
            prod += past * v
            head_sum += v
            lag_sum += past
            count += 1
        x = step(kind, x, K)
    head = head_sum / count
    per_traj = prod / count - head[None, :] * (lag_sum / count)
    # centre with the pooled mean; per-trajectory means differ only by noise
    mean = float(head.mean())
    pooled = prod.sum(axis=1) / (count * n_samples) - mean * lag_sum.sum(axis=1) / (count * n_samples)
    stderr = per_traj.std(axis=1, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.zeros(l_max + 1)
    return CorrelationSeries(pooled, stderr, n_samples * count, kind, K, mean)


@dataclass(frozen=True)
class ActionDiffusion:
    value: float
    stderr: float
    tail_warning: bool

    def __float__(self):
        return self.value


def action_diffusion(corr: CorrelationSeries) -> ActionDiffusion:
    """R = C(0)/2 + sum_{l>=1} C(l)."""
    C = np.asarray(corr.C, dtype=np.float64)
    R = 0.5 * C[0] + C[1:].sum()
    err = np.asarray(corr.stderr, dtype=np.float64)
    stderr = float(np.sqrt(0.25 * err[0] ** 2 + np.sum(err[1:] ** 2))) if err.size else 0.0
    tail = C[max(1, 3 * len(C) // 4):]
    tail_err = err[max(1, 3 * len(C) // 4):]
    flagged = bool(tail.size and np.any(np.abs(tail) > 3.0 * np.maximum(tail_err, 1e-15)))
    if flagged:
        warnings.warn("correlation tail has not decayed below noise; increase l_max", RuntimeWarning, stacklevel=2)
    return ActionDiffusion(float(R), stderr, flagged)


@dataclass(frozen=True)
class ActionHistogram:
    """Histogram of dS with per-bin sums so moments are exact."""

    edges: np.ndarray
    counts: np.ndarray
    bin_sum: np.ndarray
    bin_sumsq: np.ndarray
    n_samples: int
    t: int
    hbar: float
    streamed_mean: float
    streamed_var: float

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0]) if len(self.edges) > 1 else 0.0

    @property
    def probability(self) -> np.ndarray:
        return self.counts / self.n_samples

    @property
    def mean(self) -> float:
        return float(self.bin_sum.sum() / self.n_samples)

    @property
    def variance(self) -> float:
        m = self.mean
        return float(self.bin_sumsq.sum() / self.n_samples - m * m)

    def representative(self) -> np.ndarray:
        """Mean dS inside each bin (bin centre for empty bins)."""
        centres = 0.5 * (self.edges[:-1] + self.edges[1:])
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.bin_sum / np.maximum(self.counts, 1), centres)


def accumulated_action(model, K: float, epsilon: float, x0: PhasePoint, t: int) -> np.ndarray:
    """eps * sum_{t'=0}^{t-1} v(r(t')) along unperturbed trajectories."""
    kind = _kind(model)
    s = np.zeros(np.shape(x0.r))
    x = x0
    for _ in range(t):
        s = s + potential(kind, x.r)
        x = step(kind, x, K)
    return epsilon * s


def action_difference_distribution(
    model,
    K: float,
    sigma: float,
    grid_hbar: float,
    packet: GaussianPacketSpec | None,
    t: int,
    n_samples: int = 10**6,
    seed: int = 0,
    chunk: int = 2**18,
) -> ActionHistogram:
    """Distribution of dS at time t.

    Initial momenta follow the weight exp[-(p0 - p~0)^2 / (hbar/xi)^2] at
    the packet's r~0.  With ``packet=None`` the packet centre is itself
    drawn uniformly on the torus for each sample (the ensemble-averaged
    distribution, xi = sqrt(hbar)).
    """
    rng = np.random.default_rng(seed)
    eps = sigma * grid_hbar
    xi = np.sqrt(grid_hbar) if packet is None or packet.xi is None else float(packet.xi)
    p_std = grid_hbar / (np.sqrt(2.0) * xi)
    samples = []
    n_done = 0
    mean = 0.0
    m2 = 0.0
    while n_done < n_samples:
        n = min(chunk, n_samples - n_done)
        if packet is None:
            r0 = rng.uniform(0.0, TWO_PI, n)
            pc = rng.uniform(0.0, TWO_PI, n)
        else:
            r0 = np.full(n, float(packet.r0))
            pc = np.full(n, float(packet.p0))
        p0 = wrap(pc + p_std * rng.standard_normal(n))
        s = accumulated_action(model, K, eps, PhasePoint(wrap(r0), p0), t)
        # chunked Welford/Chan update
        c_mean = s.mean()
        c_m2 = np.sum((s - c_mean) ** 2)
        delta = c_mean - mean
        tot = n_done + n
        mean += delta * n / tot
        m2 += c_m2 + delta * delta * n_done * n / tot
        n_done = tot
        samples.append(s)
    s = np.concatenate(samples)
    lo, hi = float(s.min()), float(s.max())
    span = hi - lo
    if span == 0.0:
        edges = np.array([lo - 0.5 * grid_hbar / 8, lo + 0.5 * grid_hbar / 8])
    else:
        width = min(grid_hbar / 8.0, span / 512.0)
        nbins = int(np.ceil(span / width)) + 1
        edges = lo + width * (np.arange(nbins + 1) - 0.5)
    idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(edges) - 2)
    nb = len(edges) - 1
    counts = np.bincount(idx, minlength=nb).astype(np.float64)
    bin_sum = np.bincount(idx, weights=s, minlength=nb)
    bin_sumsq = np.bincount(idx, weights=s * s, minlength=nb)
    return ActionHistogram(edges, counts, bin_sum, bin_sumsq, int(n_done), int(t), float(grid_hbar), float(mean), float(m2 / n_done))


def semiclassical_echo_from_distribution(hist: ActionHistogram, hbar: float) -> float:
    """|sum_bins P(dS) exp(i dS / hbar)|^2."""
    from .errors import AliasingError

    if hist.width > hbar:
        raise AliasingError(f"bin width {hist.width:.3g} exceeds hbar={hbar:.3g}")
    P = hist.probability
    total = P.sum()
    if not np.isclose(total, 1.0, rtol=0, atol=1e-9):
        raise ValueError(f"histogram not normalized (sum P = {total})")
    chi = np.sum(P * np.exp(1j * hist.representative() / hbar))
    return float(abs(chi) ** 2)


def time_average_observable(model, K: float, x0: PhasePoint, t: int, weighted: bool = False) -> float:
    """(1/t) sum_{t'=0}^{t-1} v(r(t')) along the orbit of x0.

    ``weighted`` uses the smooth bump weight exp(-1/(s(1-s))) on s = t'/t,
    which converges far faster on quasi-periodic orbits and keeps the
    average differentiable in the initial condition.
    """
    kind = _kind(model)
    x = PhasePoint(np.asarray(x0.r, dtype=np.float64), np.asarray(x0.p, dtype=np.float64))
    if weighted:
        s = (np.arange(t) + 0.5) / t
        w = np.exp(-1.0 / (s * (1.0 - s)))
        w /= w.sum()
    else:
        w = np.full(t, 1.0 / t)
    acc = np.zeros(np.shape(x.r))
    for i in range(t):
        acc = acc + w[i] * potential(kind, x.r)
        x = step(kind, x, K)
    return acc if np.ndim(acc) else float(acc)


def observable_derivatives(model, K: float, r0: float, p0: float, t: int, h: float = 1e-4):
    """dU/dp0 and d2U/dp0^2 of the weighted time average, by central differences.

    Returns (dU, d2U, consistent) where ``consistent`` says the first
    derivative agrees to 1% with the estimate at step h/2.
    """
    def U(p):
        return time_average_observable(model, K, PhasePoint(np.full(5, r0), p), t, weighted=True)

    def derivs(hh):
        vals = U(np.mod(p0 + hh * np.arange(-2, 3), TWO_PI))
        d1 = (vals[3] - vals[1]) / (2 * hh)
        d2 = (vals[3] - 2 * vals[2] + vals[1]) / hh**2
        return d1, d2

    d1, d2 = derivs(h)
    d1h, _ = derivs(h / 2)
    consistent = bool(abs(d1 - d1h) <= 0.01 * max(abs(d1h), 1e-12))
    return float(d1), float(d2), consistent
