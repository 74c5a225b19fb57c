"""Figure-level computations shared by the CLI recipes and the acceptance suite.

Each ``figN`` function runs the exact dynamics, builds the matching
semiclassical curve and returns a FigureResult: named series (for CSV
output), a table of per-point rows and a summary dict.  Parameter
defaults are the ones the recipes ship with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from .classical import (
    action_difference_distribution,
    action_diffusion,
    lambda1_of_t,
    lyapunov_exponent,
    observable_derivatives,
    potential_correlation,
    sawtooth_lyapunov,
    semiclassical_echo_from_distribution,
)
from .errors import WindowError
from .ising import IsingQuench, default_time_step, ising_echo, ising_log_echo_per_spin_limit
from .maps import ensemble_echo, loschmidt_echo
from .models import KickedModel
from .semiclassics import fgr_prediction, gamma_xi_from_derivatives, lyapunov_prediction, regular_1d_prediction
from .series import EchoSeries
from .torus import GaussianPacketSpec, make_grid, momentum_width

SAWTOOTH_R = np.pi**4 / 90.0


@dataclass
class FigureResult:
    name: str
    series: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


@dataclass
class TwoStage:
    onset: int
    t_d: int | None
    t_n: float
    first: an.DecayFit
    second: an.DecayFit | None

    @property
    def second_faster(self):
        if self.second is None:
            return None
        return self.second.rate > self.first.rate

    def row(self) -> dict:
        return {
            "onset": self.onset,
            "t_d": self.t_d,
            "t_n": self.t_n,
            "first_rate": self.first.rate,
            "first_window": list(self.first.window),
            "second_rate": None if self.second is None else self.second.rate,
            "second_window": None if self.second is None else list(self.second.window),
            "second_faster": self.second_faster,
        }


def two_stage_analysis(series: EchoSeries, N: int, sigma: float, R: float, delta_ln: float = 0.5, w_sustain: int = 3,
                       onset_level: float = 0.5, second_floor: float = 4.0) -> TwoStage:
    """First-stage FGR fit and (when t_d exists) the second-stage rate.

    The FGR line is anchored at the decay onset; t_d is searched from there.
    The first stage is fitted on [onset, min(t_d, 0.8 t_n)], the second on
    [t_d, first t with M <= second_floor / N].
    """
    onset = an.decay_onset(series, onset_level)
    if onset is None:
        raise WindowError("echo never leaves its initial stage")
    pred = fgr_prediction(sigma, R, series.times, anchor=(onset, series.M[onset]))
    t_d = an.detect_td(series, pred, delta_ln, w_sustain, t_from=onset)
    first = an.fit_exponential(series, an.suggest_fgr_window(series, N, sigma, R, t_d=t_d, onset_level=onset_level))
    second = None
    if t_d is not None:
        t_end = an.saturation_time(series.window(t_d, np.inf), N, second_floor)
        if t_end is not None and t_end - t_d >= 3:
            second = an.fit_exponential(series, (t_d, t_end))
    return TwoStage(onset, t_d, an.saturation_time_fgr(N, sigma, R), first, second)


def _kicked(kind, K, sigma, N, n_states, seed, t_max, xi=None) -> EchoSeries:
    return ensemble_echo(KickedModel(kind, K), sigma, make_grid(N), n_states=n_states, seed=seed, t_max=t_max, xi=xi)


def kicked_task(args) -> EchoSeries:
    """Picklable single-argument wrapper so runners can map it over a pool."""
    return _kicked(*args)


def _kicked_many(mapper, kind, K, sigma, Ns, n_states, seed, t_max, xi=None):
    return list(mapper(kicked_task, [(kind, K, sigma, N, n_states, seed, t_max, xi) for N in Ns]))


def fig1(Ns=(64, 128, 256, 512, 1024, 2048, 4096), K=2.0, sigma=0.5, n_states=100, seed=0, t_max=30, delta_ln=0.5,
         mapper=map):
    """FGR decay in the sawtooth map; first-stage rates against pi^4 sigma^2 / 45."""
    res = FigureResult("fig1")
    predicted = 2 * sigma**2 * SAWTOOTH_R
    times = np.arange(t_max + 1)
    res.series["prediction"] = fgr_prediction(sigma, SAWTOOTH_R, times).as_series()
    for N, s in zip(Ns, _kicked_many(mapper, "sawtooth", K, sigma, Ns, n_states, seed, t_max)):
        res.series[f"echo_N{N}"] = s
        st = two_stage_analysis(s, N, sigma, SAWTOOTH_R, delta_ln)
        res.rows.append({"N": N, **st.row(), "predicted_rate": predicted,
                         "rel_error": st.first.rate / predicted - 1.0})
    res.summary["predicted_rate"] = predicted
    return res


def fig2(Ns=(64, 256, 1024), K=2.0, sigma=0.2, n_states=1000, seed=0, t_max=None, delta_ln=0.3, w_sustain=3,
         mapper=map):
    """Two-stage decay: t_d(N) against t_n(N)."""
    res = FigureResult("fig2")
    if t_max is None:
        t_max = int(np.ceil(1.5 * an.t_n_formula(max(Ns), sigma)))
    res.series["prediction"] = fgr_prediction(sigma, SAWTOOTH_R, np.arange(t_max + 1)).as_series()
    for N, s in zip(Ns, _kicked_many(mapper, "sawtooth", K, sigma, Ns, n_states, seed, t_max)):
        res.series[f"echo_N{N}"] = s
        st = two_stage_analysis(s, N, sigma, SAWTOOTH_R, delta_ln, w_sustain)
        res.rows.append({"N": N, **st.row(), "t_n_formula": an.t_n_formula(N, sigma)})
    tds = [r["t_d"] for r in res.rows]
    res.summary["t_d"] = tds
    res.summary["increasing"] = all(a is not None for a in tds) and all(b > a for a, b in zip(tds, tds[1:]))
    res.summary["below_t_n"] = all(r["t_d"] is not None and r["t_d"] < r["t_n_formula"] for r in res.rows)
    return res


def lyapunov_scan(Ns, K, sigma, n_states, seed, t_max, window_length=4, onset_level=0.3, name="lyapunov", mapper=map):
    """Sawtooth Lyapunov regime: rate fits and D against exp(-lambda_L t) per N."""
    res = FigureResult(name)
    lam = sawtooth_lyapunov(K)
    for N, s in zip(Ns, _kicked_many(mapper, "sawtooth", K, sigma, Ns, n_states, seed, t_max)):
        res.series[f"echo_N{N}"] = s
        w = an.lyapunov_window(s, window_length, onset_level)
        fit = an.fit_exponential(s, w)
        pred = lyapunov_prediction(lam, s.times, (w[0], s.M[w[0]]))
        D = an.deviation_D(s, pred, w).D
        res.series[f"prediction_N{N}"] = pred.as_series()
        res.rows.append({"N": N, "window": list(w), "rate": fit.rate, "lambda_L": lam,
                         "rel_error": fit.rate / lam - 1.0, "D": D})
    res.summary["lambda_L"] = lam
    return res


def fig3_4(Ns=(16, 24, 32, 48, 64, 96, 128, 256, 512, 1024, 2048, 4096), K=2.0, sigma=3.0, n_states=1000, seed=0,
           t_max=12, window_length=4, onset_level=0.3, N_ref=64, mapper=map):
    """Lyapunov decay exp(-lambda_L t) and the deviation D(N)."""
    res = lyapunov_scan(Ns, K, sigma, n_states, seed, t_max, window_length, onset_level, "fig3_4", mapper)
    D = {r["N"]: r["D"] for r in res.rows}
    above = [D[n] for n in D if n >= N_ref]
    below = [D[n] for n in D if n < N_ref]
    scan = an.detect_threshold([(n, D[n]) for n in sorted(D)])
    res.summary.update(
        D_median_large=float(np.median(above)) if above else None,
        D_min_small=float(min(below)) if below else None,
        D_increase=float(min(below) / np.median(above)) if above and below else None,
        N_c=scan.detected,
        D_threshold=scan.threshold,
    )
    return res


def fig5(sigmas=(1.5, 2.0, 3.0, 4.0), Ns=(16, 24, 32, 48, 64, 96, 128, 256, 512, 1024), K=1.0, n_states=300, seed=0,
         t_max=16, mapper=map):
    """N_c against sigma (sawtooth, K=1)."""
    res = FigureResult("fig5")
    for sigma in sigmas:
        sub = lyapunov_scan(Ns, K, sigma, n_states, seed, t_max, name=f"sigma{sigma}", mapper=mapper)
        scan = an.detect_threshold([(r["N"], r["D"]) for r in sub.rows])
        res.rows.append({"sigma": sigma, "N_c": scan.detected, "D_threshold": scan.threshold,
                         "D": {r["N"]: r["D"] for r in sub.rows}})
    return res


def rotator_R(K: float, l_max: int = 20, n_samples: int = 200, seed: int = 0, traj_len: int = 10_000):
    corr = potential_correlation("rotator", K, l_max, n_samples, seed, traj_len)
    return corr, action_diffusion(corr)


def fig6(Ns=(256, 1024), K=11.0, sigma=0.3, R=None, n_states=1000, seed=0, t_max=120, delta_ln=0.3, mapper=map):
    """Rotator FGR regime with R from the correlation oracle (or given)."""
    res = FigureResult("fig6")
    if R is None:
        _, rd = rotator_R(K, seed=seed)
        R = rd.value
        res.summary["R_stderr"] = rd.stderr
    res.summary["R"] = R
    res.summary["predicted_rate"] = 2 * sigma**2 * R
    res.series["prediction"] = fgr_prediction(sigma, R, np.arange(t_max + 1)).as_series()
    for N, s in zip(Ns, _kicked_many(mapper, "rotator", K, sigma, Ns, n_states, seed, t_max)):
        res.series[f"echo_N{N}"] = s
        st = two_stage_analysis(s, N, sigma, R, delta_ln)
        res.rows.append({"N": N, **st.row(), "predicted_rate": 2 * sigma**2 * R})
    return res


def fig7(Ns=(512, 8192), K=15.0, sigma=20.5, n_states=1000, seed=0, t_max=12, window=(4, 8), n_traj=4 * 10**6,
         saturation_factor=2.0, mapper=map):
    """Rotator Lyapunov regime: exact echo against the anchored Lambda_1(t) curve."""
    res = FigureResult("fig7")
    L1 = lambda1_of_t("rotator", K, n_traj=n_traj, t_max=t_max, seed=seed)
    res.series["lambda1"] = EchoSeries(L1.times, L1.values, metadata={"quantity": "Lambda_1", "K": K, "n_traj": n_traj})
    t0, t1 = window
    for N, s in zip(Ns, _kicked_many(mapper, "rotator", K, sigma, Ns, n_states, seed, t_max)):
        pred = lyapunov_prediction(L1, s.times[(s.times >= t0) & (s.times <= min(t_max, L1.times[-1]))], (t0, s.M[t0]))
        res.series[f"echo_N{N}"] = s
        res.series[f"prediction_N{N}"] = pred.as_series()
        sel = (s.times >= t0) & (s.times <= t1)
        ratio = s.M[sel] / np.interp(s.times[sel], pred.times, pred.M_pred)
        res.rows.append({"N": N, "max_ratio": float(ratio.max()), "min_ratio": float(ratio.min()),
                         "max_factor": float(np.max(np.maximum(ratio, 1 / ratio))),
                         "saturation_time": an.saturation_time(s, N, saturation_factor)})
    return res


def classical_oracles(seed=0, n_traj_lyap=100, t_lyap=1000, corr_samples=200, traj_len=10_000, l_max=20):
    res = FigureResult("oracles")
    corr = potential_correlation("sawtooth", 2.0, l_max, corr_samples, seed, traj_len)
    res.series["C_sawtooth"] = EchoSeries(np.arange(l_max + 1), corr.C, corr.stderr, corr.n_samples, {"quantity": "C(l)", "model": "sawtooth", "K": 2.0})
    rcorr, rd = rotator_R(11.0, l_max, corr_samples, seed, traj_len)
    res.series["C_rotator"] = EchoSeries(np.arange(l_max + 1), rcorr.C, rcorr.stderr, rcorr.n_samples, {"quantity": "C(l)", "model": "rotator", "K": 11.0})
    lyap = {K: lyapunov_exponent("sawtooth", K, n_traj_lyap, t_lyap, seed) for K in (1.0, 2.0)}
    L1 = lambda1_of_t("sawtooth", 2.0, n_traj=1000, t_max=20, seed=seed)
    res.summary.update(
        C0_sawtooth=float(corr.C[0]),
        C_lags_over_stderr=[float(c / e) for c, e in zip(corr.C[1:6], corr.stderr[1:6])],
        R_sawtooth=action_diffusion(corr).value,
        R_rotator=rd.value,
        R_rotator_stderr=rd.stderr,
        lyapunov={str(K): v.value for K, v in lyap.items()},
        lyapunov_formula={str(K): sawtooth_lyapunov(K) for K in lyap},
        lambda1_max_dev=float(np.max(np.abs(L1.values - sawtooth_lyapunov(2.0)))),
    )
    return res


def action_distribution_echo(K=2.0, sigma=0.5, N=1024, times=range(1, 11), n_samples=10**6, seed=0):
    """M_sc(t) from the sampled P(dS), pooled over uniformly drawn packet centres."""
    hbar = make_grid(N).hbar_eff
    t = np.array(list(times))
    vals = []
    for tt in t:
        hist = action_difference_distribution("sawtooth", K, sigma, hbar, None, int(tt), n_samples, seed)
        vals.append(semiclassical_echo_from_distribution(hist, hbar))
    M = np.array(vals)
    ref = np.exp(-np.pi**4 * sigma**2 * t / 45)
    res = FigureResult("action_distribution")
    res.series["M_sc"] = EchoSeries(t, M, metadata={"quantity": "M_sc", "K": K, "sigma": sigma, "N": N, "n_samples": n_samples})
    res.rows = [{"t": int(a), "M_sc": float(b), "fgr": float(c), "rel_error": float(b / c - 1)} for a, b, c in zip(t, M, ref)]
    res.summary["max_rel_error"] = float(np.max(np.abs(M / ref - 1)))
    return res


def regular_orbit(K=0.5, sigma=1.0, N=4096, r0=np.pi, p0=2.0, t_max=500, c0_window=(20, 100), t_average=2000):
    """Single packet on a regular torus of the rotator against the 1D regular-orbit formula.

    Gamma and xi_rate come from finite differences of the time-averaged
    potential; the O(1) prefactor c0 is the geometric-mean ratio of the
    exact echo to the c0 = 1 curve over ``c0_window`` (the exact echo
    drops to c0 within the first few tens of kicks).
    """
    grid = make_grid(N)
    xi = np.sqrt(grid.hbar_eff)
    s = loschmidt_echo(KickedModel.rotator(K), sigma, grid, GaussianPacketSpec(r0, p0), t_max)
    d1, d2, consistent = observable_derivatives("rotator", K, r0, p0, t_average)
    gamma, xi_rate = gamma_xi_from_derivatives(sigma * grid.hbar_eff, momentum_width(xi, grid.hbar_eff),
                                               grid.hbar_eff, d1, d2)
    base = regular_1d_prediction(gamma, xi_rate, 1.0, s.times).M_pred
    sel = (s.times >= c0_window[0]) & (s.times <= c0_window[1])
    c0 = float(np.exp(np.mean(np.log(s.M[sel] / base[sel]))))
    pred = regular_1d_prediction(gamma, xi_rate, c0, s.times)
    res = FigureResult("regular_orbit")
    res.series["echo"] = s
    res.series["prediction"] = pred.as_series()
    after = s.times >= c0_window[0]
    ratio = s.M[after] / pred.M_pred[after]
    res.summary.update(Gamma=gamma, xi_rate=xi_rate, c0=c0, derivatives_consistent=consistent,
                       min_ratio=float(ratio.min()), max_ratio=float(ratio.max()))
    return res


# Ising


def ising_reference(lambda0, lam, times, n_modes=100_000) -> np.ndarray:
    """Large-N_p limit of ln M / N_p, the reference curve for D and collapse."""
    return ising_log_echo_per_spin_limit(lambda0, lam, times, n_modes)


def first_minimum_time(lambda0, lam, t_max=800.0, dt=0.25, n_modes=20_000) -> float:
    """First local minimum of the large-N_p ln M / N_p (end of the exponential stage)."""
    t = np.arange(0.0, t_max + dt / 2, dt)
    r = ising_reference(lambda0, lam, t, n_modes)
    rising = np.nonzero(np.diff(r) > 0)[0]
    if rising.size == 0:
        raise WindowError(f"no minimum before t = {t_max}")
    return float(t[rising[0]])


def fig8(N_ps=(25, 400, 800, 1600), lambda0=0.96, lam=0.99, t_max=40.0, window=None, mapper=map):
    """Scaling of ln M / N_p; collapse of the large chains and the N_p = 25 outlier."""
    res = FigureResult("fig8")
    times = np.arange(0.0, t_max + 1e-9, default_time_step(lam))
    if window is None:
        window = (0.0, first_minimum_time(lambda0, lam))
    curves = []
    for n, s in zip(N_ps, mapper(ising_task, [(n, lambda0, lam, times) for n in N_ps])):
        res.series[f"echo_Np{n}"] = s
        curves.append((n, s))
    sel = (times >= window[0]) & (times <= window[1])
    large = [c for c in curves if c[0] >= 100]
    spread = an.scaling_collapse(large, window)
    scale = float(np.mean(np.abs(large[-1][1].log_M[sel] / large[-1][0])))
    res.summary.update(window=list(window), spread_large=spread, window_mean=scale,
                       relative_spread=spread / scale)
    small = [c for c in curves if c[0] < 100]
    if small:
        res.summary["spread_with_small"] = an.scaling_collapse(small + large, window)
        res.summary["small_ratio"] = res.summary["spread_with_small"] / spread
    return res


def ising_task(args) -> EchoSeries:
    n, lambda0, lam, times = args
    return ising_echo(IsingQuench(n, lambda0, lam), times)


def _D_task(args) -> float:
    n, lambda0, lam, times, pred = args
    s = ising_echo(IsingQuench(n, lambda0, lam), times)
    exact = EchoSeries(times, s.M, logM=s.log_M / n)
    return an.deviation_D(exact, pred, (times[0], times[-1])).D


def ising_D_scan(lambda0, lam, N_ps=tuple(range(5, 302, 2)), dt=0.25, reference="peak", n_modes=100_000, mapper=map):
    """D(N_p) of ln M / N_p against the large-N_p limit over [0, t_min]."""
    t_min = first_minimum_time(lambda0, lam)
    times = np.arange(0.0, t_min + 1e-9, dt)
    ref = ising_reference(lambda0, lam, times, n_modes)
    pred = EchoSeries(times, np.ones_like(times), logM=ref)
    Ds = mapper(_D_task, [(n, lambda0, lam, times, pred) for n in N_ps])
    rows = list(zip(N_ps, Ds))
    return t_min, an.detect_threshold(rows, reference=reference)


def fig9(lambda0=0.96, lam=0.99, N_ps=tuple(range(5, 302, 2)), mapper=map):
    res = FigureResult("fig9")
    t_min, scan = ising_D_scan(lambda0, lam, N_ps, mapper=mapper)
    res.rows = [{"N_p": int(c), "D": float(d)} for c, d in zip(scan.controls, scan.D)]
    res.series["D"] = EchoSeries(scan.controls, scan.D, metadata={"quantity": "D", "lambda0": lambda0, "lambda": lam})
    res.summary.update(t_min=t_min, N_d=scan.detected, D_threshold=scan.threshold)
    return res


def fig10(delta_lambdas=(0.005, 0.01, 0.02, 0.04), N_ps=tuple(range(5, 302, 2)), mapper=map):
    """N_d against the distance to the critical point; lambda0 = 1 - d, lambda = 1 - 2d."""
    from .ising import breakdown_estimate

    res = FigureResult("fig10")
    for d in delta_lambdas:
        t_min, scan = ising_D_scan(1.0 - d, 1.0 - 2.0 * d, N_ps, mapper=mapper)
        res.series[f"D_dl{d}"] = EchoSeries(scan.controls, scan.D, metadata={"quantity": "D", "delta_lambda": d})
        res.rows.append({"delta_lambda": d, "N_d": scan.detected, "estimate": breakdown_estimate(d), "t_min": t_min,
                         "D_threshold": scan.threshold})
    return res


FIGURES = {
    "fig1": fig1,
    "fig2": fig2,
    "fig3": fig3_4,
    "fig4": fig3_4,
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig8": fig8,
    "fig9": fig9,
    "fig10": fig10,
}
