import numpy as np
import pytest

from loschmidt import analysis as an
from loschmidt.errors import DomainError, InterpolationError, WindowError
from loschmidt.series import EchoSeries


def series(t, M):
    return EchoSeries(np.asarray(t), np.asarray(M, dtype=float))


T = np.arange(0, 41)


def test_fit_exact_exponential():
    fit = an.fit_exponential(series(T, np.exp(-0.5 * T)), (2, 20))
    assert fit.rate == pytest.approx(0.5, abs=1e-10)
    assert fit.n_points == 19 and fit.rms_residual < 1e-12


def test_fit_constant_and_errors():
    assert an.fit_exponential(series(T, np.ones(41)), (0, 10)).rate == pytest.approx(0, abs=1e-14)
    with pytest.raises(WindowError):
        an.fit_exponential(series(T, np.ones(41)), (5, 5))
    with pytest.raises(WindowError):
        an.fit_exponential(series(T, np.ones(41)), (0, 2))
    M = np.exp(-0.1 * T)
    M[4] = 0
    with pytest.raises(WindowError):
        an.fit_exponential(series(T, M), (0, 10))


def test_deviation_metric():
    s = series(T, np.exp(-0.3 * T))
    assert an.deviation_D(s, s, (0, 40)).D == 0
    shifted = series(T, np.exp(-0.3 * T - 1.0))
    assert an.deviation_D(s, shifted, (0, 40)).D == pytest.approx(0, abs=1e-14)
    noisy = series(T, np.exp(-0.3 * T + 0.1 * (-1.0) ** T))
    assert an.deviation_D(noisy, s, (0, 39)).D == pytest.approx(0.0, abs=1e-12)  # |x| constant
    kink = series(T, np.exp(-0.3 * T + np.where(T > 20, 1.0, 0.0)))
    d = an.deviation_D(kink, s, (0, 40))
    # x is 0 on 21 points and 1 on 20
    assert d.D == pytest.approx(np.std([0] * 21 + [1] * 20))


def test_deviation_per_spin_and_interpolation():
    t = np.linspace(0, 4, 9)
    exact = EchoSeries(t, np.ones(9), logM=-np.where(t > 2, 5.0, 0.0), metadata={"N_p": 5})
    pred = EchoSeries(t, np.ones(9))
    assert an.deviation_D(exact, pred, (0, 4), "perSpin").D == pytest.approx(an.deviation_D(exact, pred, (0, 4)).D / 5)
    coarse = EchoSeries(np.linspace(0, 3, 4), np.ones(4))
    with pytest.raises(InterpolationError):
        an.deviation_D(exact, coarse, (0, 4))


def test_detect_td():
    fgr = series(T, np.exp(-0.2 * T))
    assert an.detect_td(fgr, fgr) is None
    kink = series(T, np.exp(-0.2 * T - np.where(T >= 20, 1.0, 0.0)))
    assert an.detect_td(kink, fgr) == 20
    # a single spike is not sustained
    spike = series(T, np.exp(-0.2 * T - np.where(T == 10, 1.0, 0.0)))
    assert an.detect_td(spike, fgr) is None


def test_t_n_formula():
    assert an.t_n_formula(1024, 0.2) == pytest.approx(80.0, abs=0.1)
    s = 0.7
    assert an.t_n_formula(np.exp(s**2 * np.pi**4 / 45), s) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        an.t_n_formula(64, 0.0)
    # general form reduces to it for the sawtooth diffusion constant
    assert an.saturation_time_fgr(1024, 0.2, np.pi**4 / 90) == pytest.approx(an.t_n_formula(1024, 0.2))


def test_threshold_step_profile():
    Ns = [16, 24, 32, 48, 64, 96, 128, 256, 512]
    D = [1.0 if n < 64 else 0.05 for n in Ns]
    res = an.detect_threshold(list(zip(Ns, D)))
    assert res.detected == 64
    assert an.detect_threshold(list(zip(Ns, D)), reference="peak").detected == 64
    assert an.detect_threshold(list(zip(Ns, D)), D_threshold=0.5).detected == 64


def test_threshold_invariant_under_monotone_relabel():
    Ns = np.array([16, 24, 32, 48, 64, 96, 128, 256, 512])
    D = np.where(Ns < 64, 1.0, 0.05)
    a = an.detect_threshold(list(zip(Ns, D)))
    b = an.detect_threshold(list(zip(np.log2(Ns), D)))
    assert np.log2(a.detected) == pytest.approx(b.detected)


def test_threshold_none_detected():
    Ns = [1, 2, 3, 4]
    assert an.detect_threshold(list(zip(Ns, [1, 1, 1, 1])), D_threshold=0.5).detected is None
    assert an.detect_threshold(list(zip(Ns, [0.1] * 4)), D_threshold=0.5).detected is None
    with pytest.raises(ValueError):
        an.detect_threshold([(1, 1), (2, 1)])
    with pytest.raises(ValueError):
        an.detect_threshold([(1, 1), (3, 1), (2, 1)])


def test_saturation_check():
    mean, ratio = an.saturation_check(series(T, np.full(41, 1 / 64)), 64, (10, 40))
    assert ratio == pytest.approx(1.0)


def test_scaling_collapse():
    t = np.linspace(0, 10, 41)
    a = EchoSeries(t, np.ones(41), logM=-0.2 * 400 * t)
    b = EchoSeries(t, np.ones(41), logM=-0.2 * 800 * t)
    assert an.scaling_collapse([(400, a), (800, b)], (0, 10)) == pytest.approx(0, abs=1e-14)
    c = EchoSeries(t + 20, np.ones(41), logM=-t)
    with pytest.raises(WindowError):
        an.scaling_collapse([(400, a), (800, c)], (0, 10))


def test_window_helpers():
    M = np.exp(-np.maximum(T - 5, 0) * 0.4)
    s = series(T, M)
    assert an.decay_onset(s, 0.5) == 7
    assert an.lyapunov_window(s, 4, 0.5) == (7, 10)
    assert an.saturation_time(s, 100, 2.0) == 5 + int(np.ceil(np.log(50) / 0.4))
    start, end = an.suggest_fgr_window(s, 100, 0.5, 0.1, t_d=12)
    assert (start, end) == (7, 12)
    assert an.suggest_fgr_window(s, 100, 0.5, 1.0)[1] == pytest.approx(0.8 * np.log(100) / 0.5)
    with pytest.raises(WindowError):
        an.lyapunov_window(series(T, np.ones(41)))
