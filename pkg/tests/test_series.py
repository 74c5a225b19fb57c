import numpy as np
import pytest

from loschmidt.series import EchoSeries, read_series, write_columns, write_series


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    s = EchoSeries(np.arange(6), rng.random(6), rng.random(6) * 1e-3, 40, {"model": "sawtooth", "K": 2.0, "N": 64})
    p = write_series(tmp_path / "a.csv", s, {"code_version": "x"})
    back = read_series(p)
    assert np.array_equal(back.times, s.times) and back.times.dtype.kind == "i"
    assert np.array_equal(back.M, s.M) and np.array_equal(back.stderr, s.stderr)
    assert back.ensemble_size == 40
    assert back.metadata["K"] == 2.0 and back.metadata["code_version"] == "x"


def test_float_times_round_trip(tmp_path):
    t = np.arange(5) * 0.1
    s = EchoSeries(t, np.exp(-t))
    back = read_series(write_series(tmp_path / "b.csv", s))
    assert np.array_equal(back.times, t)


def test_length_mismatch():
    with pytest.raises(ValueError):
        EchoSeries(np.arange(3), np.ones(4))


def test_window_and_logm():
    s = EchoSeries(np.arange(10), np.zeros(10), logM=-np.arange(10.0))
    w = s.window(2, 5)
    assert list(w.times) == [2, 3, 4, 5]
    assert np.array_equal(w.log_M, [-2, -3, -4, -5])


def test_columns_file(tmp_path):
    p = write_columns(tmp_path / "c.csv", {"quantity": "C"}, ["l", "C"], [np.arange(3), np.array([1.0, 0.5, 0.25])])
    lines = p.read_text().splitlines()
    assert lines[-1] == "2,0.25"
    assert any(line.startswith("# quantity=") for line in lines)
