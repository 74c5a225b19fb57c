"""Time series of echo values and their CSV form.

CSV layout: ``# key=value`` metadata lines (values JSON-encoded), a header
row ``t,M,stderr``, then one row per time.  Floats are written with 17
significant digits so files round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class EchoSeries:
    times: np.ndarray
    M: np.ndarray
    stderr: np.ndarray | None = None
    ensemble_size: int = 1
    metadata: dict = field(default_factory=dict)
    logM: np.ndarray | None = None  # exact ln M when M itself may underflow

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.M = np.asarray(self.M, dtype=np.float64)
        if self.stderr is None:
            self.stderr = np.zeros_like(self.M)
        else:
            self.stderr = np.asarray(self.stderr, dtype=np.float64)
        if not (self.times.shape == self.M.shape == self.stderr.shape):
            raise ValueError("times, M and stderr must have equal length")
        if self.logM is not None:
            self.logM = np.asarray(self.logM, dtype=np.float64)

    def __len__(self):
        return len(self.times)

    @property
    def log_M(self) -> np.ndarray:
        if self.logM is not None:
            return self.logM
        with np.errstate(divide="ignore"):
            return np.log(self.M)

    def window(self, t_start, t_end) -> "EchoSeries":
        sel = (self.times >= t_start) & (self.times <= t_end)
        logM = None if self.logM is None else self.logM[sel]
        return EchoSeries(self.times[sel], self.M[sel], self.stderr[sel], self.ensemble_size, dict(self.metadata), logM)


def _encode(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        value = value.tolist()
    return json.dumps(value, sort_keys=True)


def _decode(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def format_metadata(metadata: dict) -> list[str]:
    return [f"# {key}={_encode(metadata[key])}" for key in sorted(metadata)]


def write_series(path, series: EchoSeries, extra: dict | None = None) -> Path:
    path = Path(path)
    meta = {"schema": SCHEMA_VERSION, "ensemble_size": int(series.ensemble_size)}
    meta.update(series.metadata)
    if extra:
        meta.update(extra)
    integer_times = np.issubdtype(series.times.dtype, np.integer)
    lines = format_metadata(meta)
    lines.append("t,M,stderr")
    for t, m, s in zip(series.times, series.M, series.stderr):
        ts = str(int(t)) if integer_times else f"{t:.17g}"
        lines.append(f"{ts},{m:.17g},{s:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_series(path) -> EchoSeries:
    meta = {}
    rows = []
    header_seen = False
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = _decode(value)
        elif not header_seen:
            header_seen = True
        elif line.strip():
            rows.append(line.split(","))
    if not rows:
        return EchoSeries(np.zeros(0), np.zeros(0), ensemble_size=int(meta.get("ensemble_size", 0)), metadata=meta)
    cols = list(zip(*rows))
    if all("." not in t and "e" not in t.lower() for t in cols[0]):
        times = np.array([int(t) for t in cols[0]])
    else:
        times = np.array([float(t) for t in cols[0]])
    M = np.array([float(x) for x in cols[1]])
    stderr = np.array([float(x) for x in cols[2]])
    ens = int(meta.pop("ensemble_size", 1))
    meta.pop("schema", None)
    return EchoSeries(times, M, stderr, ens, meta)


def write_columns(path, metadata: dict, header: list[str], columns: list[np.ndarray]) -> Path:
    """Generic CSV with the same metadata header (histograms, correlations)."""
    path = Path(path)
    lines = format_metadata({"schema": SCHEMA_VERSION, **metadata})
    lines.append(",".join(header))
    for row in zip(*columns):
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
