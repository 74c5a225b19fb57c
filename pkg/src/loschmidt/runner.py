"""Runs validated configs, writes CSV series and a JSON manifest.

Parallelism lives here only.  Work is split into independent tasks
(parameter point x block of ensemble members, or one parameter point for
the figure recipes) and mapped over a process pool; ``Executor.map``
returns results in task-index order, so reductions never depend on
scheduling.  Randomness: packet centres for a kicked run are drawn once
from ``numpy.random.default_rng(seed)`` (PCG64) before the split, so the
block structure cannot change them; tasks that need their own streams
(classical sampling) get ``SeedSequence(seed).spawn(n)[task_index]``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import classical as cl
from . import experiments as ex
from .config import ExperimentConfig, default_output_dir
from .errors import ConfigError, MissingInputError
from .ising import IsingQuench, ed_oracle_echo, ising_echo, time_grid
from .maps import _CHUNK, draw_centers, member_echoes, reduce_members, _metadata
from .models import KickedModel
from .series import SCHEMA_VERSION, EchoSeries, read_series, write_columns, write_series
from .torus import make_grid

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


@contextmanager
def worker_map(workers: int):
    """Yields an order-preserving map; a process pool when workers > 1."""
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool.map


def task_seeds(seed: int, n: int) -> list[int]:
    """Independent per-task seeds from one root seed (SeedSequence spawning)."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


class OutputSet:
    """Collects files for one run; refuses to overwrite unless forced."""

    def __init__(self, root: Path, config: ExperimentConfig, force: bool = False):
        self.root = Path(root)
        self.config = config
        self.force = force
        self.entries = []
        self.tables = {}
        self.provenance = {"config": json.dumps(config.resolved(), sort_keys=True), "code_version": __version__}

    def _target(self, name: str) -> Path:
        path = self.root / name
        if path.exists() and not self.force:
            raise FileExistsError(f"{path} exists; pass --force to overwrite")
        return path

    def check(self, names):
        for n in list(names) + [MANIFEST]:
            self._target(n)

    def series(self, name: str, s: EchoSeries, kind: str = "echo"):
        fname = f"{name}.csv"
        write_series(self._target(fname), s, self.provenance)
        self.entries.append({"name": name, "file": fname, "kind": kind, "metadata": _jsonable(s.metadata)})

    def columns(self, name: str, meta: dict, header, cols, kind: str):
        fname = f"{name}.csv"
        write_columns(self._target(fname), {**meta, **self.provenance}, header, cols)
        self.entries.append({"name": name, "file": fname, "kind": kind, "metadata": _jsonable(meta)})

    def table(self, name: str, rows, summary=None):
        self.tables[name] = {"rows": _jsonable(rows), "summary": _jsonable(summary or {})}

    def finish(self) -> Path:
        manifest = {
            "schema": SCHEMA_VERSION,
            "code_version": __version__,
            "config": self.config.resolved(),
            "runs": self.entries,
            "tables": self.tables,
        }
        path = self._target(MANIFEST)
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _member_task(args):
    kind, K, sigma, N, centers, t_max, xi = args
    return member_echoes(KickedModel(kind, K), sigma, make_grid(N), centers, t_max, xi)


def run_kicked(cfg: ExperimentConfig, out: OutputSet, mapper):
    p = cfg.params
    model = KickedModel(p["model"], float(p["K"]))
    n_states = int(p.get("n_states", 100))
    t_max = int(p.get("t_max", 50))
    points = [(N, float(s)) for N in _as_list(p.get("N", [256])) for s in _as_list(p.get("sigma", [0.5]))]
    out.check(f"echo_{model.kind.value}_N{N}_sigma{s}.csv" for N, s in points)
    centers = draw_centers(n_states, cfg.seed)
    blocks = [centers[i:i + _CHUNK] for i in range(0, n_states, _CHUNK)]
    tasks = []
    for N, s in points:
        xi = p.get("xi")
        xi = float(np.sqrt(make_grid(N).hbar_eff)) if xi is None else float(xi)
        tasks += [(model.kind.value, model.K, s, N, b, t_max, xi) for b in blocks]
    results = list(mapper(_member_task, tasks))
    nb = len(blocks)
    for i, (N, s) in enumerate(points):
        M = np.concatenate(results[i * nb:(i + 1) * nb], axis=0)
        mean, err = reduce_members(M)
        xi = tasks[i * nb][-1]
        meta = _metadata(model, s, make_grid(N), xi, seed=cfg.seed)
        out.series(f"echo_{model.kind.value}_N{N}_sigma{s}", EchoSeries(np.arange(t_max + 1), mean, err, n_states, meta))


def run_ising(cfg: ExperimentConfig, out: OutputSet, mapper):
    p = cfg.params
    l0, lam = float(p["lambda0"]), float(p["lambda"])
    times = time_grid(lam, float(p.get("t_max", 40.0)), p.get("dt"))
    boundary = p.get("boundary", "antiperiodic")
    sizes = [int(n) for n in _as_list(p.get("N_p", [25]))]
    out.check(f"ising_Np{n}.csv" for n in sizes)
    series = list(mapper(_ising_task, [(n, l0, lam, times, boundary) for n in sizes]))
    for n, s in zip(sizes, series):
        out.series(f"ising_Np{n}", s)
    if p.get("ed"):
        for n in sizes:
            out.series(f"ising_ed_Np{n}", ed_oracle_echo(IsingQuench(n, l0, lam), times), kind="oracle")


def _ising_task(args):
    n, l0, lam, times, boundary = args
    return ising_echo(IsingQuench(n, l0, lam, boundary), times)


def run_classical(cfg: ExperimentConfig, out: OutputSet, mapper):
    p = cfg.params
    q = p["quantity"]
    model = p.get("model", "sawtooth")
    K = float(p.get("K", 2.0))
    seed = cfg.seed
    if q == "correlation":
        corr = cl.potential_correlation(model, K, int(p.get("l_max", 20)), int(p.get("n_samples", 200)), seed,
                                        int(p.get("traj_len", 10_000)))
        R = cl.action_diffusion(corr)
        meta = {"quantity": "C(l)", "model": model, "K": K, "n_samples": corr.n_samples, "seed": seed,
                "R": R.value, "R_stderr": R.stderr}
        out.columns(f"correlation_{model}_K{K}", meta, ["l", "C", "stderr"],
                    [np.arange(len(corr.C)), corr.C, corr.stderr], "correlation")
        out.table("correlation", [], {"C0": float(corr.C[0]), "R": R.value, "R_stderr": R.stderr})
    elif q == "lyapunov":
        Ks = _as_list(p.get("K", [1.0, 2.0]))
        seeds = task_seeds(seed, len(Ks))
        rows = []
        for k, s in zip(Ks, seeds):
            est = cl.lyapunov_exponent(model, float(k), int(p.get("n_traj", 100)), int(p.get("t_max", 1000)), s)
            row = {"K": float(k), "lambda_L": est.value, "stderr": est.stderr, "warning": est.warning}
            if model == "sawtooth":
                row["formula"] = cl.sawtooth_lyapunov(float(k))
            rows.append(row)
        out.table("lyapunov", rows)
        out.columns(f"lyapunov_{model}", {"quantity": "lambda_L", "model": model, "seed": seed},
                    ["K", "lambda_L", "stderr"], [[r["K"] for r in rows], [r["lambda_L"] for r in rows],
                                                   [r["stderr"] for r in rows]], "lyapunov")
    elif q == "lambda1":
        L = cl.lambda1_of_t(model, K, int(p.get("n_traj", 10**5)), int(p.get("t_max", 20)), seed)
        out.series(f"lambda1_{model}_K{K}", EchoSeries(L.times, L.values, metadata={
            "quantity": "Lambda_1", "model": model, "K": K, "n_traj": L.n_traj, "seed": seed}), kind="lambda1")
    elif q == "action-distribution":
        N = int(p.get("N", 1024))
        hbar = make_grid(N).hbar_eff
        sigma = float(p.get("sigma", 0.5))
        rows = []
        for t in _as_list(p.get("t", list(range(1, 11)))):
            h = cl.action_difference_distribution(model, K, sigma, hbar, None, int(t), int(p.get("n_samples", 10**6)), seed)
            Msc = cl.semiclassical_echo_from_distribution(h, hbar)
            rows.append({"t": int(t), "M_sc": Msc, "mean": h.mean, "variance": h.variance})
            out.columns(f"action_hist_t{t}", {"quantity": "P(dS)", "model": model, "K": K, "sigma": sigma, "N": N,
                                               "t": int(t), "mean": h.mean, "variance": h.variance, "seed": seed},
                        ["dS", "P"], [0.5 * (h.edges[:-1] + h.edges[1:]), h.probability], "histogram")
        out.table("action_distribution", rows)


def run_scan(cfg: ExperimentConfig, out: OutputSet, mapper):
    p = cfg.params
    if p["scan"] == "kicked-lyapunov":
        res = ex.lyapunov_scan(tuple(_as_list(p.get("N", [16, 32, 64, 128, 256]))), float(p.get("K", 2.0)),
                               float(p.get("sigma", 3.0)), int(p.get("n_states", 300)), cfg.seed,
                               int(p.get("t_max", 12)), mapper=mapper)
        rows = [(r["N"], r["D"]) for r in res.rows]
        control = "N"
    else:
        t_min, scan = ex.ising_D_scan(float(p["lambda0"]), float(p["lambda"]),
                                      tuple(_as_list(p.get("N_p", list(range(5, 302, 2))))), mapper=mapper)
        rows = list(zip(scan.controls, scan.D))
        control = "N_p"
    ref = p.get("reference", "high" if p["scan"] == "kicked-lyapunov" else "peak")
    scan = an.detect_threshold(rows, p.get("D_threshold"), reference=ref)
    out.columns(f"scan_{p['scan']}", {"quantity": "D", "control": control, "threshold": scan.threshold,
                                      "detected": scan.detected}, [control, "D"], [scan.controls, scan.D], "scan")
    out.table("scan", [{control: c, "D": d} for c, d in scan.as_rows()],
              {"threshold": scan.threshold, "detected": scan.detected, "reference": ref})


def run_figure(cfg: ExperimentConfig, out: OutputSet, mapper):
    p = dict(cfg.params)
    name = p.pop("figure")
    fn = ex.FIGURES[name]
    kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in p.items()}
    if "seed" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
        kwargs["seed"] = cfg.seed
    res = fn(mapper=mapper, **kwargs)
    out.check(f"{name}_{k}.csv" for k in res.series)
    for key, s in res.series.items():
        out.series(f"{name}_{key}", s, kind="prediction" if key.startswith("prediction") else "echo")
    out.table(name, res.rows, res.summary)


RUNNERS = {
    "kicked-echo": run_kicked,
    "ising-echo": run_ising,
    "classical-oracle": run_classical,
    "scan": run_scan,
    "figure": run_figure,
}


def run(cfg: ExperimentConfig, force: bool = False, output_dir=None) -> Path:
    """Executes the config; returns the manifest path."""
    if cfg.kind not in RUNNERS:
        raise ConfigError("kind", f"{cfg.kind!r} is not a runnable experiment")
    root = Path(output_dir or cfg.output_dir or default_output_dir())
    root.mkdir(parents=True, exist_ok=True)
    out = OutputSet(root, cfg, force)
    out.check([])
    with worker_map(cfg.workers) as mapper:
        RUNNERS[cfg.kind](cfg, out, mapper)
    return out.finish()


# fitting and reporting


def fit_file(path, window, predicted_rate=None) -> dict:
    s = read_series(path)
    f = an.fit_exponential(s, tuple(window))
    rec = {"file": str(path), "rate": f.rate, "intercept": f.intercept, "window": list(f.window),
           "rms_residual": f.rms_residual, "n_points": f.n_points}
    if predicted_rate:
        rec["predicted_rate"] = predicted_rate
        rec["rel_error"] = f.rate / predicted_rate - 1.0
    return rec


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


REPORT_COLUMNS = {
    "fig1": ["N", "first_rate", "predicted_rate", "rel_error", "t_d", "first_window"],
    "fig2": ["N", "onset", "t_d", "t_n_formula", "first_rate", "second_rate", "second_faster"],
    "fig3_4": ["N", "window", "rate", "lambda_L", "rel_error", "D"],
    "fig5": ["sigma", "N_c", "D_threshold"],
    "fig6": ["N", "first_rate", "predicted_rate", "second_rate", "second_faster", "t_d"],
    "fig7": ["N", "min_ratio", "max_ratio", "max_factor", "saturation_time"],
    "fig9": ["N_p", "D"],
    "fig10": ["delta_lambda", "N_d", "estimate", "t_min"],
}


def format_table(name: str, rows: list, summary: dict) -> str:
    lines = [f"## {name}"]
    if rows:
        cols = REPORT_COLUMNS.get(name) or list(rows[0])
        cols = [c for c in cols if c in rows[0]]
        cells = [cols] + [[_fmt(r.get(c)) for c in cols] for r in rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
        for row in cells:
            lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    for k in sorted(summary):
        lines.append(f"{k}: {_fmt(summary[k])}")
    return "\n".join(lines) + "\n"


def report(manifest_path, out_dir=None) -> str:
    """Summary tables plus two-column (t, M) data files for gnuplot."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise MissingInputError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    out_dir = Path(out_dir) if out_dir else root / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = manifest.get("runs", [])
    tables = manifest.get("tables", {})
    if not runs and not tables:
        warnings.warn("manifest lists no runs; report is empty", RuntimeWarning, stacklevel=2)
    text = []
    for entry in runs:
        src = root / entry["file"]
        if not src.exists():
            raise MissingInputError(f"series listed in manifest is missing: {src}")
        if entry["kind"] in ("echo", "prediction", "oracle", "lambda1"):
            s = read_series(src)
            body = "\n".join(f"{t:.17g} {m:.17g}" for t, m in zip(s.times.astype(float), s.M))
            (out_dir / f"{entry['name']}.dat").write_text(f"# {entry['name']}: t M\n{body}\n")
    for name in sorted(tables):
        text.append(format_table(name, tables[name]["rows"], tables[name]["summary"]))
    summary = "\n".join(text)
    (out_dir / "summary.txt").write_text(summary)
    digest = hashlib.sha256(summary.encode()).hexdigest()[:12]
    log.info("report written to %s (%s)", out_dir, digest)
    return summary
