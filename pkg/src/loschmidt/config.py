"""Experiment configuration: YAML file, then command-line overrides.

A config is a flat mapping with a ``kind`` and a mandatory ``seed``;
nested sections are allowed in the file (``params:`` for figure
recipes).  Overrides use dotted keys (``--set params.n_states=200``) and
always win over the file.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError

OUTPUT_ENV = "LOSCHMIDT_OUTPUT_DIR"
DEFAULT_OUTPUT = "loschmidt_out"

KINDS = ("kicked-echo", "classical-oracle", "ising-echo", "scan", "fit", "report", "figure")
RECIPES = tuple(f"fig{i}" for i in range(1, 11))


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    params: dict = field(default_factory=dict)
    output_dir: str | None = None
    workers: int = 1
    name: str = ""

    def resolved(self) -> dict:
        # worker count is left out: it never changes results
        return {"kind": self.kind, "name": self.name, "seed": self.seed, "params": copy.deepcopy(self.params)}


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def _parse_scalar(text: str):
    return yaml.safe_load(text)


def apply_overrides(raw: dict, overrides) -> dict:
    """Set dotted ``key=value`` pairs (values parsed as YAML scalars/lists)."""
    out = copy.deepcopy(raw)
    for item in overrides or ():
        if isinstance(item, tuple):
            key, value = item
        else:
            key, sep, text = item.partition("=")
            if not sep:
                raise ConfigError(item, "override must look like key=value")
            value = _parse_scalar(text)
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "cannot descend into a non-mapping")
        node[parts[-1]] = value
    return out


def load_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def load_recipe(name: str) -> dict:
    if name not in RECIPES:
        raise ConfigError("recipe", f"unknown recipe {name!r}; available: {', '.join(RECIPES)}")
    text = resources.files("loschmidt").joinpath("recipes", f"{name}.yaml").read_text()
    return yaml.safe_load(text)


def validate(raw: dict) -> ExperimentConfig:
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}, got {kind!r}")
    if "seed" not in raw or raw["seed"] is None:
        raise ConfigError("seed", "a seed is mandatory")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", f"must be a nonnegative integer, got {seed!r}")
    params = raw.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("params", "must be a mapping")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers", f"must be a positive integer, got {workers!r}")
    unknown = set(raw) - {"kind", "seed", "params", "output_dir", "workers", "name"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level field")
    cfg = ExperimentConfig(kind, seed, params, raw.get("output_dir"), workers, raw.get("name", kind))
    _check_params(cfg)
    return cfg


def _list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _positive_ints(field_name, values, minimum=1):
    vals = values if isinstance(values, (list, tuple)) else [values]
    for v in vals:
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigError(field_name, f"entries must be integers >= {minimum}, got {v!r}")


def _check_params(cfg: ExperimentConfig):
    p = cfg.params
    if cfg.kind == "kicked-echo":
        if p.get("model") not in ("sawtooth", "rotator"):
            raise ConfigError("params.model", "must be 'sawtooth' or 'rotator'")
        if not isinstance(p.get("K"), (int, float)):
            raise ConfigError("params.K", "a numeric kick strength is required")
        if p["model"] == "sawtooth" and p["K"] <= 0:
            raise ConfigError("params.K", "sawtooth needs K > 0")
        _positive_ints("params.N", p.get("N", [256]), 2)
        sig = p.get("sigma", [0.5])
        for s in sig if isinstance(sig, (list, tuple)) else [sig]:
            if not isinstance(s, (int, float)) or s < 0:
                raise ConfigError("params.sigma", f"entries must be nonnegative numbers, got {s!r}")
        _positive_ints("params.n_states", p.get("n_states", 100))
        _positive_ints("params.t_max", p.get("t_max", 50))
    elif cfg.kind == "ising-echo":
        _positive_ints("params.N_p", p.get("N_p", [25]))
        for key in ("lambda0", "lambda"):
            if not isinstance(p.get(key), (int, float)):
                raise ConfigError(f"params.{key}", "a numeric field value is required")
        if p.get("ed") and max(_list(p.get("N_p", [25]))) > 12:
            raise ConfigError("params.ed", "exact diagonalization needs every N_p <= 12")
    elif cfg.kind == "figure":
        fig = p.get("figure")
        if fig not in RECIPES:
            raise ConfigError("params.figure", f"must be one of {RECIPES}")
    elif cfg.kind == "scan":
        if p.get("scan") not in ("kicked-lyapunov", "ising-D"):
            raise ConfigError("params.scan", "must be 'kicked-lyapunov' or 'ising-D'")
    elif cfg.kind == "classical-oracle":
        if p.get("quantity") not in ("correlation", "lyapunov", "lambda1", "action-distribution"):
            raise ConfigError("params.quantity", "must be correlation, lyapunov, lambda1 or action-distribution")
