"""Command line entry point: ``loschmidt <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import apply_overrides, load_file, load_recipe, validate
from .errors import ConfigError, LoschmidtError
from .runner import fit_file, report, run


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config file; flags override its values")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (dotted for nested, e.g. params.n_states=200)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: $LOSCHMIDT_OUTPUT_DIR or ./loschmidt_out)")
    p.add_argument("--workers", type=int)
    p.add_argument("--force", action="store_true", help="overwrite existing output files")


def _floats(text):
    return [float(x) for x in text.split(",")]


def _ints(text):
    return [int(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loschmidt", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("echo-kicked", help="ensemble echo of a kicked map")
    _common(p)
    p.add_argument("--model", choices=["sawtooth", "rotator"])
    p.add_argument("--K", type=float)
    p.add_argument("--sigma", type=_floats, help="comma list")
    p.add_argument("--N", type=_ints, help="comma list of Hilbert dimensions")
    p.add_argument("--n-states", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--xi", type=float)

    p = sub.add_parser("oracle-classical", help="classical oracles: correlation, lyapunov, lambda1, action-distribution")
    _common(p)
    p.add_argument("quantity", choices=["correlation", "lyapunov", "lambda1", "action-distribution"])
    p.add_argument("--model", choices=["sawtooth", "rotator"])
    p.add_argument("--K", type=float)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--t-max", type=int)

    p = sub.add_parser("echo-ising", help="transverse-field Ising survival probability")
    _common(p)
    p.add_argument("--Np", type=_ints, help="comma list of spin counts")
    p.add_argument("--lambda0", type=float)
    p.add_argument("--lam", type=float, help="evolving field lambda")
    p.add_argument("--t-max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--boundary", choices=["antiperiodic", "periodic"])
    p.add_argument("--ed", action="store_true", help="also write the exact-diagonalization oracle (N_p <= 12)")

    p = sub.add_parser("scan", help="D scan and threshold detection")
    _common(p)
    p.add_argument("scan", choices=["kicked-lyapunov", "ising-D"])
    p.add_argument("--N", type=_ints)
    p.add_argument("--Np", type=_ints)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda0", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--D-threshold", type=float)
    p.add_argument("--reference", choices=["high", "peak"])

    p = sub.add_parser("fit", help="exponential fit of a series CSV")
    p.add_argument("input")
    p.add_argument("--window", type=float, nargs=2, required=True, metavar=("T_START", "T_END"))
    p.add_argument("--predicted-rate", type=float)

    p = sub.add_parser("report", help="tables and gnuplot data from a manifest")
    p.add_argument("manifest")
    p.add_argument("--out")

    p = sub.add_parser("recipe", help="run a bundled figure recipe (fig1 ... fig10)")
    _common(p)
    p.add_argument("name")
    return ap


FLAG_KEYS = {
    "model": "params.model", "K": "params.K", "sigma": "params.sigma", "N": "params.N", "n_states": "params.n_states",
    "t_max": "params.t_max", "xi": "params.xi", "n_traj": "params.n_traj", "n_samples": "params.n_samples",
    "Np": "params.N_p", "lambda0": "params.lambda0", "lam": "params.lambda", "dt": "params.dt",
    "boundary": "params.boundary", "D_threshold": "params.D_threshold", "reference": "params.reference",
    "seed": "seed", "workers": "workers",
}

KIND_OF = {"echo-kicked": "kicked-echo", "oracle-classical": "classical-oracle", "echo-ising": "ising-echo",
           "scan": "scan"}


def _flag_overrides(args) -> list:
    pairs = []
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            pairs.append((key, v))
    if getattr(args, "ed", False):
        pairs.append(("params.ed", True))
    return pairs


def resolve_config(args):
    if args.command == "recipe":
        raw = load_recipe(args.name)
    else:
        raw = {"kind": KIND_OF[args.command], "params": {}}
    if args.config:
        raw = apply_overrides(raw, list(_flatten(load_file(args.config))))
    if args.command == "oracle-classical":
        raw = apply_overrides(raw, [("params.quantity", args.quantity)])
    if args.command == "scan":
        raw = apply_overrides(raw, [("params.scan", args.scan)])
    raw = apply_overrides(raw, args.set)
    raw = apply_overrides(raw, _flag_overrides(args))
    return validate(raw)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and v:
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "fit":
            print(json.dumps(fit_file(args.input, args.window, args.predicted_rate), indent=2))
            return 0
        if args.command == "report":
            print(report(args.manifest, args.out), end="")
            return 0
        cfg = resolve_config(args)
        manifest = run(cfg, force=args.force, output_dir=args.out)
        print(manifest)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileExistsError as e:
        print(f"refusing to overwrite: {e}", file=sys.stderr)
        return 3
    except LoschmidtError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
