"""Command-line runner.

    quincunx run [CONFIG] [--alpha A] [--d D] [--steps N] [--g G ...] ...
    quincunx validate [CONFIG] [...]
    quincunx dump-dist [CONFIG] --step M [...]
    quincunx sweep [CONFIG] [--g G ...] [--at-step M] [...]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from .experiment import (
    SWEEP_G_VALUES,
    ConfigError,
    build_spec,
    curve_label,
    emit_csv,
    emit_distributions,
    run_experiment,
)
from .hilbert import validate_lattice
from .lindblad import NumericalInstabilityError
from .measurement import GridError

# flag -> config key
OVERRIDES = {
    "alpha": "alpha",
    "d": "d",
    "steps": "steps",
    "g": "g_values",
    "seed": "seed",
    "substeps": "substeps",
    "out": "outputs",
    "rw_mode": "rw_mode",
    "n_traj": "n_traj",
    "angle": "quadrature_angle",
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="YAML/JSON key-value config file")
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--g", type=float, action="append",
                   help="loss rate; repeat for several curves")
    p.add_argument("--seed", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--rw-mode", dest="rw_mode", choices=("ensemble", "monte_carlo"))
    p.add_argument("--n-traj", dest="n_traj", type=int)
    p.add_argument("--angle", type=float, help="quadrature angle in radians")
    p.add_argument("--allow-invalid-lattice", action="store_true",
                   help="run even if the lattice bounds fail (recorded in provenance)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quincunx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="compute QW, RW and lossy-QW curves and write CSV"))
    _common(sub.add_parser("validate", help="print the lattice validity report"))
    p = sub.add_parser("dump-dist", help="write QPD and phase distributions at one step")
    _common(p)
    p.add_argument("--step", type=int, required=True)
    p = sub.add_parser("sweep", help="run over a set of loss rates")
    _common(p)
    p.add_argument("--at-step", type=int, default=10,
                   help="step at which to report the variance ordering")
    return parser


def _load_values(args) -> dict:
    values = {}
    if args.config:
        text = Path(args.config).read_text()
        data = yaml.safe_load(text) if text.strip() else {}
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a key-value mapping")
        values.update(data)
    for flag, key in OVERRIDES.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[key] = val
    if args.allow_invalid_lattice:
        values["allow_invalid_lattice"] = True
    return values


def cmd_validate(args) -> int:
    spec = build_spec({**_load_values(args), "allow_invalid_lattice": True})
    report = validate_lattice(spec.lattice)
    print(report)
    return 0 if report.passed else 1


def cmd_run(args) -> int:
    spec = build_spec(_load_values(args))
    bundle = run_experiment(spec)
    for path in emit_csv(bundle):
        print(f"wrote {path}")
    return 0


def cmd_dump(args) -> int:
    spec = build_spec(_load_values(args))
    bundle = run_experiment(spec)
    for path in emit_distributions(bundle, args.step):
        print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    values = _load_values(args)
    values.setdefault("g_values", list(SWEEP_G_VALUES))
    spec = build_spec(values)
    if not 0 <= args.at_step <= spec.steps:
        raise ConfigError(f"--at-step {args.at_step} outside 0..{spec.steps}")
    bundle = run_experiment(spec)
    for path in emit_csv(bundle):
        print(f"wrote {path}")
    m = args.at_step
    print(f"variance at step {m}:")
    for label in bundle.labels:
        print(f"  {label:>12s}  {bundle.variances[label][m]:.10g}")
    qw = [bundle.variances[curve_label(g)][m] for g in sorted(set(spec.g_values))]
    ordered = bool(np.all(np.diff(qw) <= 0))
    print("monotone nonincreasing in g:", "yes" if ordered else "no")
    return 0


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "dump-dist": cmd_dump, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NumericalInstabilityError as exc:
        print(f"error: numerical instability at {exc}", file=sys.stderr)
    except (ConfigError, GridError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
