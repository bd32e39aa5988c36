"""Experiment orchestration: config parsing, curve computation and CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .hilbert import LatticeParams, LatticeReport, ModeSpace, coherent_state_truncated, validate_lattice
from .lindblad import run_open_walk
from .measurement import (
    DEFAULT_ANGLE,
    phase_distribution,
    qpd,
    quadrature_moments,
    reduce_field,
)
from .walk import DEFAULT_N_TRAJ, WalkConfig, run_classical_walk, run_ideal_walk

SWEEP_G_VALUES = (0.0, 0.005, 0.01, 0.02, 0.05)
RW_MODES = ("ensemble", "monte_carlo")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    min: float = -12.0
    max: float = 12.0
    points: int = 1201

    def samples(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class ExperimentSpec:
    alpha: float = 5.0
    d: int = 31
    steps: int = 15
    g_values: tuple[float, ...] = (0.0, 0.01)
    rw_mode: str = "ensemble"
    n_traj: int = DEFAULT_N_TRAJ
    seed: int = 42
    substeps: int = 100
    quadrature_angle: float = DEFAULT_ANGLE
    grid: GridSpec = field(default_factory=GridSpec)
    outputs: str = "results"
    allow_invalid_lattice: bool = False

    @property
    def lattice(self) -> LatticeParams:
        return LatticeParams(self.alpha, self.d)

    def echo(self) -> dict:
        out = asdict(self)
        out["g_values"] = list(self.g_values)
        return out


VALID_KEYS = tuple(ExperimentSpec.__dataclass_fields__)


def _coerce_grid(value) -> GridSpec:
    if isinstance(value, GridSpec):
        return value
    if isinstance(value, dict):
        extra = set(value) - {"min", "max", "points"}
        if extra:
            raise ConfigError(f"unknown grid keys {sorted(extra)}; valid: min, max, points")
        g = GridSpec(**{**asdict(GridSpec()), **value})
    elif isinstance(value, (list, tuple)) and len(value) == 3:
        g = GridSpec(*value)
    else:
        raise ConfigError(f"grid must be a mapping or [min, max, points], got {value!r}")
    g = GridSpec(float(g.min), float(g.max), int(g.points))
    if not (g.max > g.min and g.points >= 2):
        raise ConfigError(f"invalid grid {g}")
    return g


def build_spec(values: dict) -> ExperimentSpec:
    """Validate a mapping of config keys into an :class:`ExperimentSpec`."""
    unknown = sorted(set(values) - set(VALID_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; valid keys: {', '.join(VALID_KEYS)}")
    v = dict(values)
    try:
        if "g_values" in v:
            g = v["g_values"]
            g = [g] if isinstance(g, (int, float)) else list(g)
            v["g_values"] = tuple(float(x) for x in g)
        if "grid" in v:
            v["grid"] = _coerce_grid(v["grid"])
        for key, typ in (("alpha", float), ("quadrature_angle", float), ("outputs", str),
                         ("allow_invalid_lattice", bool)):
            if key in v:
                v[key] = typ(v[key])
        for key in ("d", "steps", "n_traj", "seed", "substeps"):
            if key in v:
                if isinstance(v[key], float) and not v[key].is_integer():
                    raise ConfigError(f"{key} must be an integer, got {v[key]}")
                v[key] = int(v[key])
        spec = ExperimentSpec(**v)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    if not spec.g_values:
        raise ConfigError("g_values must be nonempty")
    if any(g < 0 for g in spec.g_values):
        raise ConfigError(f"loss rates must be nonnegative, got {list(spec.g_values)}")
    if spec.rw_mode not in RW_MODES:
        raise ConfigError(f"rw_mode must be one of {RW_MODES}, got {spec.rw_mode!r}")
    if spec.steps < 0 or spec.substeps < 1 or spec.n_traj < 1 or spec.seed < 0:
        raise ConfigError("steps >= 0, substeps >= 1, n_traj >= 1 and seed >= 0 are required")
    if spec.alpha <= 0 or not 1 <= spec.d <= 64:
        raise ConfigError(f"need alpha > 0 and 1 <= d <= 64, got alpha={spec.alpha}, d={spec.d}")
    report = validate_lattice(spec.lattice)
    if not report.passed and not spec.allow_invalid_lattice:
        raise ConfigError(
            f"invalid lattice (set allow_invalid_lattice to override):\n{report}"
        )
    return spec


def parse_config(text: str) -> ExperimentSpec:
    """Parse a YAML (or JSON) key-value document; omitted keys take defaults."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value mapping")
    return build_spec(data)


def curve_label(g: float) -> str:
    return "qw" if g == 0 else f"qw_g={g:g}"


@dataclass
class ResultBundle:
    spec: ExperimentSpec
    report: LatticeReport
    variances: dict[str, np.ndarray]
    phase_dists: dict[str, np.ndarray]
    field_states: dict[str, list[np.ndarray]]
    convergence: dict
    version: str = __version__

    @property
    def labels(self) -> list[str]:
        return list(self.variances)

    def provenance(self) -> list[str]:
        lines = [
            f"quincunx {self.version}",
            "config: " + json.dumps(self.spec.echo(), sort_keys=True),
            "lattice: " + ("valid" if self.report.passed else "INVALID (override set)"),
        ]
        lines += [f"  {c}" for c in self.report.checks]
        lines.append("convergence: " + json.dumps(self.convergence, sort_keys=True))
        return lines


def _curve(states_field, space, angle):
    var = np.array([quadrature_moments(r, angle, space)[1] for r in states_field])
    dist = np.array([phase_distribution(r, space).probabilities for r in states_field])
    return var, dist


def run_experiment(spec: ExperimentSpec) -> ResultBundle:
    """Compute the ideal QW, the RW baseline and one lossy QW per nonzero g."""
    lattice = spec.lattice
    report = validate_lattice(lattice)
    if not report.passed and not spec.allow_invalid_lattice:
        raise ConfigError(f"invalid lattice:\n{report}")
    space = ModeSpace(spec.d)
    psi0 = coherent_state_truncated(space, spec.alpha)
    base = WalkConfig(lattice, spec.steps, 0.0, spec.substeps, spec.seed)

    fields: dict[str, list[np.ndarray]] = {}
    ideal = run_ideal_walk(base, psi0)
    fields["qw"] = [reduce_field(np.outer(s, s.conj())) for s in ideal]
    fields["rw"] = run_classical_walk(base, psi0, mode=spec.rw_mode, n_traj=spec.n_traj)

    convergence = {"substeps": spec.substeps, "lossy_curves": {}}
    for g in spec.g_values:
        if g == 0:
            continue
        cfg = WalkConfig(lattice, spec.steps, g, spec.substeps, spec.seed)
        fields[curve_label(g)] = [reduce_field(r) for r in run_open_walk(cfg, psi0)]
        # Self-convergence at doubled resolution on the final step.
        fine = WalkConfig(lattice, spec.steps, g, 2 * spec.substeps, spec.seed)
        last_fine = reduce_field(run_open_walk(fine, psi0)[-1])
        v_c = quadrature_moments(fields[curve_label(g)][-1], spec.quadrature_angle, space)[1]
        v_f = quadrature_moments(last_fine, spec.quadrature_angle, space)[1]
        convergence["lossy_curves"][curve_label(g)] = float(f"{abs(v_c - v_f):.3e}")

    variances, dists = {}, {}
    for label, states in fields.items():
        variances[label], dists[label] = _curve(states, space, spec.quadrature_angle)
    return ResultBundle(spec, report, variances, dists, fields, convergence)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(header_lines, columns, rows) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def variance_table(bundle: ResultBundle) -> str:
    labels = bundle.labels
    rows = [
        [m] + [_fmt(bundle.variances[lab][m]) for lab in labels]
        for m in range(bundle.spec.steps + 1)
    ]
    return _table(bundle.provenance(), ["step", *labels], rows)


def phase_table(bundle: ResultBundle) -> str:
    labels = bundle.labels
    d = bundle.spec.d
    rows = []
    for m in range(bundle.spec.steps + 1):
        for k in range(d):
            rows.append([m, k, _fmt(2 * math.pi * k / d)]
                        + [_fmt(bundle.phase_dists[lab][m, k]) for lab in labels])
    return _table(bundle.provenance(), ["step", "k", "theta_k", *labels], rows)


def emit_csv(bundle: ResultBundle, out_dir=None) -> list[Path]:
    """Write ``variance.csv`` and ``phase_distribution.csv``; returns the paths."""
    out = Path(out_dir if out_dir is not None else bundle.spec.outputs)
    texts = {
        out / "variance.csv": variance_table(bundle),
        out / "phase_distribution.csv": phase_table(bundle),
    }
    for path, text in texts.items():
        _atomic_write(path, text)
    return list(texts)


def emit_distributions(bundle: ResultBundle, step: int, out_dir=None) -> list[Path]:
    """Write the quadrature density and phase distribution of every curve at ``step``."""
    spec = bundle.spec
    if not 0 <= step <= spec.steps:
        raise ConfigError(f"step {step} outside 0..{spec.steps}")
    out = Path(out_dir if out_dir is not None else spec.outputs)
    space = ModeSpace(spec.d)
    grid = spec.grid.samples()
    labels = bundle.labels
    dens = {lab: qpd(bundle.field_states[lab][step], spec.quadrature_angle, grid, space)
            for lab in labels}
    header = bundle.provenance() + [
        f"step: {step}, quadrature angle: {_fmt(spec.quadrature_angle)}",
        "moments: " + json.dumps({lab: [dens[lab].mean, dens[lab].variance] for lab in labels}),
    ]
    qrows = [[_fmt(x)] + [_fmt(dens[lab].density[i]) for lab in labels]
             for i, x in enumerate(grid)]
    prows = [[k, _fmt(2 * math.pi * k / spec.d)]
             + [_fmt(bundle.phase_dists[lab][step, k]) for lab in labels]
             for k in range(spec.d)]
    texts = {
        out / f"qpd_step{step}.csv": _table(header, ["x", *labels], qrows),
        out / f"phase_step{step}.csv": _table(header, ["k", "theta_k", *labels], prows),
    }
    for path, text in texts.items():
        _atomic_write(path, text)
    return list(texts)


def read_variance_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body))
    return {name: np.array([float(x) for x in col]) for name, col in zip(header, cols)}

