"""Command-line front end.

Every subcommand writes ``<name>.json`` (schema ``eymah.result/v1``, sorted keys)
and, where a table exists, ``<name>.csv`` into the output directory, and
prints a short summary.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import (
    ConfigurationError,
    DegenerateGapError,
    EymahError,
    LinearSolverError,
    NoGapError,
    NonConvergenceError,
    WeightOutOfRangeError,
)

SCHEMA = "eymah.result/v1"
OUTPUT_ENV = "EYMAH_OUTPUT_DIR"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_WEIGHT = 4
EXIT_NONCONVERGENCE = 5
EXIT_LINEAR = 6
EXIT_GAP = 7
EXIT_IDENTITY = 8

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_UNEXPECTED}  unexpected internal error
  {EXIT_USAGE}  command-line usage error
  {EXIT_CONFIG}  invalid or malformed configuration (file, field or value)
  {EXIT_WEIGHT}  weight outside the block's non-indicial interval
  {EXIT_NONCONVERGENCE}  Newton iteration did not converge
  {EXIT_LINEAR}  linear solve failed or stagnated
  {EXIT_GAP}  no admissible weight window (degenerate or empty indicial gap)
  {EXIT_IDENTITY}  an identity that should hold off-shell failed its check

configuration files (--config) are YAML mappings; keys may be nested, e.g.
  n: 3
  boundary: {{gamma_amp: 1.0e-3, Gamma_amp: 0.0}}
  discretization: {{nodes: 128, order: 4}}
  newton: {{tol: 1.0e-10, max_iter: 10}}
command-line flags override file values. Results go to --output, else ${OUTPUT_ENV}, else the
current directory.
"""

# nested config path -> argparse destination
CONFIG_KEYS = {
    "n": "n",
    "seed": "seed",
    "levels": "levels",
    "kind": "kind",
    "mu": "mu",
    "algebra": "algebra",
    "block": "block",
    "weight": "weight",
    "ansatz": "ansatz",
    "input": "input",
    "column": "column",
    "window": "window",
    "boundary.gamma_amp": "gamma_amp",
    "boundary.Gamma_amp": "Gamma_amp",
    "boundary.pattern": "pattern",
    "discretization.nodes": "nodes",
    "discretization.order": "order",
    "discretization.h0": "h0",
    "newton.tol": "tol",
    "newton.max_iter": "max_iter",
    "newton.damping": "damping",
    "newton.linear_tol": "linear_tol",
    "newton.jacobian": "jacobian",
    "newton.amplitude_bound": "amplitude_bound",
    "output.dir": "output",
    "output.name": "name",
    "output.format": "format",
}


@dataclass
class RunConfig:
    """Validated parameters of one run."""

    subcommand: str
    values: dict = field(default_factory=dict)
    output: Path = Path(".")
    name: str = ""
    format: str = "both"

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v


# --- configuration --------------------------------------------------------------------


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def load_config_file(path: str) -> dict:
    """Parse a YAML configuration into argparse destinations."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigurationError(f"malformed config {path}{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a mapping at the top level")
    out = {}
    for key, value in _flatten(data):
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"unknown config field {key!r} in {path}")
        out[CONFIG_KEYS[key]] = value
    return out


def _positive(name, v):
    if v is not None and not v > 0:
        raise ConfigurationError(f"{name} must be positive, got {v}")


def validate(cfg: RunConfig) -> RunConfig:
    v = cfg.values
    sub = cfg.subcommand
    n = v.get("n")
    if n is not None and (not isinstance(n, int) or n < 2):
        raise ConfigurationError(f"n must be an integer >= 2, got {n!r}")
    for key in ("tol", "linear_tol", "h0", "amplitude_bound"):
        _positive(key, v.get(key))
    if v.get("nodes") is not None and v["nodes"] < 16:
        raise ConfigurationError(f"nodes must be >= 16, got {v['nodes']}")
    if sub == "solve" and n not in (None, 3):
        raise ConfigurationError("the invariant nonlinear solve is available for n = 3 only")
    if sub == "indicial" and v.get("kind") is None:
        raise ConfigurationError("indicial needs --kind")
    if sub == "decay" and v.get("input") is None:
        raise ConfigurationError("decay needs --input")
    if cfg.format not in ("json", "csv", "both"):
        raise ConfigurationError(f"unknown output format {cfg.format!r}")
    window = v.get("window")
    if window is not None and (len(window) != 2 or not 0 < window[0] < window[1] <= 1):
        raise ConfigurationError(f"window must be two numbers 0 < lo < hi <= 1, got {window}")
    return cfg


# --- output ------------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_outputs(cfg: RunConfig, payload: dict, table=None) -> list[Path]:
    cfg.output.mkdir(parents=True, exist_ok=True)
    stem = cfg.name or cfg.subcommand
    written = []
    if cfg.format in ("json", "both"):
        record = {"schema": SCHEMA, "command": cfg.subcommand, "version": __version__, "result": payload}
        p = cfg.output / f"{stem}.json"
        p.write_text(json.dumps(_clean(record), sort_keys=True, indent=2) + "\n")
        written.append(p)
    if table is not None and cfg.format in ("csv", "both"):
        header, rows = table
        p = cfg.output / f"{stem}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        written.append(p)
    return written


# --- subcommands ----------------------------------------------------------------------------


def run_indicial(cfg: RunConfig):
    from .indicial import compare_reports, indicial_report_numeric, indicial_roots_closed_form

    kind, n, mu = cfg.get("kind"), cfg.get("n", 3), cfg.get("mu")
    closed = indicial_roots_closed_form(kind, n, mu)
    numeric = indicial_report_numeric(kind, n, mu)
    err = compare_reports(closed, numeric)
    payload = {"closed_form": closed.to_dict(), "numeric": numeric.to_dict(), "max_root_difference": err}
    rows = []
    for src, rep in (("closed-form", closed), ("numeric", numeric)):
        for label, roots in rep.blocks.items():
            for root, mult in roots:
                rows.append([src, label, root, mult])
    lo, hi = closed.interval
    summary = [
        f"{kind} n={n}" + (f" mu={mu:g}" if mu is not None else ""),
        "roots: " + ", ".join(f"{r:.12g}" for r in closed.all_roots()),
        f"non-indicial interval: ({lo:.12g}, {hi:.12g})  indicial radius {closed.radius:.12g}",
        f"numeric vs closed form: {err:.2e}",
    ]
    return payload, (["source", "block", "root", "multiplicity"], rows), summary, EXIT_OK


def run_verify(cfg: RunConfig):
    from .verify import identity_suite

    n, seed, levels = cfg.get("n", 3), cfg.get("seed", 0), cfg.get("levels", 3)
    order, h0 = cfg.get("order", 4), cfg.get("h0", 0.1)
    reports = identity_suite(seed, n, levels, order, h0, cfg.get("algebra", "su2"))
    rows, summary = [], []
    for r in reports:
        for h, res in zip(r.steps, r.residuals):
            rows.append([r.name, h, res])
        flag = "pass" if r.passed else "FAIL"
        order_txt = "-" if r.order is None else f"{r.order:.2f}"
        tag = "" if r.holds_off_shell else " (on-shell only)"
        summary.append(f"{flag:4s} {r.name:24s} order {order_txt:>6s} analytic {r.analytic:.1e}{tag}")
    failed = [r for r in reports if not r.passed and r.holds_off_shell]
    payload = {"n": n, "seed": seed, "levels": levels, "order": order, "reports": [r.to_dict() for r in reports]}
    code = EXIT_IDENTITY if failed else EXIT_OK
    return payload, (["identity", "step", "residual"], rows), summary, code


def _discretization(cfg: RunConfig):
    from .solver import Discretization

    return Discretization(nodes=cfg.get("nodes", 128), order=cfg.get("order", 4))


def _boundary(cfg: RunConfig):
    from .invariant import invariant_boundary_data

    g = float(cfg.get("gamma_amp", 0.0))
    G = float(cfg.get("Gamma_amp", 0.0))
    pattern = cfg.get("pattern", "sigma3")
    if pattern == "sigma3":
        gamma = (0.0, 0.0, g)
    elif pattern == "hedgehog":
        gamma = (g, g, g)
    else:
        raise ConfigurationError(f"unknown connection pattern {pattern!r}; expected sigma3 or hedgehog")
    Gamma = (G, G, -2.0 * G)
    return invariant_boundary_data(Gamma, gamma, label=f"{cfg.get('ansatz', 'berger-su2')}/{pattern}")


def run_solve_linear(cfg: RunConfig):
    from .solver import decay_fit, solve_linear_block

    block = cfg.get("block", "metric")
    disc = _discretization(cfg)
    bd = _boundary(cfg)
    weight = float(cfg.get("weight", 1.5))
    sol = solve_linear_block(block, None, None if bd.is_zero else bd, disc, weight)
    norm = sol.pointwise_norm()
    fit = decay_fit(disc.grid.x, norm, tuple(cfg.get("window", (0.01, 0.2))))
    payload = {"block": block, "weight": weight, "nodes": disc.nodes, "residual": sol.residual, "decay": fit.to_dict()}
    header = ["rho", "x", "norm"] + [f"u{k}" for k in range(sol.profiles.shape[0])]
    rows = np.column_stack([disc.grid.rho, disc.grid.x, norm, sol.profiles.T])
    exp = "indeterminate" if fit.indeterminate else f"{fit.exponent:.4f}"
    summary = [f"{block} block, weight {weight:g}: residual {sol.residual:.2e}, decay exponent {exp}"]
    return payload, (header, rows), summary, EXIT_OK


def run_solve(cfg: RunConfig):
    from .solver import NewtonParams, newton_solve

    params = NewtonParams(
        tol=cfg.get("tol", 1e-10),
        max_iter=cfg.get("max_iter", 10),
        damping=cfg.get("damping", 1.0),
        linear_tol=cfg.get("linear_tol", 1e-10),
        weight=cfg.get("weight", 1.5),
        amplitude_bound=cfg.get("amplitude_bound", 1e-2),
        jacobian=cfg.get("jacobian", "blocks"),
    )
    disc = _discretization(cfg)
    bd = _boundary(cfg)
    code = EXIT_OK
    try:
        res = newton_solve(bd, params=params, disc=disc)
    except NonConvergenceError as exc:
        if exc.result is None:
            raise
        res, code = exc.result, EXIT_NONCONVERGENCE
    payload = res.to_dict()
    payload["recovered"] = res.recovered
    da = res.decay["a"]
    summary = [
        f"{'converged' if res.converged else 'NOT converged'} in {res.iterations} iterations; "
        f"gauged residual {res.gauged_residual:.2e}",
        f"gauge residual {max(res.gauge_residual.values()):.2e}; EYM residual {max(res.eym_residual.values()):.2e}",
        f"|A| {res.A_norm:.3e}  |a| {res.a_norm:.3e}  decay(a) "
        + ("indeterminate" if da.indeterminate else f"{da.exponent:.3f}"),
    ] + [f"warning: {w}" for w in res.warnings]
    return payload, res.table(), summary, code


def run_decay(cfg: RunConfig):
    from .solver import decay_fit

    path = Path(cfg.get("input"))
    try:
        with path.open() as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    column = cfg.get("column", "a_norm")
    if not rows or column not in rows[0] or "x" not in rows[0]:
        raise ConfigurationError(f"{path} needs columns 'x' and {column!r}")
    x = np.array([float(r["x"]) for r in rows])
    v = np.array([float(r[column]) for r in rows])
    fit = decay_fit(x, v, tuple(cfg.get("window", (0.01, 0.2))))
    payload = {"input": str(path), "column": column, "fit": fit.to_dict()}
    txt = "indeterminate (" + fit.reason + ")" if fit.indeterminate else f"{fit.exponent:.4f}"
    summary = [f"{column}: decay exponent {txt}" + (" with log correction" if fit.log_correction else "")]
    return payload, None, summary, EXIT_OK


COMMANDS = {
    "indicial": run_indicial,
    "verify": run_verify,
    "solve-linear": run_solve_linear,
    "solve": run_solve,
    "decay": run_decay,
}


# --- argument parsing ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or .)")
    common.add_argument("--name", help="file stem for outputs (default: subcommand)")
    common.add_argument("--format", choices=("json", "csv", "both"), default=None)
    common.add_argument("--n", type=int)
    common.add_argument("--algebra", choices=("su2", "u1"))

    p = argparse.ArgumentParser(
        prog="eymah",
        description="Gauged Einstein-Yang-Mills tools on hyperbolic space.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"eymah {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    s = sub.add_parser("indicial", parents=[common], help="indicial roots and weight windows", epilog=EPILOG, formatter_class=fmt)
    s.add_argument("--kind", choices=("scalar", "hodge1", "lichnerowicz", "bianchi_composite"))
    s.add_argument("--mu", type=float)

    s = sub.add_parser("verify", parents=[common], help="identity suite on random fields", epilog=EPILOG, formatter_class=fmt)
    s.add_argument("--seed", type=int)
    s.add_argument("--levels", type=int)
    s.add_argument("--order", type=int)
    s.add_argument("--h0", type=float)

    for name, helptext in (("solve-linear", "one decoupled linear block"), ("solve", "Newton continuation")):
        s = sub.add_parser(name, parents=[common], help=helptext, epilog=EPILOG, formatter_class=fmt)
        s.add_argument("--ansatz", choices=("berger-su2",))
        s.add_argument("--gamma-amp", dest="gamma_amp", type=float, help="boundary connection amplitude")
        s.add_argument("--Gamma-amp", dest="Gamma_amp", type=float, help="Berger squashing amplitude")
        s.add_argument("--pattern", choices=("sigma3", "hedgehog"), help="left-invariant connection data")
        s.add_argument("--nodes", type=int)
        s.add_argument("--order", type=int)
        s.add_argument("--weight", type=float)
        s.add_argument("--window", type=float, nargs=2)
        if name == "solve-linear":
            s.add_argument("--block", choices=("metric", "connection"))
        else:
            s.add_argument("--tol", type=float)
            s.add_argument("--max-iter", dest="max_iter", type=int)
            s.add_argument("--damping", type=float)
            s.add_argument("--linear-tol", dest="linear_tol", type=float)
            s.add_argument("--jacobian", choices=("blocks", "exact"))
            s.add_argument("--amplitude-bound", dest="amplitude_bound", type=float)

    s = sub.add_parser("decay", parents=[common], help="decay exponent of a stored field", epilog=EPILOG, formatter_class=fmt)
    s.add_argument("--input", help="CSV with an 'x' column (e.g. written by solve)")
    s.add_argument("--column")
    s.add_argument("--window", type=float, nargs=2)
    return p


def make_config(args: argparse.Namespace) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    for k, v in vars(args).items():
        if k in ("config", "subcommand") or v is None:
            continue
        values[k] = v
    output = values.pop("output", None) or os.environ.get(OUTPUT_ENV) or "."
    name = values.pop("name", None) or ""
    fmt = values.pop("format", None) or "both"
    return validate(RunConfig(args.subcommand, values, Path(output), name, fmt))


def run_command(cfg: RunConfig) -> int:
    payload, table, summary, code = COMMANDS[cfg.subcommand](cfg)
    paths = write_outputs(cfg, payload, table)
    for line in summary:
        print(line)
    for p in paths:
        print(f"wrote {p}")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return run_command(make_config(args))
    except WeightOutOfRangeError as exc:
        lo, hi = exc.interval
        print(f"error: {exc} [interval ({lo:g}, {hi:g})]", file=sys.stderr)
        return EXIT_WEIGHT
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except LinearSolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LINEAR
    except (DegenerateGapError, NoGapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GAP
    except EymahError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
