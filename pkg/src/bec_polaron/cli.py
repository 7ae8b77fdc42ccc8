"""Command-line front end.

Every subcommand writes a CSV table: one header row, one ``# provenance:``
line holding the JSON run configuration, then data rows with 12 significant
digits.  ``replay FILE`` re-runs a command from that line.

Exit codes: 0 success, 1 input error, 2 convergence failure (partial rows
and a ``# error:`` line are still written).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import diagrams, selfenergy, spectrum
from .errors import ConvergenceError, InputError
from .model import DimensionlessContext, PhysicalParams, load_params
from .numerics import DEFAULT_ETA_GRID, LOW_DISCREPANCY, PSEUDO_RANDOM, McConfig, QuadratureConfig
from .tables import Table

PROVENANCE_PREFIX = "# provenance: "


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _momentum(text):
    """A momentum, optionally as a multiple of p_c (``0.9pc``); resolved later."""
    t = text.strip()
    if t.endswith("pc"):
        return ("pc", _float(t[:-2]))
    return ("abs", _float(t))


def _grid(text):
    """Comma list, or ``geom:a:b:n`` / ``lin:a:b:n``."""
    t = text.strip()
    for kind, fn in (("geom:", np.geomspace), ("lin:", np.linspace)):
        if t.startswith(kind):
            a, b, n = t[len(kind) :].split(":")
            return tuple(float(x) for x in fn(_float(a), _float(b), int(n)))
    return tuple(_float(x) for x in t.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="becpolaron", description="Impurity in a dilute Bose condensate: perturbative spectrum.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--params", help="parameter file (key = value, natural units)")
    common.add_argument("--gas-parameter", type=_float, default=0.01, help="sqrt(a_s^3 n) when no --params")
    common.add_argument("--mass-ratio", type=_float, default=1.0, help="m/M when no --params")
    common.add_argument("--coupling", choices=("born", "renormalized"), default="born")
    common.add_argument("--cutoff", type=_float, help="UV cutoff in units of m c")
    common.add_argument("--output", help="CSV path (default: stdout)")
    common.add_argument("--samples", type=int, default=McConfig.samples)
    common.add_argument("--seed", type=int, default=McConfig.seed)
    common.add_argument("--batches", type=int, default=McConfig.batches)
    common.add_argument("--sequence", choices=(LOW_DISCREPANCY, PSEUDO_RANDOM), default=LOW_DISCREPANCY)
    common.add_argument("--eta-grid", type=_grid, default=DEFAULT_ETA_GRID)
    common.add_argument("--rel-tol", type=_float, default=spectrum.SpectrumConfig.quad.rel_tol)

    p = sub.add_parser("diagrams", parents=[common], help="diagram counts n, L, D, R")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--list", action="store_true", help="also list the pairings")

    p = sub.add_parser("selfenergy", parents=[common], help="S1 or S2 at one (p, omega)")
    p.add_argument("--order", type=int, choices=(1, 2), required=True)
    p.add_argument("--p", type=_momentum, required=True)
    p.add_argument("--omega", type=_float, help="default: E(p)")

    p = sub.add_parser("spectrum", parents=[common], help="pole W(p) on a momentum grid")
    p.add_argument("--order", type=int, choices=(1, 2), required=True)
    _grid_flags(p)

    p = sub.add_parser("rate", parents=[common], help="golden-rule decay rate on a momentum grid")
    _grid_flags(p)

    p = sub.add_parser("effmass", parents=[common], help="effective mass; with --z-grid the I1/I2 curves")
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--z-grid", type=_grid)
    p.add_argument("--stencil", type=_float, default=spectrum.SpectrumConfig.stencil_fraction, help="h / p_c")

    p = sub.add_parser("i0", parents=[common], help="I0(z) numeric vs closed form; --mu-b for the m = M check")
    p.add_argument("--z-grid", type=_grid, default=(0.25, 0.5, 1.0, 2.0, 4.0))
    p.add_argument("--mu-b", action="store_true")

    p = sub.add_parser("replay", help="re-run the command recorded in a CSV provenance line")
    p.add_argument("file")
    p.add_argument("--output")
    return parser


def _grid_flags(p):
    p.add_argument("--p-min", type=_momentum, required=True)
    p.add_argument("--p-max", type=_momentum, required=True)
    p.add_argument("--steps", type=int, required=True)


# ---------------------------------------------------------------------------
# configuration


def _params(args, recorded=None) -> PhysicalParams | None:
    if recorded is not None:
        params = PhysicalParams(**recorded)
    elif args.params:
        params = load_params(args.params)
    else:
        params = DimensionlessContext.from_gas_parameter(args.gas_parameter, args.mass_ratio).to_physical()
    if args.cutoff is not None:
        params = PhysicalParams(**{**params.as_dict(), "uv_cutoff": args.cutoff})
    return params


def _configs(args):
    mc = McConfig(samples=args.samples, seed=args.seed, batches=args.batches, sequence_kind=args.sequence)
    quad = QuadratureConfig(rel_tol=args.rel_tol, abs_tol=1e-15)
    return spectrum.SpectrumConfig(quad=quad, mc=mc, eta_grid=tuple(args.eta_grid),
                                   stencil_fraction=getattr(args, "stencil", 0.05))


def _resolve(m, ctx):
    kind, value = m
    return value * ctx.p_c if kind == "pc" else value


def _p_grid(args, ctx):
    if args.steps < 1:
        raise InputError("--steps must be >= 1")
    return tuple(float(x) for x in np.linspace(_resolve(args.p_min, ctx), _resolve(args.p_max, ctx), args.steps))


# ---------------------------------------------------------------------------
# output


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def csv_text(table: Table, provenance: dict, extra_comments=()) -> str:
    lines = [",".join(table.columns), PROVENANCE_PREFIX + json.dumps(provenance, sort_keys=True)]
    lines += [f"# {c}" for c in extra_comments]
    lines += [",".join(format_value(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def emit_csv(table: Table, provenance: dict, path=None, extra_comments=()) -> None:
    text = csv_text(table, provenance, extra_comments)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write output {path!r}: {exc.strerror}") from None


def read_csv(path):
    """(columns, provenance dict, rows of floats) from a file written by emit_csv."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    columns = tuple(lines[0].split(","))
    prov = json.loads(lines[1][len(PROVENANCE_PREFIX) :]) if lines[1].startswith(PROVENANCE_PREFIX) else {}
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[2:] if ln and not ln.startswith("#")]
    return columns, prov, rows


def _strip_output(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--output":
            skip = True
            continue
        if a.startswith("--output="):
            continue
        out.append(a)
    return out


def _provenance(argv, params, cfg):
    return {
        "argv": _strip_output(argv),
        "params": params.as_dict() if params is not None else None,
        "quad": asdict(cfg.quad),
        "mc": asdict(cfg.mc),
        "eta_grid": list(cfg.eta_grid),
        "stencil_fraction": cfg.stencil_fraction,
    }


# ---------------------------------------------------------------------------
# commands


def _cmd_diagrams(args, ctx, cfg):
    c = diagrams.diagram_counts(args.order)
    table = Table(("n", "L", "D", "R"), [(c.n, c.total, c.distinct, c.irreducible)])
    comments = ()
    if args.list:
        comments = tuple("pairing " + str(p) + (" irreducible" if diagrams.is_irreducible(p) else "")
                         for p in diagrams.iter_pairings(args.order))
    return table, comments


def _cmd_selfenergy(args, ctx, cfg):
    p = _resolve(args.p, ctx)
    omega = 0.5 * ctx.z * p * p if args.omega is None else args.omega
    req = selfenergy.SelfEnergyRequest(p, omega, args.order, cfg.quad, cfg.mc, cfg.eta_grid)
    s = selfenergy.evaluate_request(req, ctx)
    table = Table(("p", "omega", "re", "im", "stderr_re", "stderr_im"))
    table.append((p, omega, s.re, s.im, s.stderr_re, s.stderr_im))
    return table, tuple(f"warning: {w}" for w in s.warnings)


def _cmd_spectrum(args, ctx, cfg):
    grid = _p_grid(args, ctx)
    if args.order == 1:
        table = Table(("p", "re", "im", "stderr_re", "stderr_im"))
        try:
            for p in grid:
                r = spectrum.pole_order1(p, ctx, cfg)
                table.append((p, r.omega.re, r.omega.im, 0.0, 0.0))
        except ConvergenceError as exc:
            exc.partial = table
            raise
    else:
        table = spectrum.spectrum_scan(grid, 2, ctx, cfg)
    comments = [f"monotonic below p_c: {int(_monotonic(table, ctx))}"]
    comments += [f"warning: {w}" for w in table.flags.get("warnings", [])]
    return table, tuple(comments)


def _monotonic(table, ctx):
    rows = [r for r in table.rows if r[0] <= ctx.p_c]
    return all(b[1] >= a[1] - 3 * math.hypot(a[3], b[3]) for a, b in zip(rows, rows[1:]))


def _cmd_rate(args, ctx, cfg):
    grid = _p_grid(args, ctx)
    table = Table(("p", "rate", "near_threshold"))
    try:
        for p in grid:
            table.append((p, selfenergy.golden_rule_rate(p, ctx, cfg.quad), int(selfenergy.near_threshold(p, ctx))))
    except ConvergenceError as exc:
        exc.partial = table
        raise
    return table, ()


_EFFMASS_COLUMNS = ("order", "z", "M", "M_ef", "M_ef_stderr", "M_ef_order1", "g_M", "I1", "I2", "stderr_I2",
                    "fit_residual", "linear_coefficient")


def _effmass_row(r, z):
    return (r.order, z, r.mass, r.M_ef, r.M_ef_stderr, r.M_ef_order1, r.g_M, r.I1, r.I2, r.I2_stderr,
            r.fit_residual, r.linear_coefficient)


def _cmd_effmass(args, ctx, cfg):
    if args.z_grid:
        return spectrum.i_function_curves(args.z_grid, ctx, cfg), ()
    table = Table(_EFFMASS_COLUMNS)
    try:
        r = spectrum.effective_mass(args.order, ctx, cfg)
    except ConvergenceError as exc:
        if exc.best is not None:
            table.append(_effmass_row(exc.best, ctx.z))
        exc.partial = table
        raise
    table.append(_effmass_row(r, ctx.z))
    return table, ()


def _cmd_i0(args, ctx, cfg):
    if args.mu_b:
        r = selfenergy.mu_b_report(ctx, cfg.quad)
        table = Table(("energy", "mu_B", "ratio", "i0_numeric", "i0_closed", "energy_closed", "energy_at_cutoff",
                       "energy_at_double_cutoff", "cutoff_drift", "cutoff"))
        table.append((r.energy, r.mu_b, r.ratio, r.i0_numeric, r.i0_closed, r.energy_closed, r.energy_at_cutoff,
                      r.energy_at_double_cutoff, r.cutoff_drift, r.cutoff))
        return table, ()
    table = Table(("z", "i0_numeric", "i0_closed", "energy", "energy_at_cutoff"))
    for z in args.z_grid:
        e = selfenergy.zero_point_energy_order1(ctx.with_mass_ratio(z), cfg.quad)
        table.append((z, e.i0_numeric, e.i0_closed, e.value, e.value_at_cutoff))
    return table, ()


COMMANDS = {
    "diagrams": _cmd_diagrams,
    "selfenergy": _cmd_selfenergy,
    "spectrum": _cmd_spectrum,
    "rate": _cmd_rate,
    "effmass": _cmd_effmass,
    "i0": _cmd_i0,
}


def _execute(argv, recorded_params=None, output_override=None):
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        if not Path(args.file).is_file():
            raise InputError(f"cannot read {args.file!r}: no such file")
        _, prov, _ = read_csv(args.file)
        if "argv" not in prov:
            raise InputError(f"{args.file!r} has no provenance line")
        return _execute(prov["argv"], prov.get("params"), args.output)
    output = output_override if output_override is not None else args.output
    cfg = _configs(args)
    params = None if args.command == "diagrams" else _params(args, recorded_params)
    ctx = None if params is None else DimensionlessContext.from_physical(params, args.coupling)
    prov = _provenance(argv, params, cfg)
    try:
        table, comments = COMMANDS[args.command](args, ctx, cfg)
    except ConvergenceError as exc:
        partial = getattr(exc, "partial", None) or Table(("status",))
        emit_csv(partial, prov, output, (f"error: {exc}",))
        raise
    emit_csv(table, prov, output, comments)
    return 0


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _execute(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
