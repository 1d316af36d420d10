"""Command-line interface: ``lhsis <command> --config PATH [--out DIR] ...``.

Commands:
    simulate   integrate the configured system; trajectory CSV
    exact      closed-form b2/h4 trajectory CSV (``--cross-check`` compares with the integrator)
    superpose  rebuild the general solution from particular ones; CSV with reconstruction_error
    constants  constants of motion along the prolonged flow; JSON with drift statistics
    verify     run the invariant suite; JSON report, exit status 1 if any check fails
    convert    map a trajectory CSV from one chart to both charts

Output goes to ``DIR/<command>.csv`` (or ``.json``) with ``--out`` and to
stdout otherwise. Floats are written with ``repr`` so output is exact and
byte-for-byte reproducible.

Exit status:
    0  success
    1  a verification check failed
    2  invalid input or a numerical error
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dynamics as dyn
from . import superposition as sup
from . import verification
from .algebra import Algebra
from .config import RunConfig, default_config_text, load_config, parse_config
from .errors import ConfigError, DegenerateConfigurationError, LHSISError, SingularPointError
from .transform import Chart, PhaseState, cart_to_epi, cartesian_invertible, epi_to_cart, epidemic_regular

CSV_HEADER = ("t", "x", "y", "q", "p", "mean_rho", "variance")
COMMANDS = {
    "simulate": "integrate the configured system",
    "exact": "closed-form b2/h4 trajectory",
    "superpose": "rebuild a solution from particular ones",
    "constants": "constants of motion along the prolonged flow",
    "verify": "run the invariant suite",
    "convert": "map a trajectory CSV to both charts",
}


class CommandError(LHSISError):
    """A valid config that does not support the requested command."""


# ---------------------------------------------------------------------------
# serialization


def trajectory_rows(times, coords, chart: Chart) -> list[list[float]]:
    """Rows ``t, x, y, q, p, mean_rho, variance`` for samples in ``chart``.

    Raises:
        SingularPointError: a sample has no image in the other chart; the
            message names the first such time.
    """
    times = np.asarray(times, dtype=float)
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    u, v = coords[:, 0], coords[:, 1]
    if Chart(chart) is Chart.CARTESIAN:
        ok = cartesian_invertible(u, v)
    else:
        ok = epidemic_regular(u, v)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        names = Chart(chart).coordinate_names
        raise SingularPointError(
            f"row at t = {float(times[i])!r} is singular: "
            f"({names[0]}, {names[1]}) = ({float(u[i])!r}, {float(v[i])!r}) has no image in the other chart"
        )
    if Chart(chart) is Chart.CARTESIAN:
        x, y = u, v
        q, p = cart_to_epi(x, y)
    else:
        q, p = u, v
        x, y = epi_to_cart(q, p)
    var = 1.0 / (p * p)
    return [list(map(float, row)) for row in zip(times, x, y, q, p, q, var)]


def write_csv(header: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(c)) for c in row])
    return buf.getvalue()


def write_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, Chart]:
    """Read a CSV with a ``t`` column and either ``x, y`` or ``q, p`` columns."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "convert.input") from exc
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    if "t" not in fields:
        raise ConfigError(f"{path}: missing column 't'", "convert.input")
    if {"x", "y"} <= set(fields):
        chart = Chart.CARTESIAN
    elif {"q", "p"} <= set(fields):
        chart = Chart.EPIDEMIC
    else:
        raise ConfigError(f"{path}: need columns x, y or q, p", "convert.input")
    a, b = chart.coordinate_names
    times, coords = [], []
    for line, row in enumerate(reader, start=2):
        try:
            times.append(float(row["t"]))
            coords.append((float(row[a]), float(row[b])))
        except (TypeError, ValueError):
            raise ConfigError(f"{path}:{line}: not a number", "convert.input") from None
    return np.array(times), np.array(coords).reshape(-1, 2), chart


# ---------------------------------------------------------------------------
# commands; each returns (file suffix, text, exit status)


def _initial(cfg: RunConfig) -> PhaseState:
    if cfg.initial is None:
        raise ConfigError("this command needs an initial state (q0, p0 or x0, y0)", "q0")
    return cfg.initial


def cmd_simulate(cfg: RunConfig, args) -> tuple[str, str, int]:
    spec = cfg.spec()
    traj = dyn.integrate(spec, _initial(cfg), cfg.t0, cfg.t1, tol=cfg.tol, samples=cfg.samples)
    return "csv", write_csv(CSV_HEADER, trajectory_rows(traj.times, traj.coords, traj.chart)), 0


def cmd_exact(cfg: RunConfig, args) -> tuple[str, str, int]:
    if cfg.algebra is Algebra.H6:
        raise CommandError(
            "no closed-form solution for h6; only b2 and h4 are integrable by quadratures (use simulate)"
        )
    spec = cfg.spec(Chart.CARTESIAN)
    c = cfg.exact or dyn.constants_from_initial(spec, _initial(cfg), cfg.t0)
    ts = np.linspace(cfg.t0, cfg.t1, cfg.samples)
    traj = dyn.exact_trajectory(spec, c, ts)
    text = write_csv(CSV_HEADER, trajectory_rows(traj.times, traj.coords, Chart.CARTESIAN))
    if args.cross_check:
        start = PhaseState.cartesian(*traj.coords[0])
        num = dyn.integrate(spec, start, cfg.t0, cfg.t1, tol=cfg.tol, t_eval=ts)
        dev = float(np.max(np.abs(num.coords - traj.coords)))
        report = {"max_abs_deviation": dev, "chart": "cartesian", "samples": int(ts.size), "tol": cfg.tol}
        _emit(args, "exact_cross_check.json", write_json(report), stream=sys.stderr)
    return "csv", text, 0


def _rule_algebra(cfg: RunConfig) -> Algebra:
    # b2 is h4 with b1 = 0 and shares its rules and invariants
    return Algebra.H6 if cfg.algebra is Algebra.H6 else Algebra.H4


def cmd_superpose(cfg: RunConfig, args) -> tuple[str, str, int]:
    rule = _rule_algebra(cfg)
    need = 3 if rule is Algebra.H6 else 2
    if len(cfg.particulars) != need:
        raise ConfigError(f"{cfg.algebra.value} needs {need} particular solutions", "superpose.particulars")
    spec = cfg.spec()
    chart = spec.chart
    general = _initial(cfg).to(chart)
    ts, coords = dyn.integrate_prolonged(spec, [general, *cfg.particulars], cfg.t0, cfg.t1, tol=cfg.tol, samples=cfg.samples)
    first = coords[0]
    mc = sup.extract_constants(rule, first[0], first[1:], chart)
    if not mc.usable:
        raise DegenerateConfigurationError(
            f"particular solutions are degenerate at t = {cfg.t0!r}; constants {mc.as_dict()}"
        )
    if rule is Algebra.H4:
        branch = sup.resolve_branch_h4(first[0], first[1], first[2], mc.k1, mc.k, chart)
    rebuilt = np.empty((ts.size, 2))
    for i, row in enumerate(coords):
        if rule is Algebra.H6:
            rebuilt[i] = sup.superpose_h6(row[1], row[2], row[3], mc.k1, mc.k2, chart)
        else:
            rebuilt[i] = sup.superpose_h4(row[1], row[2], mc.k1, mc.k, branch, chart)
    err = np.max(np.abs(rebuilt - coords[:, 0]), axis=1)
    rows = trajectory_rows(ts, rebuilt, chart)
    return "csv", write_csv((*CSV_HEADER, "reconstruction_error"), [r + [float(e)] for r, e in zip(rows, err)]), 0


def cmd_constants(cfg: RunConfig, args) -> tuple[str, str, int]:
    rule = _rule_algebra(cfg)
    need = 4 if rule is Algebra.H6 else 3
    if len(cfg.copies) != need:
        raise ConfigError(f"{cfg.algebra.value} needs {need} copies", "constants.copies")
    spec = cfg.spec()
    ts, series = verification.invariant_series(spec, cfg.copies, cfg.t0, cfg.t1, cfg.samples, tol=cfg.tol)
    out = {
        "algebra": cfg.algebra.value,
        "rules": rule.value,
        "times": ts.tolist(),
        "constants": {k: v.tolist() for k, v in series.items()},
        "drift": {
            k: {
                "initial": float(v[0]),
                "max_abs": float(np.max(np.abs(v - v[0]))),
                "max_relative": verification.relative_drift(v),
            }
            for k, v in series.items()
        },
    }
    return "json", write_json(out), 0


def cmd_verify(cfg: RunConfig, args) -> tuple[str, str, int]:
    report = verification.run_suite(cfg)
    out = report.as_dict()
    out["seed"] = cfg.seed
    return "json", write_json(out), 0 if report.passed else 1


def cmd_convert(cfg: RunConfig, args) -> tuple[str, str, int]:
    if not cfg.convert_input:
        raise ConfigError("convert needs convert.input", "convert.input")
    path = Path(cfg.convert_input)
    if not path.is_absolute() and args.config:
        path = Path(args.config).parent / path
    times, coords, chart = read_trajectory_csv(path)
    return "csv", write_csv(CSV_HEADER, trajectory_rows(times, coords, chart)), 0


HANDLERS = {
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "superpose": cmd_superpose,
    "constants": cmd_constants,
    "verify": cmd_verify,
    "convert": cmd_convert,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lhsis", description="Lie-Hamilton SIS epidemic systems.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, summary in COMMANDS.items():
        p = sub.add_parser(name, help=summary)
        p.add_argument("--config", help="YAML run configuration" + (" (default: the shipped config)" if name == "verify" else ""))
        p.add_argument("--out", help="output directory; stdout if omitted")
        p.add_argument("--cross-check", action="store_true", help="exact: also report the deviation from the integrator")
        p.add_argument("--seed", type=int, help="override the sampling seed")
        p.add_argument("--tol", type=float, help="override the integrator tolerance")
    return parser


def _emit(args, filename: str, text: str, stream=None) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text, encoding="utf-8")
    else:
        (stream or sys.stdout).write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "verify":
            cfg = parse_config(default_config_text())
        else:
            parser.error(f"{args.command} needs --config")
        cfg = cfg.with_overrides(seed=args.seed, tol=args.tol)
        suffix, text, status = HANDLERS[args.command](cfg, args)
        _emit(args, f"{args.command}.{suffix}", text)
        return status
    except ConfigError as exc:
        print(f"lhsis {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (LHSISError, ValueError, ArithmeticError) as exc:
        print(f"lhsis {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
