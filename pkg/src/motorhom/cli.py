"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 a certificate or
experiment verdict failed.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .cell import dhbar, solve_cell
from .defaults import (
    CELL_GRID, CELLS_PER_PERIOD, CFL_TARGET, ENVELOPE_A, FINAL_TIME, OUTPUT_ROOT_ENV, SNAPSHOTS,
)
from .effective import HbarTable, check_convexity, coercivity_check, sweep, velocity
from .errors import MotorhomError, SolverError, ValidationError
from .io import gnuplot_stub, write_columns, write_json, atomic_write_text
from .model import load_model

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_CERTIFICATE = 4


class CliError(ValidationError):
    pass


# ---------------------------------------------------------------- parsing helpers


def parse_number(text) -> float:
    """Float or fraction such as ``1/16``."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise CliError(f"not a number: {text!r}") from None


def parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [parse_number(v) for v in text]
    return [parse_number(v) for v in str(text).split(",") if v.strip()]


def parse_bumps_text(text: str) -> list[tuple[float, float]]:
    """JSON ``[[center, mass], ...]`` or one ``center mass`` pair per line."""
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            data = json.loads(stripped)
            return [(float(c), float(m)) for c, m in data]
        except (ValueError, TypeError) as exc:
            raise CliError(f"bad bump list: {exc}") from None
    bumps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].replace(",", " ").split()
        if not line:
            continue
        if len(line) != 2:
            raise CliError(f"bumps line {lineno}: expected 'center mass'")
        bumps.append((parse_number(line[0]), parse_number(line[1])))
    if not bumps:
        raise CliError("bump file holds no bumps")
    return bumps


def load_bumps(path: str) -> list[tuple[float, float]]:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"bump file {path!r} not found")
    return parse_bumps_text(p.read_text())


def load_config(path: str) -> dict:
    """JSON object, or ``key = value`` lines with Python literals."""
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file {path!r} not found")
    text = p.read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise CliError(f"config file: {exc}") from None
        return {str(k).replace("-", "_"): v for k, v in data.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key.replace("-", "_")] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key.replace("-", "_")] = value
    return out


def apply_config(args: argparse.Namespace, config: dict) -> None:
    protected = {"command", "experiment", "config", "func"}
    for key, value in config.items():
        if key in protected or not hasattr(args, key):
            raise CliError(f"config key {key!r} does not apply to this command")
        setattr(args, key, value)


def output_dir(args: argparse.Namespace) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(args.out) if args.out else Path(args.command if args.command != "experiment" else f"experiment-{args.experiment}")
    if root and not out.is_absolute():
        out = Path(root) / out
    if out.exists() and not out.is_dir():
        raise CliError(f"output path {out} exists and is not a directory")
    return out


def _positive(name: str, value: float, allow_zero: bool = False) -> float:
    v = parse_number(value)
    ok = v >= 0 if allow_zero else v > 0
    if not (math.isfinite(v) and ok):
        raise CliError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}, got {value}")
    return v


def _grid(value) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise CliError(f"--grid must be an integer, got {value!r}") from None
    if n < 8 or n % 2:
        raise CliError(f"--grid must be an even integer >= 8, got {value}")
    return n


def _momentum(text, d: int) -> np.ndarray | float:
    vals = parse_list(text)
    if len(vals) != d:
        raise CliError(f"--p needs {d} component(s), got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise CliError("--p must be finite")
    return vals[0] if d == 1 else np.array(vals)


def _fmt(v) -> str:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    return " ".join(f"{x:.12g}" for x in arr)


# ---------------------------------------------------------------- commands


def cmd_hbar(args) -> int:
    n = _grid(args.grid)
    model = load_model(args.model)
    p = _momentum(args.p, model.d)
    sol = solve_cell(model, p, n)
    g = dhbar(sol)
    print(f"hbar = {sol.hbar:.12g}")
    print(f"dhbar = {_fmt(g)}")
    print(f"residual = {sol.residual:.3e}")
    return EXIT_OK


def cmd_velocity(args) -> int:
    n = _grid(args.grid)
    model = load_model(args.model)
    rep = velocity(model, n)
    v = rep.v_bar
    if model.d == 1:
        print(f"v_bar = {float(v):.6g}")
        print(f"hstar(v_bar) = {rep.hstar_at_vbar:.3e}")
    else:
        print(f"v_bar = {' '.join(f'{x:.6g}' for x in np.atleast_1d(v))}")
    print(f"hbar(0) = {rep.hbar_at_zero:.3e}")
    if args.out:
        out = output_dir(args)
        write_json(out / "velocity.json", {"model": model.name, "fingerprint": model.fingerprint, **rep.as_dict()})
    return EXIT_OK


def cmd_sweep(args) -> int:
    n = _grid(args.grid)
    model = load_model(args.model)
    out = output_dir(args)
    if args.replay:
        if not Path(args.replay).is_file():
            raise CliError(f"table {args.replay!r} not found")
        try:
            table = HbarTable.from_csv(args.replay)
        except (KeyError, ValueError, IndexError) as exc:
            raise CliError(f"unreadable table {args.replay!r}: {exc}") from None
    else:
        pmin, pmax = parse_number(args.pmin), parse_number(args.pmax)
        count = int(args.count)
        if count < 3:
            raise CliError("--count must be at least 3")
        if not pmin < pmax:
            raise CliError("--pmin must be smaller than --pmax")
        table = sweep(model, pmin, pmax, count, n, workers=int(args.workers))
    conv = check_convexity(table)
    coer = coercivity_check(model, table)
    table.to_csv(out / "hbar_table.csv")
    report = {
        "model": model.name,
        "fingerprint": model.fingerprint,
        "convexity": {"passed": conv.passed, "margin": conv.margin, "checked": conv.checked,
                      "violations": conv.violations},
        "coercivity": {"passed": coer.passed, "min_slack": coer.min_slack, "constants": coer.constants,
                       "violations": coer.violations},
    }
    write_json(out / "report.json", report)
    text = conv.summary() + "\n" + coer.summary() + "\n"
    atomic_write_text(out / "report.txt", text)
    if args.emit_gnuplot and table.d == 1:
        write_columns(out / "hbar.dat", {"p": table.p_grid, "hbar": table.hbar}, comment=f"model {model.name}")
        gnuplot_stub(out / "hbar.gp", "hbar.dat", "p", "effective Hamiltonian", f"H(p), {model.name}")
    sys.stdout.write(text)
    return EXIT_OK if conv.passed and coer.passed else EXIT_CERTIFICATE


def _resolution(args):
    from .experiments import Resolution

    m = int(args.cells_per_period)
    if m < 4:
        raise CliError("--cells-per-period must be at least 4")
    length = None if args.length is None else _positive("--length", args.length)
    return Resolution(
        cells_per_period=m, cfl=_positive("--cfl", args.cfl), length=length,
        A=_positive("--A", args.A), snapshots=int(args.snapshots),
    )


def cmd_simulate(args) -> int:
    from .fokker_planck import Domain, init_state, simulate, write_snapshots

    model = load_model(args.model)
    eps = _positive("--eps", args.eps)
    T = _positive("--T", args.T, allow_zero=True)
    bumps = load_bumps(args.bumps) if args.bumps else [(0.0, 1.0)]
    res = _resolution(args)
    dt = None if args.dt is None else _positive("--dt", args.dt)
    out = output_dir(args)
    domain = Domain(length=res.length if res.length is not None else None, cells_per_period=res.cells_per_period)
    state = init_state(model, eps, bumps, A=res.A, domain=domain)
    if dt is None:
        dt = state.default_dt(res.cfl)
    every = args.snapshot_every
    if every is None:
        every = max(1, math.ceil(T / dt - 1e-9) // res.snapshots) if T > 0 else 1
    result = simulate(state, T, dt, int(every))
    manifest = write_snapshots(out, result)
    if args.emit_gnuplot:
        write_columns(out / "com.dat", {"t": [d.t for d in result.snapshots], "com": [d.com for d in result.snapshots]})
        gnuplot_stub(out / "com.gp", "com.dat", "t", "center of mass", f"center of mass, {model.name}")
    print(f"snapshots = {len(result.snapshots)}")
    print(f"steps = {result.steps}  dt = {result.dt:.6g}")
    print(f"max relative mass error = {result.max_mass_error:.3e}")
    print(f"manifest = {manifest}")
    return EXIT_OK if result.max_mass_error < 1e-11 else EXIT_CERTIFICATE


def _write_report(out: Path, report, stem: str) -> None:
    write_json(out / f"{stem}.json", report.as_dict())
    atomic_write_text(out / f"{stem}.txt", report.to_text())


def cmd_experiment(args) -> int:
    from . import experiments as ex

    model = load_model(args.model)
    n = _grid(args.grid)
    res = _resolution(args)
    kind = args.experiment
    out = output_dir(args)
    if kind == "transport":
        eps = parse_list(args.eps)
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise CliError("--eps must be a strictly decreasing list of positive values")
        T = _positive("--T", args.T)
        rep = ex.transport(model, eps, T, res, n=n, workers=int(args.workers))
        _write_report(out, rep, "transport")
        if args.emit_gnuplot:
            for i, row in enumerate(rep.rows):
                name = f"com_{i}.dat"
                write_columns(out / name, {"t": row.times, "com": row.com}, comment=f"eps {row.epsilon:g}")
                gnuplot_stub(out / f"com_{i}.gp", name, "t", "center of mass", f"eps = {row.epsilon:g}")
        ok = rep.passed
    elif kind == "multimass":
        eps = _positive("--eps", args.eps)
        T = _positive("--T", args.T)
        bumps = load_bumps(args.bumps) if args.bumps else [(-2.0, 0.3), (2.0, 0.7)]
        rep = ex.multimass(model, eps, bumps, T, res, n=n)
        _write_report(out, rep, "multimass")
        ok = rep.passed
    elif kind == "profile":
        eps = _positive("--eps", args.eps)
        t = _positive("--t", args.t)
        hw = _positive("--half-window", args.half_window)
        rep = ex.profile_compare(model, eps, t, res, half_window=hw, points=int(args.points), n=n)
        _write_report(out, rep, "profile")
        if args.emit_gnuplot:
            write_columns(out / "profile.dat", {"x": rep.x, "r_eps": rep.r_eps, "hopf_lax": rep.hopf_lax})
            gnuplot_stub(out / "profile.gp", "profile.dat", "x", "rate", f"rate profile, {model.name}")
        ok = rep.passed
    else:
        eps = parse_list(args.eps)
        if not eps or any(e <= 0 for e in eps):
            raise CliError("--eps must hold positive values")
        t0 = _positive("--t0", args.t0)
        delta = _positive("--delta", args.delta)
        for e in eps:
            if t0 < e * delta:
                raise CliError(f"--t0 must be at least eps*delta ({e * delta:g})")
        reps = [ex.harnack_diag(model, e, t0, delta, res) for e in eps]
        values = [r.c_hat for r in reps]
        ref = values[0]
        finite = all(math.isfinite(v) for v in values)
        ratio = max(values) / ref if finite and ref > 0 else math.inf
        ok = finite and ratio < 3.0
        payload = {"model": model.name, "t0": t0, "rows": [r.as_dict() for r in reps], "ratio": ratio, "passed": ok}
        write_json(out / "harnack.json", payload)
        atomic_write_text(out / "harnack.txt", "".join(r.to_text() for r in reps) + f"ratio = {ratio:.4g}\n")
        for r in reps:
            sys.stdout.write(r.to_text())
        print(f"ratio = {ratio:.4g}  {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_CERTIFICATE
    sys.stdout.write(rep.to_text())
    return EXIT_OK if ok else EXIT_CERTIFICATE


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="asymmetric-ratchet", help="preset name or coefficient file")
    p.add_argument("--grid", default=CELL_GRID, help="cell-problem grid points (even, >= 8)")
    p.add_argument("--out", default=None, help="output directory (relative to $%s if set)" % OUTPUT_ROOT_ENV)
    p.add_argument("--emit-gnuplot", action="store_true", help="also write gnuplot data and scripts")
    p.add_argument("--config", default=None, help="JSON or key=value file; its values override flags")


def _sim_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cells-per-period", default=CELLS_PER_PERIOD, type=int)
    p.add_argument("--cfl", default=CFL_TARGET, help="upwind CFL number for the default time step")
    p.add_argument("--length", default=None, help="torus length (default sized from v_bar and T)")
    p.add_argument("--A", default=ENVELOPE_A, help="decay rate of the initial bumps")
    p.add_argument("--snapshots", default=SNAPSHOTS, type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motorhom", description="Homogenized transport of two-state motor models.")
    parser.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto",
                        help="time-stepping kernel (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hbar", help="effective Hamiltonian and its gradient at one momentum")
    _common(p)
    p.add_argument("--p", required=True, help="momentum (comma-separated in 2-D)")
    p.set_defaults(func=cmd_hbar)

    p = sub.add_parser("sweep", help="tabulate H on a momentum grid and certify its structure")
    _common(p)
    p.add_argument("--pmin", default="-2")
    p.add_argument("--pmax", default="2")
    p.add_argument("--count", default=41, type=int)
    p.add_argument("--workers", default=1, type=int)
    p.add_argument("--replay", default=None, help="certify an existing table instead of solving")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("velocity", help="transport velocity DH(0) and H*(v)")
    _common(p)
    p.set_defaults(func=cmd_velocity)

    p = sub.add_parser("simulate", help="run the two-species simulator and write snapshots")
    _common(p)
    _sim_options(p)
    p.add_argument("--eps", required=True)
    p.add_argument("--T", default=FINAL_TIME)
    p.add_argument("--bumps", default=None, help="file with 'center mass' lines or a JSON list")
    p.add_argument("--dt", default=None)
    p.add_argument("--snapshot-every", default=None, type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="end-to-end verification experiments")
    esub = p.add_subparsers(dest="experiment", required=True)
    e = esub.add_parser("transport")
    _common(e)
    _sim_options(e)
    e.add_argument("--eps", default="1/16,1/32,1/64", help="strictly decreasing list, fractions allowed")
    e.add_argument("--T", default=FINAL_TIME)
    e.add_argument("--workers", default=1, type=int)
    e = esub.add_parser("multimass")
    _common(e)
    _sim_options(e)
    e.add_argument("--eps", default="1/32")
    e.add_argument("--T", default=FINAL_TIME)
    e.add_argument("--bumps", default=None)
    e = esub.add_parser("profile")
    _common(e)
    _sim_options(e)
    e.add_argument("--eps", default="1/32")
    e.add_argument("--t", default=FINAL_TIME)
    e.add_argument("--half-window", default=1.0)
    e.add_argument("--points", default=41, type=int)
    e = esub.add_parser("harnack")
    _common(e)
    _sim_options(e)
    e.add_argument("--eps", default="1/16,1/32")
    e.add_argument("--t0", default=0.25)
    e.add_argument("--delta", default=1.0)
    for name in ("transport", "multimass", "profile", "harnack"):
        esub.choices[name].set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            apply_config(args, load_config(args.config))
        if args.backend != "auto":
            if args.backend not in kernels.available_backends():
                raise CliError(f"backend {args.backend!r} is not available")
            kernels.BACKEND = args.backend
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MotorhomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
