"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from .integrator import IntegratorConfig
from .nonlinearity import Check, DomainError, SpecError, eval_G, parse_spec
from .ode_core import energy_array, make_constants
from .orbits import (
    Orbit,
    OrbitKind,
    OrbitNotFound,
    SweepRow,
    constant_orbit,
    find_periodic,
    fit_decay_slope,
    homoclinic_by_continuation,
    homoclinic_by_tail_shooting,
    periods_increasing,
    round_sig,
    sweep_periods,
    verify_orbit,
)
from .pde import asymptotics_report, pde_residual, to_radial

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
#: relative distance to a0 below which ``a`` is the equilibrium itself
A0_RTOL = 1e-10
PDE_POINTS = 1000
PDE_TOL = 1e-5

log = logging.getLogger(__name__)


class ConfigError(Exception):
    """Bad user input; maps to exit code 2."""


class SolverError(Exception):
    """A solver gave up; maps to exit code 3."""


def _fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _dump(obj, indent=1) -> str:
    return json.dumps(round_sig(obj), indent=indent)


def _problem(args):
    try:
        spec = parse_spec(args.g, args.n)
        consts = make_constants(args.n, spec)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return consts, spec


def _config(args) -> IntegratorConfig | None:
    if args.rel_tol is None:
        return None
    if not 0 < args.rel_tol < 1:
        raise ConfigError("--rel-tol must lie in (0, 1)")
    return IntegratorConfig(rel_tol=args.rel_tol, abs_tol=1e-2 * args.rel_tol)


def _emit(text: str, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_orbit_csv(orbit: Orbit, consts, spec, path):
    E = energy_array(consts, spec, orbit.states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "v", "v1", "v2", "v3", "E"])
        for t, s, e in zip(orbit.t, orbit.states, E):
            w.writerow([_fmt(float(t))] + [_fmt(float(x)) for x in s] + [_fmt(float(e))])


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "singular-biharmonic"
    return plt


def _save_svg(fig, plt, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_orbit(orbit: Orbit, path):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    if orbit.kind is OrbitKind.CONSTANT:
        ax.axhline(orbit.a)
    else:
        ax.plot(orbit.t, orbit.v)
    ax.set_xlabel("t")
    ax.set_ylabel("v")
    ax.set_title(f"{orbit.kind.value} orbit, n={orbit.n}, g={orbit.g}")
    _save_svg(fig, plt, path)


def _plot_sweep(rows, path):
    plt = _figure()
    ok = [r for r in rows if r.error is None]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx([r.a for r in ok], [r.L for r in ok], "o-")
    ax.set_xlabel("a")
    ax.set_ylabel("L")
    _save_svg(fig, plt, path)


def _plot_tail(orbit: Orbit, slope, intercept, path):
    plt = _figure()
    t, v = orbit.t, orbit.v
    keep = (t >= 0) & (v > 0)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t[keep], np.log(v[keep]), label="log v")
    if slope is not None:
        ax.plot(t[keep], intercept + slope * t[keep], "--", label=f"fit, slope {slope:.6g}")
    ax.set_xlabel("t")
    ax.set_ylabel("log v")
    ax.legend()
    _save_svg(fig, plt, path)


def _orbit_payload(orbit: Orbit, report) -> dict:
    d = orbit.to_dict()
    d["report"] = report.as_dict()
    return d


# ----------------------------------------------------------------------------
# commands


def cmd_constants(args) -> int:
    consts, _ = _problem(args)
    _emit(_dump(consts.to_dict()), args.out_json)
    return EXIT_OK


def cmd_orbit(args) -> int:
    consts, spec = _problem(args)
    a = args.a
    if not (a > 0 and math.isfinite(a)):
        raise ConfigError("--a must be positive")
    if a > consts.a0 * (1 + A0_RTOL):
        raise ConfigError(f"--a must not exceed a0 = {consts.a0:.12g}")
    if abs(a - consts.a0) <= A0_RTOL * consts.a0:
        orbit = constant_orbit(consts, spec)
    else:
        try:
            orbit = find_periodic(consts, spec, a, config=_config(args))
        except (OrbitNotFound, ArithmeticError) as exc:
            raise SolverError(f"periodic orbit with min {a:.12g} not found: {exc}") from exc
    report = verify_orbit(consts, spec, orbit)
    _emit(_dump(_orbit_payload(orbit, report), indent=None), args.out_json)
    if args.out_csv:
        _write_orbit_csv(orbit, consts, spec, args.out_csv)
    if args.out_svg:
        _plot_orbit(orbit, args.out_svg)
    print(report, file=sys.stderr)
    return EXIT_OK


def sweep_values(a_min: float, a_max: float, steps: int) -> np.ndarray:
    """Geometric grid, largest ``a`` first so each row warm-starts the next."""
    if steps == 0:
        return np.empty(0)
    return np.geomspace(a_max, a_min, steps)


def cmd_sweep(args) -> int:
    consts, spec = _problem(args)
    if args.steps < 0:
        raise ConfigError("--steps must be >= 0")
    if not 0 < args.a_min <= args.a_max:
        raise ConfigError("need 0 < --a-min <= --a-max")
    if args.a_max > consts.a0 * (1 + A0_RTOL):
        raise ConfigError(f"--a-max must not exceed a0 = {consts.a0:.12g}")
    values = sweep_values(args.a_min, args.a_max, args.steps)
    at_a0 = np.abs(values - consts.a0) <= A0_RTOL * consts.a0
    rows = sweep_periods(consts, spec, values[~at_a0], config=_config(args))
    e0 = eval_G(spec, consts.a0, consts.B)
    rows += [SweepRow(a=float(a), c=0.0, L=0.0, E=e0, v_max=consts.a0) for a in values[at_a0]]
    rows.sort(key=lambda r: r.a)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a", "c", "L", "E", "v_max"])
    for r in rows:
        if r.error is None:
            w.writerow([_fmt(r.a), _fmt(r.c), _fmt(r.L), _fmt(r.E), _fmt(r.v_max)])
        else:
            w.writerow([_fmt(r.a)] + ["ERROR"] * 4)
    _emit(buf.getvalue().rstrip("\n"), args.out_csv)
    if args.out_svg:
        _plot_sweep(rows, args.out_svg)
    failed = sum(r.error is not None for r in rows)
    if failed:
        print(f"warning: {failed} sweep row(s) failed", file=sys.stderr)
    if len(rows) - failed > 1 and not periods_increasing([r for r in rows if r.L]):
        print("warning: L is not increasing as a decreases", file=sys.stderr)
    return EXIT_OK


def cmd_homoclinic(args) -> int:
    consts, spec = _problem(args)
    try:
        if args.method == "tail":
            orbit = homoclinic_by_tail_shooting(consts, spec, config=_config(args))
        else:
            orbit = homoclinic_by_continuation(consts, spec, config=_config(args))
    except (OrbitNotFound, ArithmeticError) as exc:
        raise SolverError(f"homoclinic construction ({args.method}) failed: {exc}") from exc
    report = verify_orbit(consts, spec, orbit)
    _emit(_dump(_orbit_payload(orbit, report), indent=None), args.out_json)
    if args.out_csv:
        _write_orbit_csv(orbit, consts, spec, args.out_csv)
    if args.out_svg:
        try:
            slope, intercept, _ = fit_decay_slope(orbit.t, orbit.v, orbit.v_max)
        except OrbitNotFound:
            slope, intercept = None, None
        _plot_tail(orbit, slope, intercept, args.out_svg)
    print(report, file=sys.stderr)
    return EXIT_OK


def _pde_checks(orbit: Orbit, consts, spec, report):
    """Append the radial-image checks to ``report``."""
    profile = to_radial(orbit, 0.1, 10.0, PDE_POINTS)
    res = pde_residual(profile, spec)
    report.metrics["pde_residual"] = res
    report.checks.append(Check("pde_residual", res <= PDE_TOL,
                               f"relative residual at {PDE_POINTS} points = {res:.3e}"))
    wide = to_radial(orbit, 1e-3, 1e3, 2000)
    report.metrics["asymptotics"] = asymptotics_report(wide, consts)


def cmd_verify(args) -> int:
    try:
        orbit = Orbit.from_json(args.orbit_file)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read orbit file {args.orbit_file}: {exc}") from exc
    try:
        consts, spec = orbit.problem()
    except (SpecError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    report = verify_orbit(consts, spec, orbit)
    try:
        _pde_checks(orbit, consts, spec, report)
    except DomainError as exc:
        report.checks.append(Check("pde_residual", False, str(exc)))
    if args.out_json:
        _emit(_dump(report.as_dict()), args.out_json)
    print(report)
    return EXIT_OK if report.ok else 1


# ----------------------------------------------------------------------------
# parser


def _common(p, outputs=("json",)):
    p.add_argument("--n", type=int, default=8, help="space dimension (>= 5)")
    p.add_argument("--g", default="critical", help="nonlinearity, e.g. critical or 'beta=32;mono=1,3'")
    p.add_argument("--rel-tol", type=float, default=None, help="integrator relative tolerance")
    for kind in outputs:
        p.add_argument(f"--out-{kind}", default=None, help=f"write {kind.upper()} here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="singular-biharmonic",
        description="Positive radial solutions of a singular biharmonic equation "
                    "via its Emden-Fowler ODE.",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="print the problem constants as JSON")
    _common(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("orbit", help="constant or periodic orbit with minimum a")
    _common(p, ("json", "csv", "svg"))
    p.add_argument("--a", type=float, required=True)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("sweep", help="periods over a geometric grid of minima")
    _common(p, ("csv", "svg"))
    p.add_argument("--a-min", type=float, required=True)
    p.add_argument("--a-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("homoclinic", help="homoclinic orbit and its diagnostics")
    _common(p, ("json", "csv", "svg"))
    p.add_argument("--method", choices=("tail", "continuation"), default="tail")
    p.set_defaults(func=cmd_homoclinic)

    p = sub.add_parser("verify", help="check an orbit JSON file")
    p.add_argument("--orbit-file", required=True)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
