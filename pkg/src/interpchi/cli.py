"""Command-line driver.

    interpchi gbc --config sphere.json
    interpchi interp --config sphere_height.json --t 0.25,1,4,16 --out runs/sphere.csv --json --plot
    interpchi ph --config torus_standing.json
    interpchi morse-bott --config sphere_z2.json
    interpchi selftest

The exit status is 0 when every check passed, 1 when one failed and 2 for
usage or configuration errors.  Timings are logged to stderr only.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import selftest as selftest_mod
from .config import ConfigError, Experiment, build_points, build_strata, load
from .evaluate import gauss_bonnet_chern, interpolation_integral
from .expr import ExpressionError
from .geometry import GeometryError
from .integrand import IntegrandError
from .morse import MorseError, morse_bott_sum, poincare_hopf_sum, stationary_phase_check
from .quadrature import QuadratureError
from .report import Check, Report, bounded, within

log = logging.getLogger("interpchi")

SP_T = [4.0, 16.0, 64.0]
SP_TOL = 0.05
HESSIAN_TOL = 1e-4


def _target(exp: Experiment) -> int | None:
    if "expected_chi" in exp.doc:
        return int(exp.doc["expected_chi"])
    return exp.spec.euler_characteristic


def _timed(label: str):
    class _T:
        def __enter__(self):
            self.t0 = time.perf_counter()

        def __exit__(self, *exc):
            log.info("%s took %.2f s", label, time.perf_counter() - self.t0)

    return _T()


def _interp_rows(report: Report, exp: Experiment, target: float | None, method: str = "interp") -> np.ndarray:
    if exp.field is None:
        raise ConfigError("this command needs a 'field'")
    with _timed(f"{method} quadrature"):
        vals = np.atleast_1d(interpolation_integral(exp.spec, exp.field, exp.t, exp.nodes))
    ref = float(np.round(np.mean(vals))) if target is None else float(target)
    for t, v in zip(exp.t, vals):
        report.add(within(method, v, ref, exp.tol, t))
    report.details[method] = {"t": exp.t, "values": vals.tolist(), "target": ref}
    return vals


def cmd_gbc(exp: Experiment) -> Report:
    report = Report("gbc")
    if exp.spec.n % 2:
        raise ConfigError("the Gauss-Bonnet-Chern integral needs an even-dimensional manifold")
    with _timed("gbc quadrature"):
        chi = gauss_bonnet_chern(exp.spec, exp.nodes)
    nearest = int(round(chi))
    target = _target(exp)
    ref = nearest if target is None else target
    report.add(within("gbc", chi, ref, exp.tol))
    report.details["gbc"] = {"chi_estimate": chi, "nearest_integer": nearest, "distance": abs(chi - nearest)}
    return report


def cmd_interp(exp: Experiment) -> Report:
    report = Report("interp")
    if not exp.t:
        raise ConfigError("interp needs a non-empty t list (config 't' or --t)")
    vals = _interp_rows(report, exp, _target(exp))
    spread = float(np.max(vals) - np.min(vals))
    report.add(bounded("interp-spread", spread, exp.tol))
    return report


def _integer_check(method: str, value: int, target: int | None) -> Check:
    return Check(method, float(value), 0.0, None if target is None else value == target)


def cmd_ph(exp: Experiment) -> Report:
    report = Report("ph")
    decls = build_points(exp.doc)
    if not decls:
        raise ConfigError("ph needs declared 'critical_points'")
    target = _target(exp)
    with _timed("poincare-hopf"):
        res = poincare_hopf_sum(exp.spec, exp.field, decls, exp.nodes)
    report.add(_integer_check("poincare-hopf", res.total, target))
    report.details["points"] = [
        {"patch": p.patch, "u": p.u, "nu": p.nu, "sign": p.sign, "eigenvalues": p.eigenvalues} for p in res.points
    ]
    sp_cfg = exp.doc.get("stationary_phase", {})
    sp_t = sp_cfg.get("t", SP_T)
    sp_tol = sp_cfg.get("tol", SP_TOL)
    with _timed("stationary phase"):
        sp = stationary_phase_check(exp.spec, exp.field, sp_t, decls, sp_cfg.get("nodes", exp.nodes))
    for i, (t, v) in enumerate(zip(sp.t, sp.values)):
        if i == len(sp.t) - 1:
            report.add(within("stationary-phase", v, res.total, sp_tol, t))
        else:
            report.add(Check("stationary-phase", v, None, None, t))
    report.add(bounded("hessian-identity", max(sp.hessian_residuals), HESSIAN_TOL))
    report.details["stationary_phase"] = {
        "t": sp.t,
        "values": sp.values,
        "monotone": sp.monotone,
        "hessian_residuals": sp.hessian_residuals,
        "determinant_residuals": sp.determinant_residuals,
    }
    if exp.t:
        _interp_rows(report, exp, res.total, "interp-cross-check")
    return report


def cmd_morse_bott(exp: Experiment) -> Report:
    report = Report("morse-bott")
    strata = build_strata(exp.doc, exp.spec)
    if not strata:
        raise ConfigError("morse-bott needs declared 'strata'")
    target = _target(exp)
    with _timed("morse-bott"):
        res = morse_bott_sum(exp.spec, exp.field, strata, exp.nodes)
    report.add(_integer_check("morse-bott", res.total, target))
    report.details["strata"] = [
        {"name": c.name, "m": c.m, "nu": c.nu, "chi": c.chi, "chi_estimate": c.chi_estimate, "contribution": c.contribution}
        for c in res.strata
    ]
    if exp.t:
        _interp_rows(report, exp, res.total, "interp-cross-check")
    return report


COMMANDS = {"gbc": cmd_gbc, "interp": cmd_interp, "ph": cmd_ph, "morse-bott": cmd_morse_bott}


def _t_list(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interpchi", description="Euler characteristic from the interpolation integrand.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress and timings to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "selftest"):
        sp = sub.add_parser(name)
        if name != "selftest":
            sp.add_argument("--config", required=True, help="JSON experiment config")
            sp.add_argument("--nodes", type=int, help="quadrature nodes per axis")
            sp.add_argument("--t", type=_t_list, help="comma-separated t values")
            sp.add_argument("--tol", type=float, help="tolerance for the checks")
        sp.add_argument("--out", help="write the CSV report here")
        sp.add_argument("--json", action="store_true", help="also write a JSON report (next to --out, else to stdout)")
        sp.add_argument("--plot", action="store_true", help="write a PNG figure next to --out")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.WARNING - 10 * min(args.verbose, 2))
    if args.plot and not args.out:
        print("interpchi: --plot needs --out", file=sys.stderr)
        return 2
    try:
        if args.command == "selftest":
            report = Report("selftest")
            with _timed("selftest"):
                for c in selftest_mod.run():
                    report.add(c)
        else:
            doc = load(args.config)
            exp = Experiment.from_doc(doc, args.nodes, args.t, args.tol)
            report = COMMANDS[args.command](exp)
            report.config = doc
    except (ConfigError, ExpressionError, GeometryError, IntegrandError, MorseError, QuadratureError, OSError) as exc:
        print(f"interpchi {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.json and not args.out:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_table())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_csv())
        if args.json:
            out.with_suffix(".json").write_text(report.to_json())
        if args.plot:
            from .plotting import plot_report

            plot_report(report, out.with_suffix(".png"))
    return 0 if report.ok else 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
