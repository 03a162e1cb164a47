"""Command-line front end.

Subcommands:

  run                  integrate a configuration, write all artifacts
  verify-constitutive  property suites for the drag polynomial
  mms                  manufactured-solution convergence ladders
  energy-check         re-check an existing run directory offline
  dump-config          print the resolved configuration

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 check
failure.  The output root can be overridden with FORCHFLOW_OUTPUT_ROOT.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__, config, energy, mms, output, report, solver
from .constitutive import ForchheimerPolynomial
from .errors import ConfigError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


def _resolve_out_dir(resolved, override):
    out_dir = override if override else resolved.output_dir
    root = os.environ.get("FORCHFLOW_OUTPUT_ROOT")
    if root and not os.path.isabs(out_dir):
        out_dir = os.path.join(root, out_dir)
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _load_config(args):
    resolved = config.parse_config(args.config, strict=args.strict)
    for issue in resolved.warnings:
        print(f"warning: {issue}", file=sys.stderr)
    return resolved


def cmd_run(args):
    resolved = _load_config(args)
    out_dir = _resolve_out_dir(resolved, args.out)
    manifest_path = os.path.join(out_dir, "manifest.json")
    output.write_manifest(manifest_path, args.config, resolved, status="running")

    sink = output.RunSink(out_dir, resolved.grid)
    u0, v0 = resolved.initial_fields()
    started = time.perf_counter()
    try:
        result = solver.run(
            resolved.grid, resolved.params, resolved.stepper, u0, v0,
            cadence=resolved.cadence, sink=sink,
        )
    except NumericError as err:
        sink.close()
        output.write_manifest(manifest_path, args.config, resolved, status="failed")
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        sink.close()
    elapsed = time.perf_counter() - started

    output.write_constants(os.path.join(out_dir, "constants.txt"), result.constants)
    output.write_gnuplot_summary(os.path.join(out_dir, "summary.dat"), result.ledger)
    report.energy_bound_figure(os.path.join(out_dir, "energy_bound.png"), result.ledger)
    t_end, u_end, _, v_end = result.snapshots[-1]
    report.fields_figure(
        os.path.join(out_dir, "fields_final.png"), resolved.grid, t_end, u_end, v_end
    )
    _write_check_reports(out_dir, result.ledger, result.constants,
                         resolved.grid, resolved.params, u0, v0)
    output.write_manifest(
        manifest_path, args.config, resolved, status="completed",
        timings={"wall_seconds": elapsed, "steps": len(result.ledger) - 1},
    )
    print(f"run completed: {len(result.ledger) - 1} steps -> {out_dir}")
    return EXIT_OK


def _write_check_reports(out_dir, rows, constants, grid, params, u0, v0):
    gron = energy.gronwall_check(rows, constants)
    u0_norm = grid.volume_integral(np.abs(u0) ** params.alpha)
    v0_norm = grid.volume_integral(np.asarray(v0) ** 2)
    grad = energy.integrated_gradient_check(rows, constants, u0_norm, v0_norm)
    with open(os.path.join(out_dir, "checks.txt"), "w", encoding="utf-8") as fh:
        fh.write(gron.summary() + "\n")
        fh.write(grad.summary() + "\n")
    with open(os.path.join(out_dir, "checks.csv"), "w", encoding="utf-8") as fh:
        fh.write("check,passed,detail\n")
        fh.write(f"gronwall,{int(gron.passed)},{gron.max_relative_excess!r}\n")
        fh.write(f"integrated_gradient,{int(grad.passed)},{grad.margin!r}\n")
    return gron, grad


def cmd_verify_constitutive(args):
    if args.config is None:
        poly = ForchheimerPolynomial((1.0, 1.0), (0.0, 1.0))
    else:
        poly = _load_config(args).params.poly
    a = poly.envelope_exponent
    xi = poly.sample_points(1e8, 1000)
    checks = []

    s = poly.inverse_flux(xi)
    round_trip = np.max(np.abs(poly.flux(s) - xi) / np.maximum(xi, 1.0))
    checks.append(("round_trip", round_trip <= 1e-10, f"max rel residual {round_trip:.3e}"))

    k1 = poly.conductivity(xi)
    mono = float(np.max(np.diff(k1)))
    checks.append(("monotone_conductivity", mono <= 1e-14, f"max increase {mono:.3e}"))

    h = poly.potential_batch(xi)
    low = k1 * xi**2
    scale = np.maximum(low, 1e-300)
    sandwich_lo = float(np.min((h - low) / scale))
    sandwich_hi = float(np.max((h - 2.0 * low) / scale))
    ok = sandwich_lo >= -1e-8 and sandwich_hi <= 1e-8
    checks.append(("potential_sandwich", ok,
                   f"lower slack {sandwich_lo:.3e}, upper slack {sandwich_hi:.3e}"))

    s_samples = np.logspace(-6, 6, 500)
    slack = poly.drag(s_samples) - poly.concavity_ratio * s_samples * poly.drag_slope(s_samples)
    checks.append(("concavity_condition", float(slack.min()) >= -1e-12,
                   f"min slack {slack.min():.3e}"))

    d1, d2 = poly.estimate_envelope_bounds(1e8, 1000)
    d3 = poly.estimate_growth_floor(1e8, 1000)
    upper = k1 * xi**2 - d2 * xi ** (2.0 - a)
    lower = d3 * (xi ** (2.0 - a) - 1.0) - k1 * xi**2
    bound_ok = float(upper.max()) <= 1e-9 * max(d2, 1.0) and float(lower.max()) <= 1e-9
    checks.append(("growth_envelope", bound_ok,
                   f"d1={d1:.6g} d2={d2:.6g} d3={d3:.6g}"))

    failed = False
    for name, ok, detail in checks:
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        failed = failed or not ok
    return EXIT_CHECK if failed else EXIT_OK


def cmd_mms(args):
    resolved = _load_config(args)
    params = resolved.params
    manufactured = mms.ManufacturedSolution(args.u_star, args.v_star)
    stepper_kwargs = {
        "tol_coupling": resolved.stepper.tol_coupling,
        "tol_picard": resolved.stepper.tol_picard,
        "omega": resolved.stepper.omega,
        "linear_rtol": resolved.stepper.linear_rtol,
    }

    def make_grid(nx):
        return type(resolved.grid)(
            nx=nx, ny=nx, lx=resolved.grid.lx, ly=resolved.grid.ly,
            edge_tags=resolved.grid.edge_tags, robin_phi=resolved.grid.robin_phi,
            allow_all_neumann=True,
        )

    rows = []
    if args.ladder in ("spatial", "both"):
        nx_levels = [args.nx0 * 2**k for k in range(args.levels)]
        levels = mms.spatial_ladder(
            make_grid, params, manufactured, nx_levels, resolved.stepper.dt,
            stepper_kwargs=stepper_kwargs,
        )
        rows.append(("spatial", levels))
    if args.ladder in ("temporal", "both"):
        dts = [resolved.stepper.dt / 2**k for k in range(args.levels)]
        levels = mms.temporal_ladder(
            make_grid(args.nx0), params, manufactured, dts,
            stepper_kwargs=stepper_kwargs,
        )
        rows.append(("temporal", levels))

    for ladder_name, levels in rows:
        print(f"{ladder_name} ladder:")
        print(f"  {'level':>10} {'err_u':>12} {'err_v':>12} {'order_u':>8} {'order_v':>8}")
        for lvl in levels:
            print(
                f"  {lvl.label:>10} {lvl.err_u:12.4e} {lvl.err_v:12.4e}"
                f" {lvl.order_u:8.3f} {lvl.order_v:8.3f}"
            )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for ladder_name, levels in rows:
            xs = list(range(1, len(levels) + 1))
            report.convergence_figure(
                os.path.join(args.out, f"convergence_{ladder_name}.png"),
                xs, [[l.err_u for l in levels], [l.err_v for l in levels]],
                ["u", "v"], "refinement level",
            )
            with open(
                os.path.join(args.out, f"convergence_{ladder_name}.csv"),
                "w", encoding="utf-8",
            ) as fh:
                fh.write("level,err_u,err_v,order_u,order_v\n")
                for lvl in levels:
                    fh.write(
                        f"{lvl.label},{lvl.err_u!r},{lvl.err_v!r},"
                        f"{lvl.order_u!r},{lvl.order_v!r}\n"
                    )
    return EXIT_OK


def cmd_energy_check(args):
    rows = output.read_ledger(os.path.join(args.run_dir, "ledger.csv"))
    values = output.read_constants_values(os.path.join(args.run_dir, "constants.txt"))
    constants = energy.ConstantsLedger(
        **{k: v for k, v in values.items() if k != "violations"},
        violations=values.get("violations", ()),
    )
    gron = energy.gronwall_check(rows, constants)
    t = np.array([r.t for r in rows])
    lhs = float(np.trapezoid(
        np.array([r.int_grad_u_weighted + r.int_grad_v_sq for r in rows]), t
    ))
    print(gron.summary())
    print(f"integrated-gradient lhs over trajectory: {lhs:.6g}")
    report.energy_bound_figure(os.path.join(args.run_dir, "energy_bound_recheck.png"), rows)
    return EXIT_OK if gron.passed else EXIT_CHECK


def cmd_dump_config(args):
    resolved = _load_config(args)
    sys.stdout.write(config.dump_config(resolved))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="forchflow",
        description="Finite-volume simulator for coupled active/passive crowd flow",
    )
    parser.add_argument("--version", action="version", version=f"forchflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="path to config file")
        p.add_argument("--strict", action="store_true",
                       help="treat admissibility warnings as errors")

    p_run = sub.add_parser("run", help="integrate and write artifacts")
    add_common(p_run)
    p_run.add_argument("--out", help="output directory (overrides [io] output_dir)")
    p_run.set_defaults(handler=cmd_run)

    p_ver = sub.add_parser("verify-constitutive", help="constitutive property suites")
    add_common(p_ver, config_required=False)
    p_ver.set_defaults(handler=cmd_verify_constitutive)

    p_mms = sub.add_parser("mms", help="manufactured-solution convergence ladders")
    add_common(p_mms)
    p_mms.add_argument("--ladder", choices=("spatial", "temporal", "both"),
                       default="both")
    p_mms.add_argument("--levels", type=int, default=3)
    p_mms.add_argument("--nx0", type=int, default=8, help="coarsest grid size")
    p_mms.add_argument("--u-star", dest="u_star",
                       default="2 + exp(-t)*cos(pi*x)*cos(pi*y)/2")
    p_mms.add_argument("--v-star", dest="v_star",
                       default="2 + 3*exp(-t)*cos(pi*y)/10")
    p_mms.add_argument("--out", help="optional directory for tables and figures")
    p_mms.set_defaults(handler=cmd_mms)

    p_chk = sub.add_parser("energy-check", help="re-check a run directory")
    p_chk.add_argument("run_dir", help="directory produced by `forchflow run`")
    p_chk.set_defaults(handler=cmd_energy_check, strict=False)

    p_dump = sub.add_parser("dump-config", help="print the resolved configuration")
    add_common(p_dump)
    p_dump.set_defaults(handler=cmd_dump_config)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
