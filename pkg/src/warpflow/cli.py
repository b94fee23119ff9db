"""Command-line entry point: ``warpflow <subcommand> [options]``.

Exit codes: 0 success, 1 configuration or input error, 2 blow-up
detected, 3 a check of the subcommand failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import DIMENSION_CONSTANTS, diagnose_trajectory
from .errors import BlowUpError, ConfigurationError, IngestionError, WarpFlowError
from .flow import (
    REPARAMETERIZATIONS,
    FlowConfig,
    evolve,
    modified_time_to_tau,
    reparameterization_residual,
    reparameterize_modified,
)
from .geometry import curvature
from .presets import PRESET_CLASS_NOTES, PRESET_FORMULAS
from .residuals import (
    convergence_order,
    discrepancy_table,
    nearest_indices,
    residual_series,
    residual_specs,
    study_configs,
    untested_results,
    write_orders_csv,
    write_residuals_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_CHECK_FAILED = 3

logger = logging.getLogger("warpflow")


def _prepare(args) -> tuple[FlowConfig, Path]:
    config = io.load_config(args.config)
    out_dir = io.resolve_out_dir(config, getattr(args, "out_dir", None))
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, out_dir


def _manifest(command: str, config: FlowConfig) -> io.RunManifest:
    return io.RunManifest(command, io.config_dict(config), io.software_version(),
                          io.grid_hash(config.grid()))


def _write_diagnostics(traj, out_dir: Path, manifest: io.RunManifest, args) -> object:
    diag = diagnose_trajectory(traj, dimension_constant=args.dimension_constant,
                               c_bounds=tuple(args.c_bounds))
    manifest.add(io.write_series_csv(diag.reports, out_dir / "series.csv"))
    manifest.add(io.write_text(out_dir / "diagnostics.json", diag.to_json()))
    if diag.mass is not None:
        manifest.add(io.write_mass_csv(diag.mass, out_dir / "mass_series.csv"))
    return diag


def _print_failures(diag, t_min: float = 0.0) -> list:
    fails = diag.failures(t_min)
    for t, c in fails:
        where = "trajectory" if t is None else f"t={t:.6g}"
        print(f"  FAIL {c.name} at {where}: margin={c.margin:.3e} worst={c.worst_node}")
    return fails


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    config, out_dir = _prepare(args)
    manifest = _manifest("run", config)

    def on_record(index, state):
        manifest.add_all(io.emit_state(state, out_dir, index))

    try:
        traj = evolve(config, fixed_dt=args.dt, on_record=on_record)
    except BlowUpError as exc:
        traj = exc.trajectory
        manifest.notes["error"] = str(exc)
        if traj is not None:
            manifest.notes["steps"] = traj.meta.get("steps")
            manifest.add(io.write_states_index(traj, out_dir / io.STATES_INDEX))
            try:
                _write_diagnostics(traj, out_dir, manifest, args)
            except WarpFlowError as diag_exc:
                manifest.notes["diagnostics_error"] = str(diag_exc)
        manifest.finalize("incomplete")
        manifest.write(out_dir)
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    manifest.notes["steps"] = traj.meta["steps"]
    manifest.notes["boundary_mismatch"] = bool(traj.meta["boundary_mismatch"])
    manifest.add(io.write_states_index(traj, out_dir / io.STATES_INDEX))
    diag = _write_diagnostics(traj, out_dir, manifest, args)
    manifest.finalize("complete")
    manifest.write(out_dir)
    print(f"run complete: {len(traj)} states, {traj.meta['steps']} steps, t={traj.times[-1]:.6g}")
    fails = _print_failures(diag)
    print(f"diagnostics: {'all pass' if not fails else f'{len(fails)} failing'} -> {out_dir}")
    return EXIT_OK


def cmd_invariants(args) -> int:
    config, out_dir = _prepare(args)
    traj = io.load_trajectory(out_dir, config)
    diag = diagnose_trajectory(traj, dimension_constant=args.dimension_constant,
                               c_bounds=tuple(args.c_bounds))
    path = io.write_text(out_dir / "invariants.json", diag.to_json())
    print(f"re-checked {len(traj)} stored states -> {path}")
    fails = _print_failures(diag)
    return EXIT_CHECK_FAILED if fails else EXIT_OK


def cmd_residuals(args) -> int:
    config, out_dir = _prepare(args)
    M = config.M
    if M % 4 or M // 4 < 8:
        raise ConfigurationError("residual study needs M divisible by 4 with M/4 >= 8", "M")
    configs = study_configs(config, (M // 4, M // 2, M))
    manifest = _manifest("residuals", config)
    trajs = []
    for c in configs:
        logger.info("residual study: M=%d", c.M)
        trajs.append(evolve(c))
    targets = np.linspace(0.1, 0.9, args.targets) * config.t_end
    specs = residual_specs(n=config.n)
    results = convergence_order(specs, trajs, targets) + untested_results()
    reports = residual_series(specs, trajs[-1], nearest_indices(trajs[-1], targets))
    write_orders_csv(out_dir / "orders.csv", results)
    write_residuals_csv(out_dir / "residuals.csv", reports)
    rows = discrepancy_table(results)
    with open(out_dir / "discrepancies.csv", "w", newline="") as fh:
        fh.write("equation,printed_form,printed_verdict,derived_verdict\n")
        for r in rows:
            fh.write(",".join(r) + "\n")
    for name in ("orders.csv", "residuals.csv", "discrepancies.csv"):
        manifest.add(out_dir / name)
    manifest.notes["grids"] = [c.M for c in configs]
    manifest.finalize("complete")
    manifest.write(out_dir)
    for r in results:
        print(f"  {r.key:34s} order={r.observed_order:7.3f} max={r.max_residual:.3e} {r.verdict}")
    bad = [r for r in results if r.verdict == "inconclusive"
           or (r.verdict == "discrepancy" and not r.form.startswith("printed"))]
    return EXIT_CHECK_FAILED if bad else EXIT_OK


def compare_modified(config: FlowConfig, tol: float = 1e-3) -> dict:
    """Modified run to ``config.t_end``, mapped to Ricci-flow time, against
    a plain run to the matching tau."""
    n = config.n
    mod = evolve(replace(config, modified=True))
    tau_end = float(modified_time_to_tau(mod.times[-1], n))
    plain = evolve(replace(config, modified=False, t_end=tau_end))
    mapped = reparameterize_modified(mod, taus=plain.times, pair="verified")
    rows = []
    for a, b in zip(mapped.states, plain.states):
        diff = float(np.max(np.abs(a.profile.psi - b.profile.psi)))
        scale = float(np.max(np.abs(b.profile.psi)))
        rows.append((b.t, diff, diff / scale))
    pairs = {name: reparameterization_residual(n, name) for name in REPARAMETERIZATIONS}
    worst = max(r[2] for r in rows)
    return {"tau_end": tau_end, "t_modified_end": float(mod.times[-1]), "rows": rows,
            "max_relative_difference": worst, "chain_rule_residual": pairs,
            "passed": bool(worst <= tol and pairs["verified"] <= 1e-6)}


def cmd_compare_modified(args) -> int:
    config, out_dir = _prepare(args)
    manifest = _manifest("compare-modified", config)
    res = compare_modified(config, args.tol)
    n = config.n
    with open(out_dir / "compare_modified.csv", "w", newline="") as fh:
        fh.write("tau,sup_abs_diff_psi,rel_diff_psi\n")
        for tau, d, rel in res["rows"]:
            fh.write(f"{io.fmt(tau)},{io.fmt(d)},{io.fmt(rel)}\n")
    manifest.add(out_dir / "compare_modified.csv")
    summary = {k: v for k, v in res.items() if k != "rows"}
    manifest.add(io.write_text(out_dir / "compare_modified.json",
                               json.dumps(summary, indent=2, sort_keys=True)))
    manifest.finalize("complete")
    manifest.write(out_dir)
    print(f"verified pair: c(tau) = 1 + {2 * n}*tau, t(tau) = log(1 + {2 * n}*tau)/{2 * n}; "
          f"chain-rule residual {res['chain_rule_residual']['verified']:.3e}")
    print(f"printed pair:  c(tau) = 1 + {n}*tau, t(tau) = log(1 + {n}*tau)/{n}; "
          f"chain-rule residual {res['chain_rule_residual']['printed']:.3e}")
    print(f"tau_end={res['tau_end']:.9g}  max relative psi difference "
          f"{res['max_relative_difference']:.3e}")
    return EXIT_OK if res["passed"] else EXIT_CHECK_FAILED


def cmd_presets(args) -> int:
    for name, formula in PRESET_FORMULAS.items():
        print(f"{name}\n    {formula}\n    class: {PRESET_CLASS_NOTES[name]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _bounds(text: str) -> list:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'C1,C2', got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError("need 0 < C1 <= C2")
    return [lo, hi]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warpflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--out-dir", default=None,
                        help=f"output directory (overrides ${io.OUT_DIR_ENV} and out_dir)")
        return sp

    def with_diag(sp):
        sp.add_argument("--dimension-constant", choices=DIMENSION_CONSTANTS,
                        default="corrected_n_plus_1")
        sp.add_argument("--c-bounds", type=_bounds, default=[0.5, 2.0],
                        help="class bounds C1,C2 (default 0.5,2)")
        return sp

    run = with_diag(with_config(sub.add_parser("run", help="evolve, diagnose, write outputs")))
    run.add_argument("--dt", type=float, default=None,
                     help="fixed time step, bypassing the stability limit")
    run.set_defaults(func=cmd_run)
    inv = with_diag(with_config(sub.add_parser("invariants", help="re-check a stored run")))
    inv.set_defaults(func=cmd_invariants)
    res = with_config(sub.add_parser("residuals", help="residual suite on M/4, M/2, M"))
    res.add_argument("--targets", type=int, default=5, help="number of sampled times")
    res.set_defaults(func=cmd_residuals)
    cm = with_config(sub.add_parser("compare-modified",
                                    help="modified flow mapped to Ricci flow vs a plain run"))
    cm.add_argument("--tol", type=float, default=1e-3)
    cm.set_defaults(func=cmd_compare_modified)
    pr = sub.add_parser("presets", help="list initial-data presets")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, IngestionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except WarpFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
