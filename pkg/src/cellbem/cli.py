"""Command-line interface: convergence studies, simulations, CV, sweeps.

All outputs are CSV with a header row; ``--report`` adds a plain-text
summary on stderr-independent stdout after the CSV.  Exit status is nonzero
when a run fails its own validity checks (propagation failure is data, not
an error).
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .config import load_cv_config
from .harness import CVConfig, CVProtocol
from .integrator import SplitRHS, StepperConfig, simulate
from .ionic import Stimulus


def _write(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_converge(args) -> int:
    Ms = [int(m) for m in args.M.split(",")]
    rows = harness.run_convergence(args.geometry, Ms, ref_factor=args.ref_factor)
    _write(harness.convergence_csv(rows), args.output)
    if args.report:
        Ms = [r.M for r in rows]
        s0 = harness.fitted_slope(Ms, [r.e0 for r in rows])
        s1 = harness.fitted_slope(Ms, [r.e1 for r in rows])
        print(f"# geometry {args.geometry}: fitted slope e0 = {s0:.3f}, e1 = {s1:.3f}")
    return 0


def _config_with_overrides(args) -> CVConfig:
    cfg = load_cv_config(args.config) if args.config else CVConfig()
    updates = {}
    if getattr(args, "dx", None) is not None:
        updates["dx"] = args.dx
    if getattr(args, "dt", None) is not None:
        updates["dt"] = args.dt
    if updates:
        from dataclasses import replace
        cfg = replace(cfg, **updates)
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _config_with_overrides(args)
    scene = cfg.build_scene()
    from .coupling import build_coupled, build_steklov_maps
    ops = build_steklov_maps(scene)
    system = build_coupled(scene, ops, cfg.kappa * harness.CM_PER_UM)
    model = cfg.build_model()
    targets = harness.stimulus_targets(scene, system, cfg.cols, cfg.rows)
    stim = Stimulus(cfg.amplitude, 0.0, cfg.duration, targets)
    rhs = SplitRHS(system, model, stim)
    protocol = CVProtocol()
    res = simulate(rhs, cfg.t_end, StepperConfig(dt=cfg.dt, seed=cfg.seed),
                   probe_points=protocol.probe_points(cfg.cols, cfg.c_l))
    _write(res.probes_csv(), args.output)
    if args.report:
        print("# " + res.report().replace("\n", "\n# "))
    return 0


def _cmd_cv(args) -> int:
    cfg = _config_with_overrides(args)
    res = harness.run_cv(cfg, CVProtocol(), cv_reference=args.cv_reference)
    _write(res.csv(), args.output)
    if args.report:
        print(f"# CV = {res.cv!r} um/ms, failed = {res.failed}, "
              f"max snap = {res.snap_distance.max():.3f} um")
        if res.relative_error is not None:
            print(f"# relative error vs reference: {res.relative_error:+.4%}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_cv_config(args.config) if args.config else CVConfig()
    values = [float(v) for v in args.values.split(",")]
    rows = harness.run_sweep(args.kind, values, cfg)
    _write(harness.sweep_csv(args.kind, rows), args.output)
    if args.report:
        ok = [(v, cv) for v, cv, failed in rows if not failed]
        print(f"# sweep {args.kind}: {len(ok)}/{len(rows)} runs propagated")
        for v, cv in ok:
            print(f"#   {v:g} -> {cv:.2f} um/ms")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellbem",
                                 description="Boundary-element cell-by-cell "
                                             "electrophysiology solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="interface-map convergence study")
    p.add_argument("--geometry", choices=("a", "b", "c", "d"), required=True)
    p.add_argument("--M", required=True, help="comma-separated node counts")
    p.add_argument("--ref-factor", type=int, default=4)
    p.add_argument("--output", default=None)
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("simulate", help="time integration with probe output")
    p.add_argument("--config", default=None)
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("cv", help="conduction velocity measurement")
    p.add_argument("--config", default=None)
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--cv-reference", type=float, default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("sweep", help="parameter sweep of CV runs")
    p.add_argument("--kind", required=True,
                   choices=("kappa", "sigma_i", "disc_freq", "disc_amp",
                            "cell_length", "cell_width", "cell_area"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
