"""Command-line reproduction harness.

Subcommands::

    sample-stable       draw stable variates, write them + an ECF diagnostic
    simulate-full       direct stiff solver on the coupled pair
    simulate-pim        projective integration of the slow variable
    simulate-effective  averaged equation (standalone or from a noise log)
    compare             coupled PIM/averaged run, per-path errors, overlay SVG
    convergence         strong-error level table, fitted slope, log2 SVG
    weak                weak-error report over the bounded test suite

Every run writes its outputs plus a ``manifest.cfg`` (resolved config +
provenance) into the output directory; rerunning a subcommand with
``--config manifest.cfg`` reproduces the CSVs byte for byte, regardless of
``--threads``.  Exit codes: 0 success, 2 config error, 3 numerical failure,
4 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, analysis, fastmath
from .config import ExperimentConfig, load_config, write_manifest
from .csvio import emit_error_report_csv, emit_table_csv, emit_trajectory_csv
from .direct import simulate_full
from .effective import draw_slow_noise, run_effective
from .errors import (BudgetError, ConfigError, LevyPimError, NumericalError,
                     ParameterError)
from .pim import run_pim
from .rng import ROLE_DIAG, RngStream
from .stable import StableSpec, empirical_cf, sample_standard_stable, stable_increment
from .svgplot import emit_svg_plot

_ECF_GRID = (-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0)


def _outdir(cfg, override):
    path = override if override else cfg.output_dir
    os.makedirs(path, exist_ok=True)
    return path


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "paths", None) is not None:
        cfg.paths = args.paths
    if getattr(args, "lmax", None) is not None:
        cfg.l_max = args.lmax
    return cfg.validate()


def _cmd_sample_stable(args) -> int:
    cfg = _load(args)
    alpha = args.alpha if args.alpha is not None else cfg.alpha1
    n = args.n if args.n is not None else cfg.paths
    dt = args.dt if args.dt is not None else cfg.macro_dt
    out = _outdir(cfg, args.out)
    spec = StableSpec(alpha)
    rng = RngStream(cfg.master_seed, ROLE_DIAG)
    samples = stable_increment(spec, dt, rng, size=n) if dt != 1.0 \
        else sample_standard_stable(spec, rng, size=n)

    emit_table_csv(["index", "value"], list(enumerate(map(float, samples))),
                   os.path.join(out, "samples.csv"))
    scaled = samples / dt ** (1.0 / alpha)
    cf = empirical_cf(scaled, _ECF_GRID)
    rows = []
    for u, z in zip(_ECF_GRID, cf):
        target = float(np.exp(-abs(u) ** alpha))
        rows.append([float(u), float(z.real), float(z.imag), target,
                     float(abs(z - target))])
        print(f"ecf u={u:+.1f}: re={z.real:+.4f} im={z.imag:+.4f} "
              f"target={target:.4f} |dev|={abs(z - target):.4f}")
    emit_table_csv(["u", "ecf_re", "ecf_im", "target", "abs_dev"], rows,
                   os.path.join(out, "samples.ecf.csv"))
    write_manifest(cfg, os.path.join(out, "manifest.cfg"),
                   command="sample-stable", threads=args.threads)
    return 0


def _cmd_simulate_full(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    system = cfg.system()
    dt = cfg.micro_dt if cfg.micro_dt > 0.0 else system.epsilon / 100.0
    slow, fast = simulate_full(system, cfg.x0, cfg.y0, dt, cfg.horizon,
                               RngStream(cfg.master_seed, 0))
    emit_trajectory_csv(slow, 0, os.path.join(out, "full_slow.csv"))
    emit_trajectory_csv(fast, 0, os.path.join(out, "full_fast.csv"))
    emit_svg_plot([("slow", slow.times, slow.values),
                   ("fast", fast.times, fast.values)],
                  os.path.join(out, "full.svg"),
                  title=f"direct solver, eps={system.epsilon}", ylabel="state")
    write_manifest(cfg, os.path.join(out, "manifest.cfg"),
                   command="simulate-full", threads=args.threads)
    return 0


def _cmd_simulate_pim(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    traj, noise_log = run_pim(cfg.system(), cfg.x0, cfg.y0, cfg.schedule(),
                              RngStream(cfg.master_seed, 0))
    emit_trajectory_csv(traj, 0, os.path.join(out, "pim_slow.csv"))
    emit_table_csv(["step", "increment"],
                   list(enumerate(map(float, noise_log))),
                   os.path.join(out, "noise_log.csv"))
    write_manifest(cfg, os.path.join(out, "manifest.cfg"),
                   command="simulate-pim", threads=args.threads)
    return 0


def _cmd_simulate_effective(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    system = cfg.system()
    sched = cfg.schedule()
    drift = cfg.effective()
    if drift.mode == "empirical":
        drift.prepare(system, RngStream(cfg.master_seed, 0))
    if args.noise_log:
        rows = []
        with open(args.noise_log) as f:
            f.readline()
            rows = [float(line.split(",")[1]) for line in f if line.strip()]
        noise = np.asarray(rows)
    else:
        noise = draw_slow_noise(system, sched, RngStream(cfg.master_seed, 0))
    traj = run_effective(drift, system, cfg.x0, sched, noise)
    emit_trajectory_csv(traj, 0, os.path.join(out, "effective.csv"))
    write_manifest(cfg, os.path.join(out, "manifest.cfg"),
                   command="simulate-effective", threads=args.threads)
    return 0


def _cmd_compare(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    system = cfg.system()
    sched = cfg.schedule()
    drift = cfg.effective()
    if drift.mode == "empirical":
        drift.prepare(system, RngStream(cfg.master_seed, 0))

    rows = []
    rejected = 0
    first_pair = None
    for k in range(cfg.paths):
        try:
            traj, noise_log = run_pim(system, cfg.x0, cfg.y0, sched,
                                      RngStream(cfg.master_seed, k))
            eff = run_effective(drift, system, cfg.x0, sched, noise_log)
        except NumericalError:
            rejected += 1
            continue
        rows.append([k, analysis.lp_path_error(traj, eff, cfg.p)])
        if first_pair is None:
            first_pair = (traj, eff)
    if first_pair is None:
        raise NumericalError("all comparison paths were rejected")

    traj, eff = first_pair
    emit_trajectory_csv(traj, 0, os.path.join(out, "pim_slow.csv"))
    emit_trajectory_csv(eff, 0, os.path.join(out, "effective.csv"))
    emit_table_csv(["path_id", f"lp_error_p{cfg.p}"], rows,
                   os.path.join(out, "path_errors.csv"))
    emit_svg_plot([("projective", traj.times, traj.values),
                   ("averaged", eff.times, eff.values)],
                  os.path.join(out, "compare.svg"),
                  title="projective vs averaged slow path", ylabel="x")
    errs = np.array([r[1] for r in rows])
    print(f"paths={len(rows)} rejected={rejected} "
          f"E_p={errs.mean():.6g} stderr={errs.std(ddof=1) / np.sqrt(len(errs)):.3g}")
    write_manifest(cfg, os.path.join(out, "manifest.cfg"), command="compare",
                   rejected_paths=rejected, threads=args.threads)
    return 0


def _cmd_convergence(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    system = cfg.system()
    drift = cfg.effective()
    if drift.mode == "empirical":
        drift.prepare(system, RngStream(cfg.master_seed, 0))
    base = cfg.schedule()

    def progress(lv):
        print(f"level {lv.level}: M={lv.micro_count} micro_dt={lv.micro_dt:.3e} "
              f"E_p={lv.e_p:.4f} stderr={lv.stderr:.4f} "
              f"rejected={lv.rejected}", flush=True)

    report = analysis.convergence_study(
        system, base, drift, cfg.p, cfg.l_max, cfg.paths, cfg.master_seed,
        x0=cfg.x0, y0=cfg.y0, budget=cfg.budget, progress=progress)
    emit_error_report_csv(report, os.path.join(out, "error_report.csv"))

    ls = [lv.level for lv in report.levels]
    log2e = [float(np.log2(lv.e_p)) for lv in report.levels]
    fit = None
    note = "slope fit unavailable"
    if report.slope is not None:
        c = np.mean(log2e) - report.slope * np.mean(ls)
        fit = ([ls[0], ls[-1]],
               [c + report.slope * ls[0], c + report.slope * ls[-1]],
               f"slope={report.slope:.2f}")
        note = (f"log2 slope = {report.slope:.3f} "
                f"&#177; {report.slope_half_width:.3f}")
        print(f"log2 slope = {report.slope:.4f} +- {report.slope_half_width:.4f}")
    emit_svg_plot([("log2 E_p", ls, log2e)], os.path.join(out, "convergence.svg"),
                  title=f"strong error, p={cfg.p}", xlabel="level l",
                  ylabel="log2(E_p)", note=note, fit_line=fit)
    total_rej = sum(lv.rejected for lv in report.levels)
    write_manifest(cfg, os.path.join(out, "manifest.cfg"), command="convergence",
                   rejected_paths=total_rej, threads=args.threads)
    return 0


def _cmd_weak(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    system = cfg.system()
    drift = cfg.effective()
    if drift.mode == "empirical":
        drift.prepare(system, RngStream(cfg.master_seed, 0))
    suite = analysis.WeakTestSuite()
    res = analysis.weak_error_ensemble(system, cfg.schedule(), drift, suite,
                                       cfg.paths, cfg.master_seed,
                                       x0=cfg.x0, y0=cfg.y0)
    rows = [[name, val, se] for name, (val, se) in res.items()]
    emit_table_csv(["phi", "weak_error", "stderr"], rows,
                   os.path.join(out, "weak_report.csv"))
    for name, (val, se) in res.items():
        print(f"phi={name}: weak error {val:.6g} (stderr {se:.3g})")
    write_manifest(cfg, os.path.join(out, "manifest.cfg"), command="weak",
                   threads=args.threads)
    return 0


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="levypim",
        description="Projective integration for slow-fast stable-noise SDEs")
    ap.add_argument("--version", action="version",
                    version=f"levypim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, noise_log=False):
        p.add_argument("--config", help="config or manifest file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--threads", type=int, default=1,
                       help="math backend threads (results are unaffected)")
        if noise_log:
            p.add_argument("--noise-log",
                           help="consume increments from this noise_log.csv")

    p = sub.add_parser("sample-stable", help="draw stable variates + ECF check")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--dt", type=float, help="increment horizon (1.0 = standard law)")
    common(p)
    p.set_defaults(fn=_cmd_sample_stable)

    p = sub.add_parser("simulate-full", help="direct stiff solver")
    common(p)
    p.set_defaults(fn=_cmd_simulate_full)

    p = sub.add_parser("simulate-pim", help="projective integration run")
    common(p)
    p.set_defaults(fn=_cmd_simulate_pim)

    p = sub.add_parser("simulate-effective", help="averaged equation run")
    common(p, noise_log=True)
    p.set_defaults(fn=_cmd_simulate_effective)

    p = sub.add_parser("compare", help="coupled projective/averaged comparison")
    p.add_argument("--paths", type=int, help="ensemble size override")
    common(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("convergence", help="strong-error level table + slope")
    p.add_argument("--lmax", type=int, help="number of refinement levels")
    p.add_argument("--paths", type=int, help="ensemble size override")
    common(p)
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("weak", help="weak-error report")
    p.add_argument("--paths", type=int, help="ensemble size override")
    common(p)
    p.set_defaults(fn=_cmd_weak)
    return ap


def cli(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fastmath.set_threads(args.threads)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _report_error("config", 2, exc)
        return 2
    except BudgetError as exc:
        _report_error("budget", 4, exc)
        return 4
    except ParameterError as exc:
        _report_error("config", 2, exc)
        return 2
    except (NumericalError, LevyPimError) as exc:
        _report_error("numerical", 3, exc)
        return 3
    except OSError as exc:
        _report_error("io", 3, exc)
        return 3


def _report_error(kind, code, exc):
    record = {"error": kind, "exit_code": code, "type": type(exc).__name__,
              "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
