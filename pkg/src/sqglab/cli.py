"""Command-line entry points: ``sqglab <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 property-suite failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config, _group
from .evolve import Mollify, NumericalError, SolverConfig, dss_error, run, run_approximate
from .field import RealField
from .snapshot import SnapshotFormatError, read_snapshot, write_snapshot

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

DIAGNOSTIC_COLUMNS = (["step", "t", "linf", "grad_linf", "t_grad_linf", "energy", "dissipation",
                       "energy_residual"] + [f"mean_drift_R{i}" for i in range(1, 5)]
                      + ["psi_p4", "max_principle_margin", "asymmetry", "flag"])


def _fmt(x) -> str:
    return repr(float(x))


def diagnostics_rows(diagnostics) -> list[list[str]]:
    """One row per step.  ``flag`` is empty for an all-finite row, ``no_group``
    when the asymmetry is undefined because no group was imposed, and
    ``nonfinite`` otherwise."""
    rows = []
    for d in diagnostics:
        nums = [d.t, d.linf, d.grad_linf, d.t_grad_linf, d.energy, d.dissipation, d.energy_residual,
                *d.mean_drift, d.psi_p4, d.max_principle_margin, d.asymmetry]
        finite = [math.isfinite(x) for x in nums]
        if all(finite):
            flag = ""
        elif not finite[-1] and all(finite[:-1]):
            flag = "no_group"
        else:
            flag = "nonfinite"
        rows.append([str(d.step)] + [_fmt(x) for x in nums] + [flag])
    return rows


def write_diagnostics(path, diagnostics) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        w.writerows(diagnostics_rows(diagnostics))


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def build_data(cfg: RunConfig) -> RealField:
    from . import data

    g, G = cfg.grid, cfg.group
    kind, A = cfg["data.kind"], cfg["data.amplitude"]
    if kind == "homogeneous":
        return data.homogeneous(g, cfg.profile(), A, mollify_cells=cfg["data.mollify_cells"])
    if kind == "bump":
        if G is None:
            return data.gaussian(g, (0.0, 0.0), cfg["data.width"], A)
        return data.symmetric_bump(g, G, width=cfg["data.width"], amp=A)
    if kind == "ring":
        return data.ring_bump(g, 1.0, cfg["data.width"], A)
    if kind == "random_symmetric":
        if G is None:
            raise ConfigError("random_symmetric data needs solver.group")
        return data.random_symmetric(g, G, cfg["data.seed"], linf=A)
    f, _ = read_snapshot(cfg["data.file"])
    return f


def _selfsim_config(cfg: RunConfig, n: int | None = None):
    from .selfsim import SelfSimConfig

    return SelfSimConfig(n=n or cfg["profile.n"], L=cfg["profile.L"], sponge_start=cfg["profile.sponge_start"],
                         sponge_full=cfg["profile.sponge_full"], sponge_rate=cfg["profile.sponge_rate"],
                         s_max=cfg["profile.s_max"], tol_rel=cfg["profile.tol_rel"],
                         disable_riesz=cfg["profile.disable_riesz"])


def _symmetric_profile(cfg: RunConfig, G):
    from .nonlocal_ops import HomogeneousProfile

    f = cfg.profile()
    if G is None:
        return f
    return HomogeneousProfile(f.values, G)


# -- commands ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path, log) -> int:
    theta0 = build_data(cfg)
    md, mr = cfg["solver.mollify_delta"], cfg["solver.mollify_rho"]
    scfg = SolverConfig(dt=cfg["solver.dt"], t_end=cfg["solver.t_end"], scheme=cfg["solver.scheme"],
                        resymmetrize_every=cfg["solver.resymmetrize_every"], group=cfg.group,
                        mollify=Mollify(md, mr) if md is not None else None,
                        lambda_dss=cfg["solver.lambda_dss"], snapshot_every=cfg["output.snapshot_every"])
    traj = run_approximate(theta0, scfg) if scfg.mollify else run(theta0, scfg)
    fmts = _formats(cfg)
    if "csv" in fmts:
        write_diagnostics(out / "diagnostics.csv", traj.diagnostics)
    if "sqgf" in fmts:
        snaps = out / "snapshots"
        snaps.mkdir(exist_ok=True)
        for i, (t, f) in enumerate(zip(traj.times, traj.snapshots)):
            write_snapshot(f, t, snaps / f"theta_{i:05d}.sqgf")
    last = traj.diagnostics[-1]
    log(f"simulate: {len(traj.diagnostics) - 1} steps to t={last.t:g}, linf={last.linf:.6g}, "
        f"max principle margin {max(d.max_principle_margin for d in traj.diagnostics):.3e}")
    if scfg.lambda_dss is not None:
        err = dss_error(traj, scfg.lambda_dss)
        _write_table(out / "dss.csv", ["lambda", "error"], [[_fmt(scfg.lambda_dss), _fmt(err)]])
        log(f"simulate: DSS error at lambda={scfg.lambda_dss:g}: {err:.3e}")
    return EXIT_OK


def cmd_profile(cfg: RunConfig, out: Path, log) -> int:
    from .selfsim import solve_profile

    G = cfg.group
    f = _symmetric_profile(cfg, G)
    prof = solve_profile(f, cfg["data.amplitude"], G, _selfsim_config(cfg))
    write_snapshot(prof.theta, 0.0, out / "profile.sqgf")
    _write_table(out / "profile_history.csv", ["s", "residual"], [[_fmt(s), _fmt(r)] for s, r in prof.history])
    _write_table(out / "profile.csv", ["A", "residual", "asymmetry", "converged", "s_final"],
                 [[_fmt(prof.amplitude), _fmt(prof.residual), _fmt(prof.asymmetry), int(prof.converged),
                   _fmt(prof.s_final)]])
    log(f"profile: A={prof.amplitude:g} residual {prof.residual:.3e} asymmetry {prof.asymmetry:.3e} "
        f"converged={prof.converged} s={prof.s_final:.3g}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, log) -> int:
    from .selfsim import sweep_amplitude

    G, Gbar = _group(cfg["sweep.reference"]), _group(cfg["sweep.group"])
    f = _symmetric_profile(cfg, G)
    branch = sweep_amplitude(f, cfg["sweep.A_values"], G, Gbar, _selfsim_config(cfg),
                             seed_eps=cfg["sweep.seed_eps"], out_dir=out / "profiles")
    branch.write_csv(out / "branch.csv")
    for e in branch.entries:
        log(f"sweep: A={e.A:<6g} residual {e.residual:.3e} asymmetry {e.asymmetry:.3e} converged={e.converged}")
    if branch.breaking_candidates:
        log("sweep: exploratory symmetry-breaking candidates at A = "
            + ", ".join(f"{a:g}" for a in branch.breaking_candidates))
    return EXIT_OK


def cmd_stability(cfg: RunConfig, out: Path, log) -> int:
    from .data import symmetric_bump
    from .field import Grid
    from .selfsim import StabilityConfig, decay_verdict, solve_profile, stability_experiment

    G = cfg.group
    f = _symmetric_profile(cfg, G)
    A = cfg["data.amplitude"]
    prof = solve_profile(f, A, G, _selfsim_config(cfg))
    log(f"stability: profile residual {prof.residual:.3e} asymmetry {prof.asymmetry:.3e}")
    scfg = StabilityConfig(n=cfg["stability.n"], l=cfg["stability.l"], dt=cfg["stability.dt"],
                           t0=cfg["stability.t0"], n_checkpoints=cfg["stability.n_checkpoints"],
                           scheme=cfg["solver.scheme"])
    g = Grid(scfg.n, scfg.l)
    amp, width = cfg["stability.perturbation_amp"], cfg["stability.perturbation_width"]
    pert = None
    if amp:
        pert = symmetric_bump(g, G, width=width, amp=amp, compact=True) if G is not None else None
        if pert is None:
            from .data import compact_bump

            pert = compact_bump(g, (1.0, 0.5), width, amp)
    R_list = list(cfg["stability.R_list"])
    try:
        series = stability_experiment(f, A, pert, R_list, prof, scfg, G)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = []
    for k, t in enumerate(series.times):
        rows.append([_fmt(t)] + [_fmt(series.errors[k, j]) if series.valid[k, j] else "" for j in range(len(R_list))])
    _write_table(out / "decay.csv", ["t"] + [f"e_R{R:g}" for R in R_list], rows)
    summary = []
    for R in R_list:
        ok, ratio = decay_verdict(series, R)
        expo = series.exponent.get(R, float("nan"))
        summary.append([_fmt(R), int(ok), _fmt(ratio), _fmt(expo)])
        log(f"stability: R={R:g} decays={ok} final/initial={ratio:.3g} fitted exponent {expo:.3g} (reference 2)")
    _write_table(out / "decay_summary.csv", ["R", "decreasing", "ratio", "exponent"], summary)
    return EXIT_OK


def cmd_norms(cfg: RunConfig, out: Path, log) -> int:
    from .norms import NormConfig, xp_norm, xp_osc_norm, ybb_alpha

    ncfg = NormConfig(R0=cfg["norms.R0"], J=cfg["norms.J"], p=cfg["norms.p"], alpha=cfg["norms.alpha"])
    theta0 = build_data(cfg)
    if cfg["data.kind"] == "homogeneous":
        target = cfg.profile().scaled(cfg["data.amplitude"])
    else:
        target = theta0
    try:
        xp, osc = xp_norm(target, ncfg), xp_osc_norm(target, ncfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seed = cfg["data.seed"] if cfg["data.seed"] is not None else 0
    y = ybb_alpha(target, ncfg, seed=seed)
    header = ["p", "alpha", "xp", "xp_osc", "linf", "ydot", "riesz_linf", "grad_l2weak", "ybb"]
    row = [_fmt(ncfg.p), _fmt(ncfg.alpha), _fmt(xp), _fmt(osc), _fmt(y.linf), _fmt(y.ydot),
           _fmt(y.riesz_linf), _fmt(y.grad_l2weak), _fmt(y.total)]
    _write_table(out / "norms.csv", header, [row])
    for h, v in zip(header[2:], row[2:]):
        log(f"norms: {h:<12} {float(v):.6g}")
    return EXIT_OK


def cmd_check(suite: str, out: Path | None, log) -> int:
    from .checks import run_suite

    results = run_suite(suite)
    for r in results:
        log(r.line())
    failed = [r for r in results if not r.passed]
    if out is not None:
        _write_table(out / "check.csv", ["suite", "name", "passed", "value", "bound"],
                     [[r.suite, r.name, int(r.passed), _fmt(r.value), _fmt(r.bound)] for r in results])
    for r in failed:
        print(f"FAIL\t{r.suite}\t{r.name}\t{r.value!r}\t{r.bound!r}", file=sys.stderr)
    log(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "profile": cmd_profile,
    "sweep": cmd_sweep,
    "stability": cmd_stability,
    "norms": cmd_norms,
}


def _formats(cfg: RunConfig) -> set:
    return {f.strip() for f in cfg["output.formats"].split(",") if f.strip()}


def load_config(path: str | None, seed: int | None = None) -> RunConfig:
    if path is None:
        text = ""
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if seed is not None:
        text += f"\ndata.seed = {seed}\n"
    return parse_config(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqglab", description="Critical SQG with symmetric non-decaying data.")
    p.add_argument("command", choices=[*COMMANDS, "check"])
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    p.add_argument("--suite", default="all", help="property suite for check (default: all)")
    p.add_argument("--seed", type=int, metavar="U64", help="random seed (overrides data.seed)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else print
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "check":
            out = Path(args.out) if args.out else None
            if out is not None:
                out.mkdir(parents=True, exist_ok=True)
            try:
                return cmd_check(args.suite, out, log)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        cfg = load_config(args.config, args.seed)
        out = Path(args.out or cfg["output.dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.echo").write_text(cfg.as_text())
        return COMMANDS[args.command](cfg, out, log)
    except (ConfigError, SnapshotFormatError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
