"""Command-line front end: ``fracsys simulate|criteria|bound|verify``.

Exit codes: 0 success, 1 config or input error, 2 numerical failure (or a
failed verification), 3 blow-up detected by ``simulate`` (informative).
"""

from __future__ import annotations

import argparse
import math
import shutil
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import criteria as cr
from .config import ConfigError, ExperimentConfig, load_experiment, load_sweep
from .fraccalc import TestFuncSpec
from .mildsolver import (SolverDiverged, SystemParams, Trajectory, load_trajectory,
                         positivity_check, save_trajectory, solve)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BLOWUP = 0, 1, 2, 3


class _Log:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg)


def _fmt(x: Optional[float]) -> str:
    return "NA" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6g}"


# -- regime and analyses --------------------------------------------------------

def regime(params: SystemParams, N: int) -> str:
    """One-line classification of the parameter point."""
    if params.linear:
        return "linear reference run"
    flags = cr.hypothesis_flags(params)
    if params.sign_f < 0 or params.sign_g < 0:
        flags.append("absorbing_sign")
    if flags:
        return "outside the model hypotheses (" + ";".join(flags) + ")"
    row = cr.evaluate_point(params.gamma1, params.gamma2, params.p, params.q, N)
    parts = []
    if row.global_ok:
        parts.append("small-data global existence (dimension condition holds)")
    if row.region1 or row.region2:
        which = ",".join(n for n, ok in (("1", row.region1), ("2", row.region2)) if ok)
        parts.append(f"blow-up region {which}")
    return "; ".join(parts) or "no criterion applies"


def _exponents(params: SystemParams, N: int) -> Optional[cr.ExponentSet]:
    if params.linear or cr.hypothesis_flags(params):
        return None
    try:
        if not cr.global_condition(params, N):
            return None
        return cr.exponent_set(params, N)
    except ValueError:
        return None


def _simulate_once(cfg: ExperimentConfig, u0, v0, grid, exps) -> Trajectory:
    norms = (exps.s1, exps.s2) if exps is not None else (2.0, 2.0)
    return solve(cfg.params, u0, v0, grid, cfg.blowup_threshold,
                 norm_exponents=norms, store_every=cfg.store_every)


def _blowup_lines(traj: Trajectory, N: int) -> list:
    z = traj.norms["z"]
    z0 = float(z[0]) if len(z) and np.isfinite(z[0]) else None
    observed = traj.t_blowup_upper
    rep = cr.blowup_report(traj.params, N, z0, observed)
    lines = [f"Z0: {_fmt(z0)}"]
    if not rep.z_bound_applicable:
        lines.append("blow-up time bound: not applicable "
                     "(needs gamma1 = gamma2, 1 < p <= q, Z0 > 2^(p/(p-1)) and a chi-resolving grid)")
        return lines
    lines.append(f"blow-up time bound: {rep.t_star_bound:.6g}")
    if observed is None:
        lines.append("observed blow-up: none within the run")
    else:
        verdict = "within bound" if traj.t_blowup <= rep.t_star_bound else "EXCEEDS bound"
        lines.append(f"observed blow-up: ({traj.t_blowup:.6g}, {observed:.6g}] {verdict}")
    p, g = traj.params.p, traj.params.gamma1
    sel = traj.times < rep.t_star_bound
    w = cr.rescale_lower_solution(p, z0, g, traj.times[sel])
    gap = float(np.min(z[sel] - w))
    lines.append(f"min Z(t) - w(t^g/Gamma(g+1)): {gap:.3e}")
    return lines


def _decay_lines(cfg: ExperimentConfig, traj: Trajectory, exps, u0, v0) -> list:
    if exps is None:
        return ["decay: not applicable (global-existence exponents unavailable)"]
    if not traj.completed:
        return ["decay: not applicable (run blew up)"]
    refined = _simulate_once(cfg, u0, v0, cfg.time.refined(), exps)
    rep = cr.decay_verify(traj, exps, cfg.decay_window, refined=refined)
    return [
        f"decay window: [{cfg.decay_window[0]:.6g}, {cfg.decay_window[1]:.6g}]",
        f"decay s1, sigma1: {exps.s1:.6g}, {exps.sigma1:.6g}",
        f"decay constant C: {rep.constant:.6g} (halved step: {rep.constant_refined:.6g}, "
        f"rel change {rep.rel_change:.3e}, {'stable' if rep.stable else 'UNSTABLE'})",
        f"decay fitted slope: {rep.slope:.4f}",
        f"decay combined constant 2^sigma max(C1,C2): {rep.combined_constant:.6g} "
        f"({'holds' if rep.combined_holds else 'VIOLATED'})",
    ]


def _weak_lines(traj: Trajectory) -> list:
    if not (traj.completed and traj.has_full_fields):
        return ["weak residual: not applicable (needs a completed run with all fields)"]
    w = cr.weak_residual(traj, TestFuncSpec(l=2, horizon=float(traj.times[-1])))
    return [f"weak residual (relative): u {w.rel_u:.3e}, v {w.rel_v:.3e}"]


def _positivity_lines(traj: Trajectory) -> list:
    if traj.u_fields is None:
        return ["positivity: not checked (no stored fields)"]
    if traj.u0.values.min() < 0 or traj.v0.values.min() < 0 or traj.params.sign_f < 0 or traj.params.sign_g < 0:
        return ["positivity: not applicable (signed data or absorbing nonlinearity)"]
    return [str(positivity_check(traj, traj.u0, traj.v0))]


# -- subcommands --------------------------------------------------------------------

def cmd_simulate(args, log) -> int:
    cfg = load_experiment(args.config)
    out = Path(args.out) if args.out else (cfg.out or Path("out"))
    out.mkdir(parents=True, exist_ok=True)
    u0, v0 = cfg.initial_fields(args.seed)
    N = cfg.grid.dim
    exps = _exponents(cfg.params, N)
    try:
        traj = _simulate_once(cfg, u0, v0, cfg.time, exps)
        lines = [
            f"regime: {regime(cfg.params, N)}",
            f"status: {traj.status}",
            f"steps: {cfg.time.n_steps}, dt: {cfg.time.dt:.6g}, grid: N={N} L={cfg.grid.half_width:g} M={cfg.grid.points}",
            f"final time reached: {traj.times[-1]:.6g}",
        ]
        if cfg.blowup_bound:
            lines += _blowup_lines(traj, N)
        if cfg.decay_verify:
            lines += _decay_lines(cfg, traj, exps, u0, v0)
        if cfg.weak_residual:
            lines += _weak_lines(traj)
        if cfg.positivity:
            lines += _positivity_lines(traj)
    except SolverDiverged as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    traj.to_csv(out / "trajectory.csv")
    save_trajectory(traj, out / "trajectory.npz")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    if cfg.path.resolve() != (out / "config.ini").resolve():
        shutil.copyfile(cfg.path, out / "config.ini")
    for line in lines:
        log(line)
    log(f"wrote {out / 'trajectory.csv'}")
    return EXIT_BLOWUP if traj.status == "blowup_detected" else EXIT_OK


def cmd_criteria(args, log) -> int:
    cfg = load_sweep(args.config)
    out = Path(args.out) if args.out else Path("out")
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if args.seed is None else args.seed
    if cfg.random_points:
        res = cr.parameter_sweep(cfg.random_points, seed=seed)
        rows = res.rows
        log(res.summary())
    else:
        rows = [cr.evaluate_point(*pt) for pt in cfg.points()]
        if not rows:
            raise ConfigError(f"{cfg.path}: empty parameter grid")
        overlaps = sum(1 for r in rows if r.global_ok and (r.region1 or r.region2))
        flagged = sum(1 for r in rows if r.hypotheses != "ok")
        log(f"{len(rows)} points; hypothesis-flagged rows: {flagged}; global-vs-blow-up overlaps: {overlaps}")
    cr.write_criteria_csv(rows, out / "criteria.csv")
    log(f"wrote {out / 'criteria.csv'}")
    return EXIT_OK


def cmd_bound(args, log) -> int:
    try:
        t = cr.blowup_time_bound(args.p, args.gamma, args.z0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(repr(t) if args.quiet else f"blow-up time bound: {t!r}")
    return EXIT_OK


def cmd_verify(args, log) -> int:
    run = Path(args.run)
    path = run / "trajectory.npz"
    if not path.is_file():
        print(f"error: {path} not found", file=sys.stderr)
        return EXIT_CONFIG
    traj = load_trajectory(path)
    N = traj.spec.dim
    lines = [f"regime: {regime(traj.params, N)}", f"status: {traj.status}"]
    lines += _blowup_lines(traj, N)
    lines += _positivity_lines(traj)
    lines += _weak_lines(traj)
    exps = _exponents(traj.params, N)
    if exps is not None and traj.completed and abs(traj.s1 - exps.s1) < 1e-9 * exps.s1:
        rep = cr.decay_verify(traj, exps, (min(1.0, float(traj.times[-1])), float(traj.times[-1])))
        lines.append(f"decay constant C: {rep.constant:.6g}, combined constant "
                     f"{rep.combined_constant:.6g} ({'holds' if rep.combined_holds else 'VIOLATED'})")
    (run / "verify.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        log(line)
    failed = any("VIOLATED" in l or "EXCEEDS" in l for l in lines)
    return EXIT_NUMERIC if failed else EXIT_OK


# -- entry point ----------------------------------------------------------------------

def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracsys", description="Time-fractional reaction-diffusion systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", help="output directory (default: ./out or [output] path)")
        p.add_argument("--seed", type=_u64, default=None, help="random seed override (u64)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    common(sub.add_parser("simulate", help="run the mild solver and analyses"))
    common(sub.add_parser("criteria", help="tabulate existence and blow-up criteria"))
    b = sub.add_parser("bound", help="blow-up time bound for constant-Z data")
    b.add_argument("--p", type=float, required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--z0", type=float, required=True)
    b.add_argument("--quiet", action="store_true")
    v = sub.add_parser("verify", help="rerun analyses on a stored run directory")
    v.add_argument("--run", required=True, help="directory written by simulate")
    v.add_argument("--quiet", action="store_true")
    return ap


COMMANDS = {"simulate": cmd_simulate, "criteria": cmd_criteria, "bound": cmd_bound, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = _Log(getattr(args, "quiet", False))
    try:
        return COMMANDS[args.command](args, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
