"""Command-line entry point ``epfkit``.

Exit codes: 0 success, 1 failed verification, 2 usage or configuration error,
3 solver divergence or non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .barycentric import DEFAULT_CORNERS, CornerSet
from .channel import solve_channel, run_uq_campaign
from .config import ConfigError, load_config
from .output import (
    ENVELOPE_COLUMNS,
    PROFILE_COLUMNS,
    TRAJECTORY_COLUMNS,
    RunManifest,
    envelope_table,
    profile_table,
    read_csv,
    trajectory_table,
    write_csv,
)
from .perturbation import EV_MODES, TARGETS, PerturbationSpec, campaign_specs, perturb_consistent
from .tensors import as_matrix, is_realizable
from .trajectory import blend_trajectory, fixture_tensors
from .verification import run_verification

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("epfkit")


class _UsageError(Exception):
    pass


def _steps(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 2:
        raise argparse.ArgumentTypeError("--steps must be at least 2")
    return n


def _tensor(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse tensor {text!r}") from None
    if len(vals) != 6:
        raise argparse.ArgumentTypeError("a tensor takes six components xx,yy,zz,xy,xz,yz")
    xx, yy, zz, xy, xz, yz = vals
    return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])


def _corners(text):
    try:
        v = [float(x) for x in text.split(",")]
        if len(v) != 6:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError("corners take six numbers x1,y1,x2,y2,x3,y3") from None
    return CornerSet((v[0], v[1]), (v[2], v[3]), (v[4], v[5]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epfkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run the randomised property suites")
    pv.add_argument("--seed", type=int, default=0, help="RNG seed (EPFKIT_SEED overrides)")
    pv.add_argument("--n", type=int, default=10_000, help="instances per suite")
    # test hook: replace the barycentric corners to provoke failures
    pv.add_argument("--corners", type=_corners, default=None, help=argparse.SUPPRESS)

    pt = sub.add_parser("trajectory", help="write a blending trajectory table")
    pt.add_argument("--pair", choices=("AB", "AC", "custom"), default="AB")
    pt.add_argument("--steps", type=_steps, default=101)
    pt.add_argument("--target", choices=TARGETS, default="1C", help="corner for custom perturbation sweeps")
    pt.add_argument("--ev-mode", choices=EV_MODES, default="production_max")
    pt.add_argument(
        "--tensor",
        type=_tensor,
        action="append",
        metavar="XX,YY,ZZ,XY,XZ,YZ",
        help="custom start tensor; a second --tensor sets the end point, otherwise the end is "
        "the full perturbation of the start toward --target",
    )
    pt.add_argument("--out", type=Path, default=Path("."))

    pc = sub.add_parser("channel", help="run channel baseline, a perturbed case or a campaign")
    pc.add_argument("config", type=Path)
    pc.add_argument("--campaign", choices=("legacy", "consistent", "both"))
    pc.add_argument("--dns-overlay", type=Path, help="reference profile CSV with y_plus,u_plus columns")
    pc.add_argument("--out", type=Path, default=Path("."))
    return parser


def cmd_verify(args, corners=None) -> int:
    seed = args.seed
    env = os.environ.get("EPFKIT_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise _UsageError(f"EPFKIT_SEED is not an integer: {env!r}") from None
    if args.n < 1:
        raise _UsageError("--n must be positive")
    corners = corners or args.corners or DEFAULT_CORNERS
    report = run_verification(args.n, seed, corners)
    print(f"epfkit verify: seed={seed} n={args.n} suites={len(report.suites)}")
    for s in report.suites:
        print(s.line())
    failed = [s.name for s in report.suites if not s.passed]
    if failed:
        print("FAILED: " + "; ".join(failed))
        return EXIT_VERIFY
    print("all suites passed")
    return EXIT_OK


def cmd_trajectory(args) -> int:
    fx = fixture_tensors()
    if args.pair == "custom":
        tensors = args.tensor or []
        if not 1 <= len(tensors) <= 2:
            raise _UsageError("--pair custom needs one or two --tensor values")
        start = as_matrix(tensors[0])
        if not is_realizable(start):
            raise _UsageError("custom start tensor is not realizable")
        if len(tensors) == 2:
            end = tensors[1]
        else:
            end = perturb_consistent(start, PerturbationSpec(args.target, 1.0, args.ev_mode)).tau_star
        x, y = start, end
    else:
        if args.tensor:
            raise _UsageError("--tensor is only valid with --pair custom")
        x, y = fx.A, (fx.B if args.pair == "AB" else fx.C)
    try:
        records = blend_trajectory(x, y, args.steps)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    path = write_csv(args.out / f"trajectory_{args.pair}.csv", TRAJECTORY_COLUMNS, trajectory_table(records))
    print(f"wrote {path} ({len(records)} rows)")
    return EXIT_OK


def _check_overlay(path):
    if path is None:
        return None
    try:
        header, _ = read_csv(path)
    except (OSError, ValueError, StopIteration) as exc:
        raise _UsageError(f"cannot read DNS overlay {path}: {exc}") from None
    if not {"y_plus", "u_plus"} <= set(header):
        raise _UsageError(f"DNS overlay {path} needs y_plus and u_plus columns")
    return str(path.resolve())


def cmd_channel(args) -> int:
    if not args.config.is_file():
        raise _UsageError(f"configuration file not found: {args.config}")
    cfg = load_config(args.config)
    overlay = _check_overlay(args.dns_overlay)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("channel", cfg.digest)
    manifest.cases["dns_overlay"] = {"path": overlay} if overlay else {}
    if not overlay:
        del manifest.cases["dns_overlay"]

    base_cfg = cfg.channel.with_perturbation(None)
    baseline = solve_channel(base_cfg)
    manifest.add_case("baseline", baseline)
    manifest.add_output(write_csv(out / "profile_baseline.csv", PROFILE_COLUMNS, profile_table(baseline)))
    print(f"baseline: {baseline.status} after {baseline.iterations} iterations")
    if not baseline.converged:
        manifest.write(out / "manifest.json")
        print(f"error: baseline {baseline.status}; residual {baseline.residual_history[-1]:.3e}", file=sys.stderr)
        return EXIT_SOLVER

    solutions = []
    if cfg.channel.perturbation is not None:
        spec = cfg.channel.perturbation
        sol = solve_channel(cfg.channel, baseline.state())
        solutions.append((spec.label, sol))

    runs = []
    if args.campaign in ("consistent", "both"):
        runs.append(campaign_specs(cfg.campaign.consistent_delta_b))
    if args.campaign in ("legacy", "both"):
        runs.append(campaign_specs(cfg.campaign.legacy_delta_b, cfg.campaign.legacy_f))
    for specs in runs:
        env = run_uq_campaign(base_cfg, specs, baseline=baseline, workers=cfg.workers)
        for m in env.members:
            solutions.append((m.label, m.solution))
        manifest.add_output(write_csv(out / f"envelope_{env.formulation}.csv", ENVELOPE_COLUMNS, envelope_table(env)))
        print(f"{env.formulation} envelope: {len(env.members) - len(env.excluded)} of {len(env.members)} members")

    bad = []
    for label, sol in solutions:
        manifest.add_case(label, sol)
        manifest.add_output(write_csv(out / f"profile_{label}.csv", PROFILE_COLUMNS, profile_table(sol)))
        print(f"{label}: {sol.status} after {sol.iterations} iterations, centreline u+ = {sol.centerline_u_plus:.4g}")
        if not sol.converged:
            bad.append(f"{label} {sol.status} (residual {sol.residual_history[-1]:.3e})")
    manifest.write(out / "manifest.json")
    if bad:
        for b in bad:
            print(f"error: {b}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv=None, corners: CornerSet | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args, corners)
        if args.command == "trajectory":
            return cmd_trajectory(args)
        return cmd_channel(args)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"epfkit: configuration error{key}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _UsageError as exc:
        print(f"epfkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
