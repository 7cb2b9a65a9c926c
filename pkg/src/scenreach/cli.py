"""Batch command-line front end.

Subcommands: sample-size (Hoeffding certificate), prepare (offline
artifact + WSS curve), verify (online solve or policy evaluation for one
initial state), and sweep (repeated trials aggregated per cell count).

All outputs are plain CSV/JSON. Runs are deterministic for a fixed
--seed; wall-clock columns are written as 0.0 unless --timings is given,
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from .engine import (KhatPolicy, evaluate_policy, load_artifact,
                     offline_prepare, save_artifact, solve_full, verify)
from .scenarios import HoeffdingQuery, load_noise, required_scenarios
from .sets import load_spec
from .system import load_system

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

_FULL_MODE_WARN_K = 500


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.asarray([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as e:
        raise ValueError(f"cannot parse vector {text!r}: {e}")


def _resolve_count(args) -> int:
    has_k = args.K is not None
    has_d, has_b = args.delta is not None, args.beta is not None
    if has_k and (has_d or has_b):
        raise ValueError("give either --K or --delta/--beta, not both")
    if not has_k and not (has_d and has_b):
        raise ValueError("give --K or both --delta and --beta")
    if has_k:
        if args.K < 1:
            raise ValueError("--K must be positive")
        return int(args.K)
    return required_scenarios(HoeffdingQuery(delta=args.delta, beta=args.beta))


def _resolve_policy(args) -> KhatPolicy:
    chosen = [args.khat is not None, args.knee, args.budget_s is not None]
    if sum(chosen) != 1:
        raise ValueError("give exactly one of --khat, --knee, or --budget-s")
    if args.khat is not None:
        return KhatPolicy.fixed(args.khat)
    if args.knee:
        return KhatPolicy.knee()
    if args.x0 is None:
        raise ValueError("--budget-s needs --x0 as its calibration state")
    return KhatPolicy.budget(args.budget_s, _parse_vector(args.x0))


def _load_inputs(args):
    system = load_system(args.system)
    spec, box = load_spec(args.spec)
    noise = load_noise(args.noise)
    return system, spec, box, noise


def cmd_sample_size(args) -> int:
    k = required_scenarios(HoeffdingQuery(delta=args.delta, beta=args.beta))
    print(k)
    return EXIT_OK


def _write_curve_csv(curve, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["khat", "wss", "seconds"])
        for k, w, s in zip(curve.khat_values, curve.wss_values, curve.seconds):
            writer.writerow([int(k), _fmt(w), _fmt(s)])


def cmd_prepare(args) -> int:
    system, spec, box, noise = _load_inputs(args)
    count = _resolve_count(args)
    policy = _resolve_policy(args)
    grid = list(range(1, min(args.grid_max, count) + 1))
    artifact = offline_prepare(system, spec, box, noise, count, policy,
                               seed=args.seed, restarts=args.restarts,
                               khat_grid=grid, timings=args.timings,
                               node_limit=args.node_limit, force_curve=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_artifact(artifact, out / "artifact.json")
    _write_curve_csv(artifact.curve, out / "wss_curve.csv")
    print(f"K={count} khat={artifact.khat} wss={artifact.partition.wss!r}")
    return EXIT_OK


def _report_json(artifact, x0, mode, p_hat, p_khat_star, u_opt, solver, wall_time):
    return {
        "version": 1,
        "mode": mode,
        "x0": [float(v) for v in x0],
        "K": artifact.scenarios.count,
        "khat": artifact.khat,
        "p_hat": p_hat,
        "p_khat_star": p_khat_star,
        "u_opt": None if u_opt is None else [float(v) for v in u_opt],
        "solver": solver,
        "wall_time": wall_time,
    }


def _write_report(out: Path, report: dict, flags: np.ndarray) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    with (out / "report.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "success"])
        for i, ok in enumerate(flags):
            writer.writerow([i, int(ok)])


def cmd_verify(args) -> int:
    artifact = load_artifact(args.artifact)
    x0 = _parse_vector(args.x0)
    out = Path(args.out)
    budget_hit = False

    if args.mode == "evaluate-only":
        if args.u is None:
            raise ValueError("evaluate-only mode needs --u")
        u = _parse_vector(args.u)
        p_hat, flags = evaluate_policy(artifact, x0, u)
        report = _report_json(artifact, x0, args.mode, p_hat, None, u,
                              {"optimal": True, "bound": None,
                               "nodes_explored": 0, "lp_calls": 0}, 0.0)
    elif args.mode == "full":
        if artifact.scenarios.count > _FULL_MODE_WARN_K:
            print(f"warning: full MILP over K={artifact.scenarios.count} "
                  "scenarios may take very long", file=sys.stderr)
        res = solve_full(artifact, x0, node_limit=args.node_limit)
        p_hat, flags = evaluate_policy(artifact, x0, res.u_opt)
        budget_hit = not res.optimal
        report = _report_json(artifact, x0, args.mode, p_hat, res.p_value,
                              res.u_opt,
                              {"optimal": res.optimal, "bound": res.bound,
                               "nodes_explored": res.nodes_explored,
                               "lp_calls": res.lp_calls},
                              res.wall_time if args.timings else 0.0)
    else:
        rep = verify(artifact, x0, node_limit=args.node_limit)
        flags = rep.success_flags
        budget_hit = not rep.solver_optimal
        report = _report_json(artifact, x0, args.mode, rep.p_hat,
                              rep.p_khat_star, rep.u_opt,
                              {"optimal": rep.solver_optimal,
                               "bound": rep.solver_bound,
                               "nodes_explored": rep.nodes_explored,
                               "lp_calls": rep.lp_calls},
                              rep.wall_time if args.timings else 0.0)

    _write_report(out, report, flags)
    print(f"p_hat={report['p_hat']!r} p_khat_star={report['p_khat_star']!r}")
    return EXIT_BUDGET if budget_hit else EXIT_OK


def cmd_sweep(args) -> int:
    system, spec, box, noise = _load_inputs(args)
    count = _resolve_count(args)
    khats = [int(tok) for tok in args.khat.split(",") if tok.strip() != ""]
    if not khats or args.trials < 1:
        raise ValueError("sweep needs a nonempty --khat list and --trials >= 1")
    x0 = _parse_vector(args.x0)

    budget_hit = False
    rows = {k: {"p_hat": [], "p_star": [], "seconds": []} for k in khats}
    for trial in range(args.trials):
        trial_seed = int(np.random.SeedSequence(args.seed, spawn_key=(trial,))
                         .generate_state(1)[0])
        for khat in khats:
            artifact = offline_prepare(system, spec, box, noise, count,
                                       KhatPolicy.fixed(khat), seed=trial_seed,
                                       restarts=args.restarts)
            rep = verify(artifact, x0, node_limit=args.node_limit)
            budget_hit = budget_hit or not rep.solver_optimal
            rows[khat]["p_hat"].append(rep.p_hat)
            rows[khat]["p_star"].append(rep.p_khat_star)
            rows[khat]["seconds"].append(rep.wall_time if args.timings else 0.0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["khat", "trials", "p_hat_mean", "p_hat_std",
                         "p_khat_star_mean", "p_khat_star_std",
                         "seconds_mean", "seconds_std"])
        for khat in khats:
            ph = np.asarray(rows[khat]["p_hat"])
            ps = np.asarray(rows[khat]["p_star"])
            ts = np.asarray(rows[khat]["seconds"])
            writer.writerow([khat, args.trials,
                             _fmt(ph.mean()), _fmt(ph.std()),
                             _fmt(ps.mean()), _fmt(ps.std()),
                             _fmt(ts.mean()), _fmt(ts.std())])
    print(f"sweep over khat={khats} trials={args.trials} written")
    return EXIT_BUDGET if budget_hit else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenreach",
        description="Scenario-based reach-avoid probability verification")
    sub = parser.add_subparsers(dest="command", required=True)

    p_size = sub.add_parser("sample-size", help="Hoeffding sample count")
    p_size.add_argument("--delta", type=float, required=True)
    p_size.add_argument("--beta", type=float, required=True)
    p_size.set_defaults(func=cmd_sample_size)

    def add_common_inputs(p):
        p.add_argument("--system", required=True, help="system JSON path")
        p.add_argument("--spec", required=True, help="reach-avoid spec JSON path")
        p.add_argument("--noise", required=True, help="noise model JSON path")
        p.add_argument("--K", type=int, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--node-limit", type=int, default=10 ** 6)
        p.add_argument("--timings", action="store_true",
                       help="record wall-clock columns (breaks byte determinism)")
        p.add_argument("--out", required=True, help="output directory")

    p_prep = sub.add_parser("prepare", help="offline artifact and WSS curve")
    add_common_inputs(p_prep)
    p_prep.add_argument("--khat", type=int, default=None)
    p_prep.add_argument("--knee", action="store_true")
    p_prep.add_argument("--budget-s", type=float, default=None)
    p_prep.add_argument("--x0", default=None,
                        help="calibration state for --budget-s, comma-separated")
    p_prep.add_argument("--grid-max", type=int, default=100)
    p_prep.set_defaults(func=cmd_prepare)

    p_ver = sub.add_parser("verify", help="online verification for one x0")
    p_ver.add_argument("--artifact", required=True)
    p_ver.add_argument("--x0", required=True, help="comma-separated state")
    p_ver.add_argument("--mode", choices=["partitioned", "full", "evaluate-only"],
                       default="partitioned")
    p_ver.add_argument("--u", default=None, help="input sequence for evaluate-only")
    p_ver.add_argument("--node-limit", type=int, default=10 ** 6)
    p_ver.add_argument("--timings", action="store_true")
    p_ver.add_argument("--out", required=True)
    p_ver.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="repeated trials per cell count")
    add_common_inputs(p_sweep)
    p_sweep.add_argument("--khat", required=True,
                         help="comma-separated cell counts, e.g. 20,40,100")
    p_sweep.add_argument("--trials", type=int, default=10)
    p_sweep.add_argument("--x0", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    # Let values like "-0.75,-0.75,0,0" pass as arguments instead of being
    # mistaken for option names (no option here starts with a digit).
    matcher = re.compile(r"^-[\d.]")
    for p in (parser, p_size, p_prep, p_ver, p_sweep):
        try:
            p._negative_number_matcher = matcher
        except AttributeError:  # pragma: no cover - private API fallback
            pass

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
