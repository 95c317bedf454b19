"""Command-line entry point.

Subcommands: ``run`` (benchmark experiments), ``check-assumptions``,
``tunings``, ``false-alarm``, ``delay``, ``two-sample``.  Exit codes: 0 on
success, 1 on configuration/validation errors, 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .environments import EnvConfigError, load_env
from .harness import (
    check_assumptions,
    default_tunings,
    emit_results,
    load_experiment_config,
    run_experiment,
)
from .statcheck import TrialConfig, detection_delay, false_alarm_rate, two_sample_tail


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="pwbandits")
    sub = top.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--reps", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--parallel", type=int)
    p_run.add_argument("--format", choices=["csv", "json"])

    p_chk = sub.add_parser("check-assumptions", help="spacing checks for the regret bounds")
    p_chk.add_argument("--config", required=True, help="environment config file")
    p_chk.add_argument("--alpha", type=float, required=True)
    p_chk.add_argument("--delta", type=float, required=True)
    p_chk.add_argument("--threshold", choices=["full", "practical"], default="practical")

    p_tun = sub.add_parser("tunings", help="corollary-prescribed (alpha, delta)")
    p_tun.add_argument("--config", required=True, help="environment config file")
    p_tun.add_argument("--known-upsilon", action="store_true")
    p_tun.add_argument("--mode", choices=["local", "global"], default="local")
    p_tun.add_argument("--alpha0", type=float, default=1.0)

    p_fa = sub.add_parser("false-alarm", help="Monte-Carlo false-alarm rate")
    p_fa.add_argument("--mu0", type=float, required=True)
    p_fa.add_argument("--delta", type=float, required=True)
    p_fa.add_argument("--nmax", type=int, default=5000)
    p_fa.add_argument("--reps", type=int, default=1000)
    p_fa.add_argument("--threshold", choices=["full", "practical"], default="full")
    p_fa.add_argument("--dn", type=int, default=1)
    p_fa.add_argument("--ds", type=int, default=1)
    p_fa.add_argument("--seed", type=int, default=20240)
    p_fa.add_argument("--json", dest="json_path")

    p_dl = sub.add_parser("delay", help="Monte-Carlo detection delay")
    p_dl.add_argument("--mu0", type=float, required=True)
    p_dl.add_argument("--mu1", type=float, required=True)
    p_dl.add_argument("--tau", type=int, required=True)
    p_dl.add_argument("--nmax", type=int)
    p_dl.add_argument("--reps", type=int, default=1000)
    p_dl.add_argument("--delta", type=float, default=0.01)
    p_dl.add_argument("--threshold", choices=["full", "practical"], default="practical")
    p_dl.add_argument("--dn", type=int, default=1)
    p_dl.add_argument("--ds", type=int, default=1)
    p_dl.add_argument("--seed", type=int, default=20240)
    p_dl.add_argument("--json", dest="json_path")

    p_ts = sub.add_parser("two-sample", help="two-sample tail vs Chernoff bound")
    p_ts.add_argument("--s", type=int, required=True)
    p_ts.add_argument("--r", type=int, required=True)
    p_ts.add_argument("--mua", type=float, required=True)
    p_ts.add_argument("--mub", type=float, required=True)
    p_ts.add_argument("--reps", type=int, default=100_000)
    p_ts.add_argument("--u", default="0.5,1,2")
    p_ts.add_argument("--seed", type=int, default=77)
    p_ts.add_argument("--json", dest="json_path")
    return top


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2))


def _cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    if args.reps is not None:
        cfg.repetitions = args.reps
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.parallel is not None:
        cfg.parallelism = args.parallel
    if args.format is not None:
        cfg.output_format = args.format
    cfg.validate()
    result = run_experiment(cfg)
    paths = emit_results(result, cfg.out_dir, cfg.output_format)
    print(f"{'algorithm':<20} {'final regret':>14} {'std':>10} {'restarts':>9} {'ms/run':>9}")
    for algo in result.algorithms:
        print(
            f"{algo.name:<20} {algo.final_mean:>14.2f} {algo.final_std:>10.2f} "
            f"{algo.mean_restarts:>9.2f} {algo.mean_wall_ms:>9.1f}"
        )
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_check(args) -> int:
    env = load_env(args.config)
    report = check_assumptions(env, args.alpha, args.delta, args.threshold)
    if not report.checkable:
        print("not checkable: alpha must be positive")
        return 0
    print(f"beta(T, delta) = {report.beta_horizon:.4f}  [{args.threshold}]")
    for kind, records, ok in (
        ("global", report.global_records, report.global_ok),
        ("local", report.local_records, report.local_ok),
    ):
        print(f"[{kind}] {'PASS' if ok else 'FAIL'}")
        for r in records:
            mark = "ok " if r.ok else "VIOLATED"
            print(
                f"  {r.label:<22} tau={r.tau:<7} gap={r.gap:<6.4g} "
                f"spacing={r.spacing:<7} needed={r.horizon_needed:<9} {mark}"
            )
    return 0


def _cmd_tunings(args) -> int:
    env = load_env(args.config)
    tun = default_tunings(env, upsilon_known=args.known_upsilon, mode=args.mode, alpha0=args.alpha0)
    print(json.dumps({"alpha": tun.alpha, "delta": tun.delta, "alpha0": tun.alpha0}))
    return 0


def _cmd_false_alarm(args) -> int:
    cfg = TrialConfig(
        mu0=args.mu0, n_max=args.nmax, repetitions=args.reps, delta=args.delta,
        stride_n=args.dn, stride_s=args.ds, threshold_family=args.threshold,
        base_seed=args.seed,
    )
    res = false_alarm_rate(cfg)
    print(f"{'fired':>8} {'reps':>8} {'rate':>10} {'ci95':>20} {'delta':>8}")
    print(
        f"{res.fired:>8} {res.repetitions:>8} {res.rate:>10.4f} "
        f"[{res.ci_low:.4f}, {res.ci_high:.4f}]   {res.delta:>8.4g}"
    )
    _write_json(args.json_path, res.as_dict())
    return 0


def _cmd_delay(args) -> int:
    n_max = args.nmax if args.nmax is not None else args.tau + 2000
    cfg = TrialConfig(
        mu0=args.mu0, mu1=args.mu1, change_at=args.tau, n_max=n_max,
        repetitions=args.reps, delta=args.delta, stride_n=args.dn, stride_s=args.ds,
        threshold_family=args.threshold, base_seed=args.seed,
    )
    res = detection_delay(cfg)
    print(f"{'median':>10} {'q95':>10} {'miss':>8} {'early':>8} {'reps':>8}")
    print(
        f"{res.median:>10.1f} {res.q95:>10.1f} {res.miss_rate:>8.4f} "
        f"{res.early_rate:>8.4f} {res.repetitions:>8}"
    )
    _write_json(args.json_path, res.as_dict())
    return 0


def _cmd_two_sample(args) -> int:
    u_values = [float(u) for u in str(args.u).split(",") if u]
    points = two_sample_tail(
        s=args.s, r=args.r, mu_a=args.mua, mu_b=args.mub,
        u_values=u_values, repetitions=args.reps, base_seed=args.seed,
    )
    print(f"{'u':>8} {'empirical':>12} {'bound':>12} {'stderr':>10}")
    for p in points:
        print(f"{p.u:>8.3f} {p.empirical:>12.6f} {p.bound:>12.6f} {p.stderr:>10.6f}")
    _write_json(
        args.json_path,
        {"points": [{"u": p.u, "empirical": p.empirical, "bound": p.bound, "stderr": p.stderr} for p in points]},
    )
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "check-assumptions": _cmd_check,
    "tunings": _cmd_tunings,
    "false-alarm": _cmd_false_alarm,
    "delay": _cmd_delay,
    "two-sample": _cmd_two_sample,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (EnvConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # abort the whole run: reproducibility over resilience
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
