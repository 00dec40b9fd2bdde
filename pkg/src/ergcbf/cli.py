"""Command line driver: run one scenario, batch it, or self-verify.

Exit codes: 0 success, 1 audit/verification failure, 2 configuration
error (nothing is written), 3 safety breach (partial log is written).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import sim, verification
from .errors import SafetyBreachError, ScenarioError
from .scenario_io import flagship_scenario, load_scenario, parse_override


def _collect_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for text in pairs:
        key, value = parse_override(text)
        overrides[key] = value
    return overrides


def _print_report(report: sim.AuditReport) -> None:
    for check in report.checks:
        tag = "PASS" if check.passed else "FAIL"
        if check.informational:
            tag = "info"
        bound = "" if check.bound is None else f" bound={check.bound:g}"
        detail = f"  ({check.detail})" if check.detail else ""
        print(f"  [{tag}] {check.name}: observed={check.observed:g}{bound}{detail}")
    for w in report.warnings:
        print(f"  warning: {w}")


def cmd_run(args) -> int:
    overrides = _collect_overrides(args.set)
    scenario = load_scenario(args.scenario, overrides)
    from . import _backend

    _backend.resolve(args.backend, scenario)
    sim.validate_scenario(scenario)

    breached = False
    try:
        log = sim.run_scenario(scenario, backend=args.backend)
    except SafetyBreachError as exc:
        log = exc.log
        breached = True
        print(f"safety breach: {exc}", file=sys.stderr)

    report = sim.invariant_audit(log)
    os.makedirs(args.out, exist_ok=True)
    sim.write_trajectory_csv(log, os.path.join(args.out, "trajectory.csv"))
    payload = {
        "audit": report.to_dict(),
        "overrides": overrides,
        "scenario_file": os.fspath(args.scenario),
        "backend": log.backend,
    }
    with open(os.path.join(args.out, "audit.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"scenario {scenario.name or args.scenario}: backend={log.backend} "
          f"rows={log.data.shape[0]} evaluations={log.stats.evaluations}")
    _print_report(report)
    if breached:
        return 3
    return 0 if report.passed else 1


def cmd_batch(args) -> int:
    if args.count < 1:
        raise ScenarioError("--count must be >= 1")
    overrides = _collect_overrides(args.set)
    scenario = load_scenario(args.scenario, overrides)
    from . import _backend

    _backend.resolve(args.backend, scenario)
    sim.validate_scenario(scenario)
    configs = sim.sample_safe_initial_configs(scenario, args.count, args.seed)
    summary = sim.batch_run(scenario, configs, backend=args.backend)

    os.makedirs(args.out, exist_ok=True)
    sim.write_batch_csv(summary, os.path.join(args.out, "batch.csv"))
    payload = {
        "passed": summary.all_ok,
        "runs": summary.n_runs,
        "converged": summary.n_converged,
        "collisions": summary.n_collisions,
        "seed": args.seed,
        "overrides": overrides,
        "scenario_file": os.fspath(args.scenario),
    }
    with open(os.path.join(args.out, "audit.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(
        f"batch: {summary.n_converged}/{summary.n_runs} converged, "
        f"{summary.n_collisions} collisions"
    )
    for row in summary.rows:
        if row.status != "ok" or not row.converged:
            print(f"  run {row.index}: status={row.status} converged={row.converged}")
    return 0 if summary.all_ok else 1


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario) if args.scenario else flagship_scenario()
    results = verification.run_all(scenario, samples=args.samples, seed=args.seed)
    failed = False
    for res in results:
        total = res.passed + res.failed
        tag = "PASS" if res.ok else "FAIL"
        line = f"{res.name}: {res.passed}/{total} {tag}"
        if not res.ok and res.detail:
            line += f"  ({res.detail})"
        print(line)
        failed = failed or not res.ok
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergcbf",
        description="Safe reference governor for a planar arm: simulate, batch, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="integrate one scenario and audit the log")
    run_p.add_argument("scenario", help="scenario YAML file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario key (repeatable)")
    run_p.add_argument("--backend", choices=("auto", "fast", "pure"), default="auto")
    run_p.set_defaults(func=cmd_run)

    batch_p = sub.add_parser("batch", help="run many seeded initial conditions")
    batch_p.add_argument("scenario", help="scenario YAML file")
    batch_p.add_argument("--out", required=True, help="output directory")
    batch_p.add_argument("--count", type=int, default=20)
    batch_p.add_argument("--seed", type=int, default=7)
    batch_p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    batch_p.add_argument("--backend", choices=("auto", "fast", "pure"), default="auto")
    batch_p.set_defaults(func=cmd_batch)

    verify_p = sub.add_parser("verify", help="run the randomized property batteries")
    verify_p.add_argument("--scenario", default=None,
                          help="scenario YAML file (default: built-in benchmark)")
    verify_p.add_argument("--samples", type=int, default=1000)
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
