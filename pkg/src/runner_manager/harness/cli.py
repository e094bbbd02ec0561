"""Command line front end: ``harness run --script scenario.yaml --seed 7``."""

from __future__ import annotations

import argparse
import json
import sys

from .driver import run_scenario
from .oracle import oracle_decisions
from .scenario import generate_random_script, load_script


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="harness", description="Run manager scenarios on simulated time.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario script against the real manager")
    run_p.add_argument("--script", help="YAML/JSON scenario file (omit to generate one from --seed)")
    run_p.add_argument("--seed", type=int, default=0, help="seed for generated scenarios")
    run_p.add_argument("--trace-out", help="write the trace as newline-delimited JSON")
    run_p.add_argument("--check-oracle", action="store_true", help="compare decisions against the oracle")

    args = parser.parse_args(argv)

    if args.script:
        script = load_script(args.script)
    else:
        script = generate_random_script(args.seed)

    result = run_scenario(script)

    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write(result.trace.to_ndjson())

    summary = {
        "horizon": script.horizon,
        "events": len(script.events),
        "decisions": len(result.decisions),
        "scale_writes": result.writes,
        "scenario_failed": result.scenario_failed,
        "failure_reasons": result.failure_reasons,
    }

    if args.check_oracle:
        expected = oracle_decisions(script, result.policy)
        summary["oracle_match"] = expected.decisions == result.decisions
        if not summary["oracle_match"]:
            summary["oracle_first_diff"] = _first_diff(expected.decisions, result.decisions)

    print(json.dumps(summary, indent=2))
    return 1 if result.scenario_failed or summary.get("oracle_match") is False else 0


def _first_diff(expected: list, actual: list):
    for i, (e, a) in enumerate(zip(expected, actual)):
        if e != a:
            return {"index": i, "expected": e, "actual": a}
    return {"index": min(len(expected), len(actual)), "expected_len": len(expected), "actual_len": len(actual)}


if __name__ == "__main__":
    sys.exit(main())
