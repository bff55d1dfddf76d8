#!/usr/bin/env python3
"""Run the sixteen-intent benchmark and print the per-case table.

Exits nonzero if any case misses its expected route or outcome, so this
doubles as a regression check:

    python scripts/run_benchmark.py --json report.json
"""

import argparse
import json
import sys

from rfagent.gateway.bench import format_report, run_benchmark


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--store", default=None,
                        help="run store directory (default: temp dir)")
    parser.add_argument("--noise-seed", type=int, default=0)
    parser.add_argument("--json", dest="json_path", default=None,
                        help="also write the full report as JSON")
    args = parser.parse_args()

    report = run_benchmark(store_root=args.store, noise_seed=args.noise_seed)
    print(format_report(report))
    print(f"run records under {report['store_root']}")
    if args.json_path:
        with open(args.json_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
        print(f"report written to {args.json_path}")
    return 0 if report["all_match"] else 1


if __name__ == "__main__":
    sys.exit(main())
