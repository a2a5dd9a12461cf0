#!/usr/bin/env python3
"""Run the shipped pendulum comparison and summarize compare.csv.

Thin wrapper over `wdpg compare` that afterward prints per-seed final returns
for both estimators, the matched differences, and the gate verdicts.
"""

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

from wdpg import cli

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / "configs" / "pendulum_compare.yaml"


def summarize(out_dir: Path) -> None:
    by_seed = defaultdict(dict)
    with (out_dir / "compare.csv").open() as fh:
        for row in csv.DictReader(fh):
            by_seed[int(row["seed"])][int(row["iter"])] = row

    print(f"\n{'seed':>4} {'initial_wd':>11} {'final_wd':>11} {'final_sf':>11} {'diff':>9}")
    for seed in sorted(by_seed):
        rows = by_seed[seed]
        first, last = rows[min(rows)], rows[max(rows)]
        print(
            f"{seed:>4} {float(first['return_wd']):>11.2f} "
            f"{float(last['return_wd']):>11.2f} {float(last['return_sf']):>11.2f} "
            f"{float(last['diff']):>9.2f}"
        )

    for gate in json.loads((out_dir / "manifest.json").read_text())["gates"]:
        status = "PASS" if gate["pass"] else "FAIL"
        print(f"{gate['gate']}: {status}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(DEFAULT_CONFIG))
    parser.add_argument("--out", default="results/pendulum-compare/compare")
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    args = parser.parse_args()

    argv = ["compare", "--config", args.config, "--out", args.out,
            "--workers", str(args.workers)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    code = cli.main(argv)
    summarize(Path(args.out))
    return code


if __name__ == "__main__":
    sys.exit(main())
