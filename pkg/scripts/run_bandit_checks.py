#!/usr/bin/env python3
"""Run all three statistical verdict commands on the bandit config.

gradcheck: estimator means vs the finite-difference oracle (unbiasedness)
variance:  trace ordering of the two estimators with a paired bootstrap
complexity: phantom transitions per iteration vs 2/(1 - gamma)

Exits nonzero if any gate fails.
"""

import argparse
import sys
from pathlib import Path

from wdpg import cli

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / "configs" / "bandit_checks.yaml"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(DEFAULT_CONFIG))
    parser.add_argument("--out", default="results/bandit-checks")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    args = parser.parse_args()

    worst = 0
    for command in ("gradcheck", "variance", "complexity"):
        print(f"== {command} ==")
        argv = [command, "--config", args.config,
                "--out", str(Path(args.out) / command)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        worst = max(worst, cli.main(argv))
    return worst


if __name__ == "__main__":
    sys.exit(main())
