#!/usr/bin/env python3
"""Sweep the step scale of an experiment config and report improvement per value.

For each candidate scale the configured training run is repeated over several
seeds; the table reports the mean improvement of the evaluated return (final
minus initial), its standard error, the across-seed minimum, and how many runs
aborted (non-finite parameters). Used to pick the `step_scale` values shipped
in the configs: prefer the largest scale whose worst seed still improves and
which never aborts.

Example:
    python3 scripts/calibrate_step_scale.py --config configs/pendulum_compare.yaml \
        --scales 0.003 0.01 0.03 0.1 --seeds 5 --iterations 2000 --workers 4
"""

import argparse
import dataclasses
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from wdpg.analysis import evaluate_return
from wdpg.config import (
    build_env,
    build_policy,
    load_config,
    subtask_seed,
    train_config_for_seed,
)
from wdpg.training import train

ROLE_CALIBRATION = 7  # outside the CLI's 0-5 and the acceptance tests' 6


def _one_run(task):
    config, scale, replicate, iterations = task
    env = build_env(config)
    policy = build_policy(config, env)
    seed = subtask_seed(config.master_seed, ROLE_CALIBRATION, replicate)
    train_cfg = dataclasses.replace(
        train_config_for_seed(config, seed), step_scale=scale, iterations=iterations
    )
    result = train(env, policy, config=train_cfg)

    eval_rng = lambda tag: np.random.default_rng(
        subtask_seed(config.master_seed, ROLE_CALIBRATION, replicate, tag)
    )
    before = evaluate_return(
        env, policy, config.evaluation.n_trajectories,
        config.evaluation.truncation, eval_rng(0),
    )
    if result.aborted:
        return {"scale": scale, "improvement": None, "aborted": True}
    after = evaluate_return(
        env, policy.with_theta(result.final_theta),
        config.evaluation.n_trajectories, config.evaluation.truncation, eval_rng(1),
    )
    return {
        "scale": scale,
        "improvement": after.mean - before.mean,
        "aborted": False,
    }


def main() -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--config", required=True)
    parser.add_argument("--scales", type=float, nargs="+", required=True)
    parser.add_argument("--seeds", type=int, default=5, help="replicates per scale")
    parser.add_argument(
        "--iterations", type=int, default=None,
        help="override the config's iteration count (sweeps want short runs)",
    )
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    config = load_config(args.config)
    iterations = args.iterations or config.train.iterations
    tasks = [
        (config, scale, replicate, iterations)
        for scale in args.scales
        for replicate in range(args.seeds)
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_one_run, tasks))
    else:
        outcomes = [_one_run(task) for task in tasks]

    print(f"\nconfig {args.config}  kind={config.train.kind}  "
          f"iterations={iterations}  seeds={args.seeds}")
    print(f"{'scale':>10} {'mean_improve':>13} {'se':>8} {'min':>9} {'aborted':>8}")
    for scale in args.scales:
        values = [o["improvement"] for o in outcomes
                  if o["scale"] == scale and not o["aborted"]]
        aborted = sum(1 for o in outcomes if o["scale"] == scale and o["aborted"])
        if values:
            mean = float(np.mean(values))
            se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
            print(f"{scale:>10g} {mean:>13.2f} {se:>8.2f} {min(values):>9.2f} {aborted:>8}")
        else:
            print(f"{scale:>10g} {'all runs aborted':>31} {aborted:>8}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
