"""Command-line interface.

Subcommands
-----------
train       run the training loop over n_seeds replicates, write history.csv
compare     matched-seed weak-derivative vs score-function training, compare.csv
eval        evaluate the configured initial policy, write eval.jsonl
gradcheck   batch estimator means vs the finite-difference oracle, gradcheck.csv
variance    estimator variance traces, ordering bootstrap, variance.csv
complexity  phantom-transition accounting over a training run, complexity.jsonl

Every command accepts ``--config`` (YAML experiment file), ``--seed`` (master
seed override), ``--out`` (output directory) and ``--workers`` (process fan-out
for per-seed replicates). Exit status: 0 when the run completes and all gates
pass, 1 when a verification gate fails (or the run errors mid-flight), 2 for
usage or configuration errors. A manifest.json is written in every case.

Determinism: every sub-task seed is derived from the master seed with
``subtask_seed(master, role, *indices)``, so outputs are byte-identical for a
given (config, master seed) regardless of worker count.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from wdpg import __version__
from wdpg.analysis import (
    bootstrap_mean_interval,
    evaluate_return,
    finite_difference_gradient,
    sample_complexity_stats,
    variance_ordering_confidence,
    variance_report,
)
from wdpg.config import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    build_env,
    build_policy,
    config_to_dict,
    load_config,
    subtask_seed,
    train_config_for_seed,
)
from wdpg.estimators import ergodic_states_batch, sf_gradient_batch, wd_gradient_batch
from wdpg.training import train

# Sub-task roles used as the first index of every derived seed.
ROLE_TRAIN = 0
ROLE_EVAL = 1
ROLE_GRADCHECK = 2
ROLE_VARIANCE = 3
ROLE_COMPLEXITY = 4
ROLE_BOOTSTRAP = 5

KIND_INDEX = {"wd": 0, "sf": 1}

COMPARE_HEADER = ["iter", "seed", "return_wd", "return_sf", "diff"]


def _fmt(value) -> str:
    """Shortest-roundtrip decimal for floats; plain str otherwise."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _print_gates(gates: list[dict]) -> None:
    for gate in gates:
        status = "PASS" if gate["pass"] else "FAIL"
        detail = {k: v for k, v in gate.items() if k not in ("gate", "pass")}
        print(f"[gate] {gate['gate']}: {status} {json.dumps(detail, sort_keys=True)}")


def _checkpoints(iterations: int, eval_every: int) -> list[int]:
    ks = {0, iterations}
    ks.update(range(eval_every, iterations + 1, eval_every))
    return sorted(ks)


def _training_task(task: tuple) -> dict:
    """One seeded training run plus checkpoint evaluations (worker-safe)."""
    config, replicate, kind = task
    env = build_env(config)
    policy = build_policy(config, env)
    seed = subtask_seed(config.master_seed, ROLE_TRAIN, replicate)
    result = train(env, policy, config=train_config_for_seed(config, seed, kind))

    ks = _checkpoints(config.train.iterations, config.train.eval_every)
    rows = []
    for ci, k in enumerate(ks):
        if k > len(result.records):
            break
        theta_k = result.theta_after(k)
        estimate = evaluate_return(
            env,
            policy.with_theta(theta_k),
            config.evaluation.n_trajectories,
            config.evaluation.truncation,
            np.random.default_rng(
                subtask_seed(config.master_seed, ROLE_EVAL, replicate, ci)
            ),
        )
        if k == 0:
            grad_norm, step, transitions = None, None, 0
        else:
            rec = result.records[k - 1]
            grad_norm = float(np.linalg.norm(rec.grad.vector))
            step = rec.step
            transitions = rec.cumulative_transitions
        rows.append(
            {
                "iter": k,
                "theta": [float(v) for v in theta_k],
                "grad_norm": grad_norm,
                "step": step,
                "transitions": transitions,
                "eval_mean": estimate.mean,
                "eval_se": estimate.std_error,
            }
        )
    return {
        "replicate": replicate,
        "kind": kind,
        "seed": seed,
        "rows": rows,
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
    }


def _run_tasks(tasks: list[tuple], workers: int) -> list[dict]:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_training_task, tasks))
    return [_training_task(task) for task in tasks]


def _improvement_gate(
    name: str, runs: list[dict], config: ExperimentConfig, boot_index: int
) -> dict:
    """One-sided bootstrap test that the final return beats the initial one."""
    diffs, aborted = [], 0
    for run in runs:
        if run["aborted"] or run["rows"][-1]["iter"] != config.train.iterations:
            aborted += 1
            continue
        diffs.append(run["rows"][-1]["eval_mean"] - run["rows"][0]["eval_mean"])
    gate = {
        "gate": name,
        "n_seeds": len(runs),
        "aborted_runs": aborted,
        "mean_improvement": float(np.mean(diffs)) if diffs else None,
    }
    if aborted or len(diffs) < 2:
        gate["pass"] = False
        return gate
    lo, hi = bootstrap_mean_interval(
        np.asarray(diffs),
        np.random.default_rng(
            subtask_seed(config.master_seed, ROLE_BOOTSTRAP, boot_index)
        ),
        lower=0.05,
        upper=0.95,
    )
    gate["ci90"] = [lo, hi]
    gate["pass"] = bool(lo > 0.0)
    return gate


def cmd_train(config: ExperimentConfig, out_dir: Path, workers: int):
    kind = config.train.kind
    tasks = [(config, i, kind) for i in range(config.n_seeds)]
    runs = _run_tasks(tasks, workers)

    dim = build_policy(config, build_env(config)).dim
    header = (
        ["seed", "iter"]
        + [f"theta_{i}" for i in range(dim)]
        + ["grad_norm", "step", "transitions", "eval_mean", "eval_se"]
    )
    rows = []
    for run in runs:
        for row in run["rows"]:
            rows.append(
                [run["replicate"], row["iter"]]
                + row["theta"]
                + [
                    "" if row["grad_norm"] is None else row["grad_norm"],
                    "" if row["step"] is None else row["step"],
                    row["transitions"],
                    row["eval_mean"],
                    row["eval_se"],
                ]
            )
    _write_csv(out_dir / "history.csv", header, rows)

    gates = []
    if config.n_seeds >= 2:
        gates.append(
            _improvement_gate(f"{kind}_final_return_improves", runs, config, 0)
        )
    for run in runs:
        if run["aborted"]:
            gates.append(
                {
                    "gate": f"{kind}_run_{run['replicate']}_completed",
                    "pass": False,
                    "reason": run["abort_reason"],
                }
            )
    _write_jsonl(out_dir / "verdict.jsonl", gates)
    seeds = {
        f"train/{run['replicate']}": run["seed"] for run in runs
    }
    return gates, ["history.csv", "verdict.jsonl"], seeds


def cmd_compare(config: ExperimentConfig, out_dir: Path, workers: int):
    tasks = []
    for i in range(config.n_seeds):
        tasks.append((config, i, "wd"))
        tasks.append((config, i, "sf"))
    runs = _run_tasks(tasks, workers)
    by_key = {(run["replicate"], run["kind"]): run for run in runs}

    rows = []
    final_wd, final_sf = [], []
    for i in range(config.n_seeds):
        run_wd = by_key[(i, "wd")]
        run_sf = by_key[(i, "sf")]
        paired = min(len(run_wd["rows"]), len(run_sf["rows"]))
        for ci in range(paired):
            row_wd, row_sf = run_wd["rows"][ci], run_sf["rows"][ci]
            rows.append(
                [
                    row_wd["iter"],
                    i,
                    row_wd["eval_mean"],
                    row_sf["eval_mean"],
                    row_wd["eval_mean"] - row_sf["eval_mean"],
                ]
            )
        if (
            not run_wd["aborted"]
            and not run_sf["aborted"]
            and run_wd["rows"][-1]["iter"] == config.train.iterations
            and run_sf["rows"][-1]["iter"] == config.train.iterations
        ):
            final_wd.append(run_wd["rows"][-1]["eval_mean"])
            final_sf.append(run_sf["rows"][-1]["eval_mean"])
    _write_csv(out_dir / "compare.csv", COMPARE_HEADER, rows)

    wd_runs = [by_key[(i, "wd")] for i in range(config.n_seeds)]
    gates = [_improvement_gate("wd_final_return_improves", wd_runs, config, 0)]

    diff_gate = {
        "gate": "wd_vs_sf_final_diff_sign",
        "n_seeds": len(final_wd),
        "aborted_pairs": config.n_seeds - len(final_wd),
    }
    if len(final_wd) >= 2:
        diffs = np.asarray(final_wd) - np.asarray(final_sf)
        lo, hi = bootstrap_mean_interval(
            diffs,
            np.random.default_rng(subtask_seed(config.master_seed, ROLE_BOOTSTRAP, 1)),
        )
        diff_gate.update(
            mean_diff=float(diffs.mean()),
            ci95=[lo, hi],
            sign="nonnegative" if diffs.mean() >= 0.0 else "negative",
        )
        diff_gate["pass"] = bool(diffs.mean() >= 0.0)
    else:
        diff_gate["pass"] = False
    gates.append(diff_gate)

    _write_jsonl(out_dir / "verdict.jsonl", gates)
    seeds = {
        f"train/{run['replicate']}/{run['kind']}": run["seed"] for run in runs
    }
    return gates, ["compare.csv", "verdict.jsonl"], seeds


def cmd_eval(config: ExperimentConfig, out_dir: Path, workers: int):
    env = build_env(config)
    policy = build_policy(config, env)
    seed = subtask_seed(config.master_seed, ROLE_EVAL, 0, 0)
    estimate = evaluate_return(
        env,
        policy,
        config.evaluation.n_trajectories,
        config.evaluation.truncation,
        np.random.default_rng(seed),
    )
    _write_jsonl(out_dir / "eval.jsonl", [dataclasses.asdict(estimate)])
    return [], ["eval.jsonl"], {"eval": seed}


def cmd_gradcheck(config: ExperimentConfig, out_dir: Path, workers: int):
    env = build_env(config)
    base_policy = build_policy(config, env)
    n = config.analysis.gradcheck_estimates
    gates, rows, seeds = [], [], {}

    for j, theta_value in enumerate(config.analysis.thetas):
        policy = base_policy.with_theta(
            np.full(base_policy.dim, float(theta_value))
        )
        oracle_seed = subtask_seed(config.master_seed, ROLE_GRADCHECK, 2, j)
        seeds[f"gradcheck/oracle/{j}"] = oracle_seed
        oracle = finite_difference_gradient(
            env,
            policy,
            config.analysis.fd_step,
            config.analysis.fd_trajectories,
            config.analysis.fd_truncation,
            np.random.default_rng(oracle_seed),
        )
        for kind in ("wd", "sf"):
            est_seed = subtask_seed(
                config.master_seed, ROLE_GRADCHECK, KIND_INDEX[kind], j
            )
            seeds[f"gradcheck/{kind}/{j}"] = est_seed
            rng = np.random.default_rng(est_seed)
            # Start states carry the discounted occupancy weighting rooted at
            # reset; that is the distribution under which the estimator means
            # equal the gradient the oracle measures (identical to reset on
            # single-state envs).
            coords = ergodic_states_batch(env, policy, n, env.spec.gamma, rng)
            if kind == "wd":
                batch = wd_gradient_batch(env, policy, coords, rng)
            else:
                batch = sf_gradient_batch(env, policy, coords, rng)
            means = batch.vectors.mean(axis=0)
            ses = batch.vectors.std(axis=0, ddof=1) / math.sqrt(n)
            combined = np.sqrt(ses**2 + oracle.std_error**2)
            with np.errstate(invalid="ignore", divide="ignore"):
                z = np.where(
                    combined > 0.0, np.abs(means - oracle.vector) / combined, 0.0
                )
            for coord in range(base_policy.dim):
                rows.append(
                    [
                        theta_value,
                        kind,
                        coord,
                        float(means[coord]),
                        float(ses[coord]),
                        float(oracle.vector[coord]),
                        float(oracle.std_error[coord]),
                        float(z[coord]),
                    ]
                )
            gates.append(
                {
                    "gate": f"{kind}_unbiased_theta_{theta_value}",
                    "pass": bool(np.all(z <= 3.0)),
                    "max_z": float(z.max()),
                    "n_estimates": n,
                }
            )

    _write_csv(
        out_dir / "gradcheck.csv",
        ["theta", "kind", "coord", "estimate", "est_se", "oracle", "oracle_se", "z"],
        rows,
    )
    _write_jsonl(out_dir / "verdict.jsonl", gates)
    return gates, ["gradcheck.csv", "verdict.jsonl"], seeds


def cmd_variance(config: ExperimentConfig, out_dir: Path, workers: int):
    env = build_env(config)
    base_policy = build_policy(config, env)
    n = config.analysis.variance_estimates
    gates, rows, seeds = [], [], {}

    for j, theta_value in enumerate(config.analysis.thetas):
        policy = base_policy.with_theta(np.full(base_policy.dim, float(theta_value)))
        reports, vectors = {}, {}
        for kind in ("wd", "sf"):
            seed = subtask_seed(config.master_seed, ROLE_VARIANCE, KIND_INDEX[kind], j)
            seeds[f"variance/{kind}/{j}"] = seed
            rng = np.random.default_rng(seed)
            coords = ergodic_states_batch(env, policy, n, env.spec.gamma, rng)
            if kind == "wd":
                batch = wd_gradient_batch(env, policy, coords, rng)
            else:
                batch = sf_gradient_batch(env, policy, coords, rng)
            reports[kind] = variance_report(env, policy, batch, coords, rng)
            vectors[kind] = batch.vectors
        boot_seed = subtask_seed(config.master_seed, ROLE_VARIANCE, 2, j)
        seeds[f"variance/bootstrap/{j}"] = boot_seed
        confidence, _ = variance_ordering_confidence(
            vectors["wd"],
            vectors["sf"],
            np.random.default_rng(boot_seed),
            n_boot=config.analysis.bootstrap_replicates,
        )
        wd_rep, sf_rep = reports["wd"], reports["sf"]
        rows.append(
            [
                theta_value,
                wd_rep.trace,
                sf_rep.trace,
                wd_rep.bound,
                sf_rep.bound,
                wd_rep.g_weak,
                sf_rep.g_score,
                sf_rep.g_density,
                confidence,
            ]
        )
        gates.append(
            {
                "gate": f"wd_variance_below_sf_theta_{theta_value}",
                "pass": bool(confidence >= 0.99),
                "ordering_confidence": confidence,
                "trace_wd": wd_rep.trace,
                "trace_sf": sf_rep.trace,
                "n_estimates": n,
            }
        )

    _write_csv(
        out_dir / "variance.csv",
        [
            "theta",
            "trace_wd",
            "trace_sf",
            "bound_wd",
            "bound_sf",
            "g_weak",
            "g_score",
            "g_density",
            "ordering_confidence",
        ],
        rows,
    )
    _write_jsonl(out_dir / "verdict.jsonl", gates)
    return gates, ["variance.csv", "verdict.jsonl"], seeds


def cmd_complexity(config: ExperimentConfig, out_dir: Path, workers: int):
    env = build_env(config)
    policy = build_policy(config, env)
    seed = subtask_seed(config.master_seed, ROLE_COMPLEXITY, 0)
    train_config = dataclasses.replace(
        train_config_for_seed(config, seed),
        iterations=config.analysis.complexity_iterations,
    )
    result = train(env, policy, config=train_config)
    stats = sample_complexity_stats(result.records)
    tolerance = 3.0 * stats.std_error
    deviation = abs(stats.mean_per_iteration - stats.predicted_per_iteration)
    gate = {
        "gate": "phantom_transitions_match_prediction",
        "pass": bool(not result.aborted and deviation <= tolerance),
        "measured_mean": stats.mean_per_iteration,
        "predicted": stats.predicted_per_iteration,
        "pascal_prediction": stats.pascal_per_iteration,
        "convention_gap": stats.convention_gap,
        "deviation": deviation,
        "tolerance_3se": tolerance,
        "iterations": stats.iterations,
    }
    record = {**dataclasses.asdict(stats), "aborted": result.aborted}
    _write_jsonl(out_dir / "complexity.jsonl", [record, gate])
    _write_jsonl(out_dir / "verdict.jsonl", [gate])
    return (
        [gate],
        ["complexity.jsonl", "verdict.jsonl"],
        {"complexity/train": seed},
    )


COMMANDS = {
    "train": cmd_train,
    "compare": cmd_compare,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "variance": cmd_variance,
    "complexity": cmd_complexity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wdpg",
        description="Weak-derivative policy gradient experiments and verification gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        cmd = sub.add_parser(name, help=fn.__doc__)
        cmd.add_argument("--config", required=True, help="YAML experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="master seed override")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument(
            "--workers", type=int, default=1, help="process pool size for replicates"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            config = dataclasses.replace(config, master_seed=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        # A manifest is due even on config errors; without a parsed config the
        # output directory is only known when --out was given explicitly.
        if args.out is not None:
            manifest = RunManifest(
                command=args.command,
                config={},
                code_version=__version__,
                master_seed=args.seed if args.seed is not None else -1,
            )
            manifest.finish("error", str(exc))
            manifest.write(Path(args.out))
        return 2

    out_dir = (
        Path(args.out)
        if args.out is not None
        else Path("results") / config.name / args.command
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        config=config_to_dict(config),
        code_version=__version__,
        master_seed=config.master_seed,
    )
    try:
        gates, outputs, seeds = COMMANDS[args.command](config, out_dir, args.workers)
    except ConfigError as exc:
        manifest.finish("error", str(exc))
        manifest.write(out_dir)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report, record, and fail loudly
        manifest.finish("error", f"{type(exc).__name__}: {exc}")
        manifest.write(out_dir)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    manifest.derived_seeds = seeds
    manifest.gates = gates
    manifest.add_outputs(out_dir, outputs)
    all_pass = all(gate["pass"] for gate in gates)
    manifest.finish("ok" if all_pass else "gate_failed")
    manifest.write(out_dir)
    _print_gates(gates)
    print(f"wrote {out_dir}/manifest.json ({manifest.status})")
    return 0 if all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
