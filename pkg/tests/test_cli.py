"""End-to-end tests of the command-line interface.

These run the real subcommands on small configs and check the documented
contract: output schemas, exit codes, the always-written manifest, and
byte-level determinism in the master seed (including across worker counts).
"""

import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from wdpg import cli

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
SMOKE = str(CONFIG_DIR / "bandit_smoke.yaml")


def tiny_compare_dict() -> dict:
    return {
        "name": "tiny-compare",
        "env": {"name": "bandit", "gamma": 0.9},
        "policy": {"features": "constant"},
        "train": {"iterations": 10, "step_scale": 0.2, "eval_every": 5},
        "evaluation": {"n_trajectories": 20, "truncation": 50},
        "n_seeds": 2,
        "master_seed": 5,
    }


def write_config(tmp_path: Path, data: dict) -> str:
    target = tmp_path / f"{data['name']}.yaml"
    target.write_text(yaml.safe_dump(data))
    return str(target)


def read_manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text())


class TestHelpers:
    def test_fmt_uses_shortest_roundtrip_floats(self):
        assert cli._fmt(0.1) == "0.1"
        assert cli._fmt(1.0 / 3.0) == "0.3333333333333333"
        assert cli._fmt(7) == "7"
        assert cli._fmt("x") == "x"

    def test_checkpoints_include_start_end_and_multiples(self):
        assert cli._checkpoints(10, 4) == [0, 4, 8, 10]
        assert cli._checkpoints(10, 100) == [0, 10]
        assert cli._checkpoints(10, 5) == [0, 5, 10]
        assert cli._checkpoints(1, 1) == [0, 1]

    def test_compare_header_is_pinned(self):
        assert cli.COMPARE_HEADER == ["iter", "seed", "return_wd", "return_sf", "diff"]


@pytest.fixture(scope="module")
def compare_run(tmp_path_factory):
    """One tiny compare run shared by the schema/determinism tests."""
    tmp_path = tmp_path_factory.mktemp("compare")
    config = write_config(tmp_path, tiny_compare_dict())
    out = tmp_path / "run_a"
    code = cli.main(["compare", "--config", config, "--out", str(out)])
    return {"config": config, "out": out, "exit": code, "tmp": tmp_path}


class TestCompareCommand:
    def test_compare_csv_header_bytes(self, compare_run):
        payload = (compare_run["out"] / "compare.csv").read_bytes()
        assert payload.startswith(b"iter,seed,return_wd,return_sf,diff\n")

    def test_rows_cover_every_checkpoint_and_seed(self, compare_run):
        with (compare_run["out"] / "compare.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        iters = sorted({int(r["iter"]) for r in rows})
        assert iters == [0, 5, 10]
        assert sorted({int(r["seed"]) for r in rows}) == [0, 1]
        for row in rows:
            diff = float(row["return_wd"]) - float(row["return_sf"])
            assert float(row["diff"]) == diff

    def test_manifest_inventory_matches_files(self, compare_run):
        import hashlib

        manifest = read_manifest(compare_run["out"])
        names = {entry["path"] for entry in manifest["outputs"]}
        assert names == {"compare.csv", "verdict.jsonl"}
        for entry in manifest["outputs"]:
            payload = (compare_run["out"] / entry["path"]).read_bytes()
            assert entry["bytes"] == len(payload)
            assert entry["sha256"] == hashlib.sha256(payload).hexdigest()
        assert manifest["command"] == "compare"
        assert manifest["master_seed"] == 5
        assert manifest["status"] in ("ok", "gate_failed")
        assert set(manifest["derived_seeds"]) == {
            f"train/{i}/{kind}" for i in (0, 1) for kind in ("wd", "sf")
        }

    def test_rerun_is_byte_identical(self, compare_run):
        out_b = compare_run["tmp"] / "run_b"
        cli.main(["compare", "--config", compare_run["config"], "--out", str(out_b)])
        for name in ("compare.csv", "verdict.jsonl"):
            assert (out_b / name).read_bytes() == (
                compare_run["out"] / name
            ).read_bytes()
        first, second = read_manifest(compare_run["out"]), read_manifest(out_b)
        for volatile in ("started_at", "finished_at"):
            first.pop(volatile), second.pop(volatile)
        assert first == second

    def test_worker_count_does_not_change_bytes(self, compare_run):
        out_w = compare_run["tmp"] / "run_w2"
        cli.main(
            ["compare", "--config", compare_run["config"], "--out", str(out_w), "--workers", "2"]
        )
        assert (out_w / "compare.csv").read_bytes() == (
            compare_run["out"] / "compare.csv"
        ).read_bytes()

    def test_seed_override_changes_the_data(self, compare_run):
        out_s = compare_run["tmp"] / "run_seed9"
        cli.main(
            ["compare", "--config", compare_run["config"], "--out", str(out_s), "--seed", "9"]
        )
        assert read_manifest(out_s)["master_seed"] == 9
        assert (out_s / "compare.csv").read_bytes() != (
            compare_run["out"] / "compare.csv"
        ).read_bytes()


class TestTrainCommand:
    def test_history_schema_and_gate(self, tmp_path):
        config = write_config(
            tmp_path,
            {
                "name": "tiny-train",
                "env": {"name": "bandit", "gamma": 0.9},
                "policy": {"features": "constant"},
                "train": {"iterations": 400, "step_scale": 0.5, "eval_every": 200},
                "evaluation": {"n_trajectories": 200, "truncation": 60},
                "n_seeds": 2,
                "master_seed": 3,
            },
        )
        out = tmp_path / "out"
        code = cli.main(["train", "--config", config, "--out", str(out)])
        with (out / "history.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {
            "seed", "iter", "theta_0", "grad_norm", "step", "transitions",
            "eval_mean", "eval_se",
        }
        assert sorted({int(r["iter"]) for r in rows}) == [0, 200, 400]
        start = next(r for r in rows if int(r["iter"]) == 0)
        assert start["grad_norm"] == "" and start["step"] == "" and start["transitions"] == "0"
        later = next(r for r in rows if int(r["iter"]) == 400)
        assert int(later["transitions"]) > 0 and float(later["eval_se"]) > 0
        # 400 bandit iterations from theta = 0 reliably reach the reward bump,
        # so the improvement gate passes and the exit code is 0.
        manifest = read_manifest(out)
        assert code == 0 and manifest["status"] == "ok"
        gate = manifest["gates"][0]
        assert gate["gate"] == "wd_final_return_improves"
        assert gate["pass"] is True and gate["ci90"][0] > 0

    def test_diverging_run_fails_gates_with_exit_1(self, tmp_path):
        config = write_config(
            tmp_path,
            {
                "name": "blowup",
                "env": {"name": "bandit", "gamma": 0.9},
                "policy": {"features": "constant"},
                # Absurd scale: replicate 0 of master seed 1 overflows theta on
                # its first update, which must surface as a failed completion
                # gate (and a failed improvement gate), never as a crash.
                "train": {"iterations": 30, "step_scale": 1.0e308},
                "evaluation": {"n_trajectories": 30, "truncation": 60},
                "n_seeds": 2,
                "master_seed": 1,
            },
        )
        out = tmp_path / "out"
        with np.errstate(over="ignore"):
            code = cli.main(["train", "--config", config, "--out", str(out)])
        assert code == 1
        manifest = read_manifest(out)
        assert manifest["status"] == "gate_failed"
        by_name = {g["gate"]: g for g in manifest["gates"]}
        assert by_name["wd_run_0_completed"]["pass"] is False
        assert "non-finite parameters" in by_name["wd_run_0_completed"]["reason"]


class TestEvalCommand:
    def test_schema_and_exit(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["eval", "--config", SMOKE, "--out", str(out)])
        assert code == 0
        lines = (out / "eval.jsonl").read_text().splitlines()
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert set(record) == {
            "mean", "std_error", "n_trajectories", "truncation", "gamma", "tail_bound",
        }
        assert record["n_trajectories"] == 100 and record["truncation"] == 100
        manifest = read_manifest(out)
        assert manifest["gates"] == []
        assert set(manifest["derived_seeds"]) == {"eval"}


class TestVerdictCommands:
    """The three statistical gate commands on the fast bandit config; the
    bandit's closed-form oracle keeps these sharp even at smoke sizes."""

    def test_gradcheck_passes_and_writes_table(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["gradcheck", "--config", SMOKE, "--out", str(out)])
        assert code == 0
        with (out / "gradcheck.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        # 2 thetas x 2 kinds x 1 coordinate
        assert len(rows) == 4
        assert {r["kind"] for r in rows} == {"wd", "sf"}
        for row in rows:
            assert float(row["z"]) <= 3.0
        gates = read_manifest(out)["gates"]
        assert len(gates) == 4 and all(g["pass"] for g in gates)

    def test_variance_ordering_gate(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["variance", "--config", SMOKE, "--out", str(out)])
        assert code == 0
        with (out / "variance.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2  # one per theta
        for row in rows:
            assert float(row["trace_wd"]) < float(row["trace_sf"])
            assert float(row["trace_wd"]) < float(row["bound_wd"])
            assert float(row["trace_sf"]) < float(row["bound_sf"])
            assert float(row["ordering_confidence"]) >= 0.99

    def test_complexity_accounting_gate(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["complexity", "--config", SMOKE, "--out", str(out)])
        assert code == 0
        stats, gate = [
            json.loads(line)
            for line in (out / "complexity.jsonl").read_text().splitlines()
        ]
        assert stats["kind"] == "wd" and stats["iterations"] == 500
        assert gate["predicted"] == pytest.approx(20.0)
        assert gate["convention_gap"] == 1.0
        assert gate["pass"] is True


class TestErrorPaths:
    def test_missing_config_file_exits_2_with_manifest(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = cli.main(["eval", "--config", str(tmp_path / "nope.yaml"), "--out", str(out)])
        assert code == 2
        assert "not found" in capsys.readouterr().err
        manifest = read_manifest(out)
        assert manifest["status"] == "error" and manifest["config"] == {}
        assert "not found" in manifest["error"]

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        data = tiny_compare_dict()
        data["train"]["momentum"] = 0.9
        bad.write_text(yaml.safe_dump(data))
        code = cli.main(["train", "--config", str(bad)])
        assert code == 2
        assert "momentum" in capsys.readouterr().err

    def test_negative_seed_exits_2(self, tmp_path, capsys):
        code = cli.main(["eval", "--config", SMOKE, "--seed", "-3", "--out", str(tmp_path / "o")])
        assert code == 2
        assert "--seed" in capsys.readouterr().err

    def test_usage_errors_exit_2(self):
        with pytest.raises(SystemExit) as err:
            cli.main([])
        assert err.value.code == 2
        with pytest.raises(SystemExit) as err:
            cli.main(["train"])  # --config is required
        assert err.value.code == 2

    def test_default_out_dir_is_results_name_command(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        config = write_config(tmp_path, tiny_compare_dict())
        code = cli.main(["eval", "--config", config])
        assert code == 0
        assert (tmp_path / "results" / "tiny-compare" / "eval" / "manifest.json").exists()
        assert (tmp_path / "results" / "tiny-compare" / "eval" / "eval.jsonl").exists()
