import csv
import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("MAGA_CLI")
DATA = Path(__file__).resolve().parents[2] / "data"

pytestmark = pytest.mark.skipif(not CLI, reason="MAGA_CLI not set")


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)


@pytest.fixture(scope="module")
def rldf_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("rldf")
    config = json.loads((DATA / "rldf_config.json").read_text())
    config["arena"]["titles_per_domain"] = 8
    config["rldf"]["grpo_steps"] = 4
    (out / "config.json").write_text(json.dumps(config))
    r = run("rldf", "--config", out / "config.json", "--rounds", 3, "--mode", "cmd", "--out", out)
    assert r.returncode == 0, r.stderr
    return out


def test_rldf_outputs(rldf_run):
    rows = list(csv.DictReader((rldf_run / "history.csv").open()))
    assert len(rows) == 12
    assert [r["parity"] for r in rows[::4]] == ["0", "1", "0"]
    assert (rldf_run / "policies" / "round_3" / "Qwen3-8B.json").exists()


def test_generate_train_bench_stats(rldf_run, tmp_path):
    common = ["--titles", rldf_run / "humans.jsonl", "--policies", rldf_run / "policies",
              "--presets", DATA / "presets.csv", "--seed", 5]
    for variant, stages in [("MGB", "stages_mgb.json"), ("MAGA", "stages_maga.json")]:
        r = run("generate", "--variant", variant, "--stages", DATA / stages, *common,
                "--out", tmp_path / f"{variant}.jsonl")
        assert r.returncode == 0, r.stderr
    mgb = (tmp_path / "MGB.jsonl").read_text().splitlines()
    maga = (tmp_path / "MAGA.jsonl").read_text().splitlines()
    assert len(mgb) == len(maga) == 32 * 5
    humans = [json.loads(x) for x in mgb if json.loads(x)["label"] == 0]
    assert humans == [json.loads(x) for x in maga if json.loads(x)["label"] == 0]

    r = run("train-detector", "--corpus", tmp_path / "MGB.jsonl", "--out", tmp_path / "det.json")
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["train_accuracy"] >= 0.99

    r = run("bench", "--datasets", tmp_path / "MGB.jsonl", tmp_path / "MAGA.jsonl",
            "--baseline", "MGB", "--detectors", tmp_path / "det.json", "--out", tmp_path / "bench.csv")
    assert r.returncode == 0, r.stderr
    rows = list(csv.DictReader((tmp_path / "bench.csv").open()))
    assert {(x["detector"], x["dataset"]) for x in rows} >= {("det", "MGB"), ("det", "MAGA")}

    r = run("stats", "--corpus", tmp_path / "MAGA.jsonl", "--reference", rldf_run / "humans.jsonl",
            "--out", tmp_path / "stats.csv")
    assert r.returncode == 0, r.stderr
    metrics = {(x["variant"], x["metric"]) for x in csv.DictReader((tmp_path / "stats.csv").open())}
    assert ("MAGA/machine", "yules_k") in metrics


def test_exit_codes(tmp_path):
    assert run("rldf").returncode == 1  # missing required flag
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"}\n')
    assert run("train-detector", "--corpus", bad, "--out", tmp_path / "d.json").returncode == 1
    missing = run("train-detector", "--corpus", tmp_path / "nope.jsonl", "--out", tmp_path / "d.json")
    assert missing.returncode == 2
