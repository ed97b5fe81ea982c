from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest
import yaml

from trendshift.cli import main
from trendshift.corpus import stationary_spec, two_drift_spec


@pytest.fixture(scope="module")
def corpora(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpora")
    two_drift_spec(seed=0).dump(root / "two.json")
    stationary_spec(seed=1, days=20, posts_per_day=50).dump(root / "flat.json")
    assert main(["generate", str(root / "two.json"), str(root / "two.jsonl")]) == 0
    assert main(["generate", str(root / "flat.json"), str(root / "flat.jsonl")]) == 0
    return root


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestGenerate:
    def test_line_count_and_manifest(self, corpora):
        lines = (corpora / "two.jsonl").read_text().splitlines()
        assert len(lines) == 60 * 100
        manifest = yaml.safe_load((corpora / "two.jsonl.manifest.yaml").read_text())
        assert manifest["posts"] == 6000 and manifest["seed"] == 0

    def test_repeat_is_identical(self, corpora, tmp_path):
        assert main(["generate", str(corpora / "two.json"), str(tmp_path / "again.jsonl")]) == 0
        assert (tmp_path / "again.jsonl").read_bytes() == (corpora / "two.jsonl").read_bytes()

    def test_invalid_mixture_exit_2(self, corpora, tmp_path, capsys):
        spec = json.loads((corpora / "flat.json").read_text())
        spec["mixture"] = [0.5, 0.4]
        (tmp_path / "bad.json").write_text(json.dumps(spec))
        assert main(["generate", str(tmp_path / "bad.json"), str(tmp_path / "x.jsonl")]) == 2
        assert "invalid mixture" in capsys.readouterr().err


@pytest.fixture(scope="module")
def default_run(corpora, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", str(corpora / "two.jsonl"), "--out", str(out), "--seed", "0"]) == 0
    return out


class TestRun:
    def test_two_shift_records(self, default_run):
        events = read_jsonl(default_run / "events.jsonl")
        assert [e["type"] for e in events].count("shift") == 2
        assert [e["type"] for e in events].count("swap") == 2
        manifest = yaml.safe_load((default_run / "manifest.yaml").read_text())
        assert manifest["status"] == "ok" and manifest["final_version"] == 3
        assert set(manifest["encoder_fingerprints"]) == {1, 2, 3}
        assert {"bootstrap", "loop"} <= set(manifest["timings"])

    def test_artifacts(self, default_run):
        for name in ("shifts.csv", "daily_recall.csv", "weekly_recall.csv", "static_daily_recall.csv",
                     "static_weekly_recall.csv", "topology_metrics.csv"):
            assert (default_run / name).is_file(), name
        assert sorted(p.name for p in (default_run / "snapshots").iterdir()) == ["v1", "v2", "v3"]
        rows = list(csv.DictReader(open(default_run / "shifts.csv")))
        assert len(rows) == 2 and all(float(r["delta"]) >= 0.9 for r in rows)

    def test_mapper_only_strategy_keeps_encoder(self, corpora, tmp_path):
        assert main(["run", str(corpora / "two.jsonl"), "--out", str(tmp_path), "--strategy", "ft-mlp-f",
                     "--deterministic"]) == 0
        manifest = yaml.safe_load((tmp_path / "manifest.yaml").read_text())
        assert manifest["strategy"] == "ft-mlp-f"
        assert len(manifest["encoder_fingerprints"]) == 3
        assert len(set(manifest["encoder_fingerprints"].values())) == 1

    def test_omega_out_of_range(self, corpora, tmp_path, capsys):
        assert main(["run", str(corpora / "flat.jsonl"), "--out", str(tmp_path), "--omega", "1.01"]) == 2
        assert "omega out of range" in capsys.readouterr().err
        assert yaml.safe_load((tmp_path / "manifest.yaml").read_text())["status"] == "failed"

    def test_insufficient_history(self, corpora, tmp_path, capsys):
        code = main(["run", str(corpora / "flat.jsonl"), "--out", str(tmp_path), "--bootstrap-days", "30"])
        assert code == 1
        err = capsys.readouterr().err
        assert "20 days" in err and "30 days" in err

    def test_missing_input(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]) == 1

    def test_config_file_overrides_flags(self, corpora, tmp_path):
        (tmp_path / "cfg.yaml").write_text("omega: 0.95\nk: 3\n")
        assert main(["run", str(corpora / "flat.jsonl"), "--out", str(tmp_path / "o"), "--omega", "0.5",
                     "--k", "4", "--top-n", "7", "--config", str(tmp_path / "cfg.yaml")]) == 0
        cfg = yaml.safe_load((tmp_path / "o" / "manifest.yaml").read_text())["config"]
        assert (cfg["omega"], cfg["k"], cfg["n"]) == (0.95, 3, 7)

    def test_bad_config_key(self, corpora, tmp_path):
        (tmp_path / "cfg.yaml").write_text("omegaa: 0.95\n")
        assert main(["run", str(corpora / "flat.jsonl"), "--out", str(tmp_path / "o"),
                     "--config", str(tmp_path / "cfg.yaml")]) == 2

    def test_manifest_replay(self, corpora, tmp_path):
        first = tmp_path / "a"
        assert main(["run", str(corpora / "flat.jsonl"), "--out", str(first), "--seed", "4", "--k", "3"]) == 0
        second = tmp_path / "b"
        assert main(["run", str(corpora / "flat.jsonl"), "--out", str(second),
                     "--config", str(first / "manifest.yaml")]) == 0
        for name in ("events.jsonl", "daily_recall.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
        a = yaml.safe_load((first / "manifest.yaml").read_text())
        b = yaml.safe_load((second / "manifest.yaml").read_text())
        assert a["run_id"] == b["run_id"] and a["config"] == b["config"]


class TestCompare:
    def test_stationary_rows_equal_static(self, corpora, tmp_path):
        assert main(["compare-strategies", str(corpora / "flat.jsonl"), "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(open(tmp_path / "strategies.csv")))
        assert [r["strategy"] for r in rows] == ["tlw-ftw", "tlw-ftf", "ft-e-mlp-f", "ft-mlp-f", "static"]
        assert len({r["mean_recall"] for r in rows}) == 1
        assert all(r["shifts"] == "0" for r in rows)

    def test_fixed_seed_identical_tables(self, corpora, tmp_path):
        for name in ("a", "b"):
            assert main(["compare-strategies", str(corpora / "flat.jsonl"), "--out", str(tmp_path / name),
                         "--seed", "9"]) == 0
        assert (tmp_path / "a" / "strategies.csv").read_bytes() == (tmp_path / "b" / "strategies.csv").read_bytes()


def test_entry_point_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "trendshift.cli", "run", "missing.jsonl", "--omega", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "omega out of range" in proc.stderr
