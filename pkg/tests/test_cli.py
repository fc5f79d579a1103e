import csv
import json

import numpy as np
import pytest

from sceneryscope import observe, read_observations, validate, CoinScenery, write_observations
from sceneryscope.cli import main

LAZY_Q = {"q": {"0": 0.5, "1": 0.25, "-1": 0.25}}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSimulate:
    def test_writes_reproducible_file(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.6, "2": 0.3}},
            "horizon": 2000, "seed": 7,
        })
        out = tmp_path / "obs.jsonl"
        code, stdout, _ = run(capsys, ["simulate", "--config", cfg, "--out", str(out)])
        assert code == 0
        report = json.loads(stdout)
        assert report["n"] == 2000 and report["seed"] == 7
        assert report["alphabet"] == ["-1", "+1"]
        symbols, header = read_observations(out)
        assert len(symbols) == 2001
        code2, stdout2, _ = run(capsys, ["simulate", "--config", cfg, "--out", str(out)])
        assert json.loads(stdout2)["sha256"] == report["sha256"]

    def test_binary_and_jsonl_decode_identically(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.6}},
            "horizon": 500, "seed": 3,
        })
        oj, ob = tmp_path / "o.jsonl", tmp_path / "o.bin"
        assert run(capsys, ["simulate", "--config", cfg, "--out", str(oj),
                            "--format", "jsonl"])[0] == 0
        assert run(capsys, ["simulate", "--config", cfg, "--out", str(ob),
                            "--format", "bin"])[0] == 0
        a, _ = read_observations(oj)
        b, _ = read_observations(ob)
        assert np.array_equal(a, b)

    def test_missing_scenery_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"increment_law": LAZY_Q, "horizon": 100})
        code, _, err = run(capsys, ["simulate", "--config", cfg,
                                    "--out", str(tmp_path / "x.jsonl")])
        assert code == 2
        assert json.loads(err)["error"] == "config"

    def test_bad_config_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        code, _, _ = run(capsys, ["simulate", "--config", str(path),
                                  "--out", str(tmp_path / "x.jsonl")])
        assert code == 2


class TestOracle:
    def test_coin_round_trip(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.6, "1": 0.2, "2": 0.5, "3": 0.3}},
        })
        code, stdout, _ = run(capsys, ["oracle", "--config", cfg])
        assert code == 0
        report = json.loads(stdout)
        assert report["verdict"] == "match"
        assert report["max_abs_error"] < 1e-7
        assert report["ell"] == 3

    def test_empty_scenery_all_alpha(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"alphabet": ["-1", "+1"], "alpha": [0.5, 0.5],
                        "deviations": {}},
        })
        code, stdout, _ = run(capsys, ["oracle", "--config", cfg])
        assert code == 0
        assert json.loads(stdout)["verdict"] == "all-alpha"

    def test_palindrome_bracket_equals_reversal(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.3, "1": 0.5, "2": 0.3}},
        })
        code, stdout, _ = run(capsys, ["oracle", "--config", cfg])
        assert code == 0
        recon = json.loads(stdout)["reconstructed"]
        assert recon == recon[::-1]


class TestReconstruct:
    def _simulated_file(self, tmp_path, theta, n, seed=7):
        law = validate({0: 0.5, 1: 0.25, -1: 0.25})
        scen = CoinScenery(theta).to_scenery()
        obs = observe(law, scen, n, seed)
        path = tmp_path / "obs.jsonl"
        write_observations(path, obs, scen.alphabet, seed)
        return path

    def test_empty_scenery_stream_no_signal(self, tmp_path, capsys):
        path = self._simulated_file(tmp_path, {}, 30_000)
        cfg = write_config(tmp_path, {"increment_law": LAZY_Q, "tau": None})
        code, stdout, _ = run(capsys, ["reconstruct", "--config", cfg,
                                       "--obs", str(path)])
        assert code == 4
        report = json.loads(stdout)
        assert report["ell"] is None

    def test_coin_stream_produces_report(self, tmp_path, capsys):
        path = self._simulated_file(tmp_path, {"0": 0.6, "2": 0.3}, 100_000)
        cfg = write_config(tmp_path, {"increment_law": LAZY_Q, "tau": None})
        code, stdout, _ = run(capsys, ["reconstruct", "--config", cfg,
                                       "--obs", str(path)])
        assert code in (0, 4)          # accuracy is not asserted at this scale
        report = json.loads(stdout)
        assert report["observations"] == 100_001
        assert "diagnostics" in report

    @pytest.mark.slow
    def test_ten_million_step_stream(self, tmp_path, capsys):
        # single long run: a report must come out; accuracy is not
        # asserted, since the block weights grow too slowly for that
        path = self._simulated_file(tmp_path, {"0": 0.6, "2": 0.3}, 10 ** 7)
        cfg = write_config(tmp_path, {"increment_law": LAZY_Q, "tau": None})
        code, stdout, _ = run(capsys, ["reconstruct", "--config", cfg,
                                       "--obs", str(path)])
        assert code in (0, 4)
        report = json.loads(stdout)
        assert report["observations"] == 10 ** 7 + 1
        assert "diagnostics" in report

    def test_truncated_file(self, tmp_path, capsys):
        path = self._simulated_file(tmp_path, {"0": 0.6}, 1000)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:500]) + "\n")
        cfg = write_config(tmp_path, {"increment_law": LAZY_Q})
        code, _, err = run(capsys, ["reconstruct", "--config", cfg,
                                    "--obs", str(path)])
        assert code == 3
        assert json.loads(err)["error"] == "insufficient-data"


class TestBench:
    def test_grid_rows_and_aggregate(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.6, "2": 0.3}},
            "bench": {"horizons": [2000, 4000, 8000], "seeds": [0, 1, 2, 3],
                      "gap_vectors": [[1], [2]]},
        })
        out = tmp_path / "bench.csv"
        code, stdout, _ = run(capsys, ["bench", "--config", cfg, "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3 * 4 * 2
        report = json.loads(stdout)
        assert len(report["aggregate"]) == 6
        for entry in report["aggregate"]:
            assert entry["seeds"] == 4 and entry["mse"] >= 0.0

    def test_empty_seed_list_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.6}},
            "bench": {"horizons": [2000], "seeds": []},
        })
        code, _, err = run(capsys, ["bench", "--config", cfg])
        assert code == 2

    def test_threads_env_respected(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("SCENERYSCOPE_THREADS", "1")
        cfg = write_config(tmp_path, {
            "increment_law": LAZY_Q,
            "scenery": {"coins": {"0": 0.6}},
            "bench": {"horizons": [2000], "seeds": [0, 1]},
        })
        code, stdout, _ = run(capsys, ["bench", "--config", cfg])
        assert code == 0
        assert json.loads(stdout)["rows"] == 2
