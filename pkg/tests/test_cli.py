import csv
import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

DATA = os.path.join(os.path.dirname(__file__), "data")
RCOV = os.path.join(DATA, "synthetic_d3_rcov.csv")
CONFIG = os.path.join(DATA, "golden_config.json")
GOLDEN = os.path.join(DATA, "golden_forecasts.csv")


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "vinecast.cli", *args],
                          capture_output=True, text=True)


def read_csv(path):
    with open(path) as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.reader(rows))


class TestBacktestGolden:
    def test_matches_committed_golden_file_bitwise(self, tmp_path):
        result = run_cli("backtest", "--input", RCOV, "--config", CONFIG,
                         "--seed", "123", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        got = open(tmp_path / "forecasts.csv", "rb").read()
        want = open(GOLDEN, "rb").read()
        assert got == want

    def test_manifest_names_and_window_count(self, tmp_path):
        result = run_cli("backtest", "--input", RCOV, "--config", CONFIG,
                         "--seed", "123", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        manifest = json.load(open(tmp_path / "backtest_manifest.json"))
        assert manifest["n_windows"] == 3
        assert manifest["n_forecasts"] == 45
        assert len(manifest["windows"]) == 3
        assert manifest["config_hash"]
        first = open(tmp_path / "forecasts.csv").readline()
        assert first.strip() == "# manifest=backtest_manifest.json"


class TestIngest:
    def _write_intraday(self, path, rows):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["day", "period", "asset", "log_return"])
            w.writerows(rows)

    def test_hand_checked_matrix(self, tmp_path):
        path = tmp_path / "intraday.csv"
        self._write_intraday(path, [
            [1, 1, "X", 0.5], [1, 1, "Y", 0.1],
            [1, 2, "X", -0.2], [1, 2, "Y", 0.3],
        ])
        result = run_cli("ingest", "--input", str(path), "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        rows = read_csv(tmp_path / "realized_cov.csv")
        got = {(r[1], r[2]): float(r[3]) for r in rows[1:]}
        assert got[("X", "X")] == pytest.approx(0.5 ** 2 + 0.2 ** 2)
        assert got[("X", "Y")] == pytest.approx(0.5 * 0.1 - 0.2 * 0.3)
        assert got[("Y", "Y")] == pytest.approx(0.1 ** 2 + 0.3 ** 2)

    def test_single_shift_equals_plain_grid(self, tmp_path, rng):
        path = tmp_path / "intraday.csv"
        rows = []
        for p in range(1, 9):
            for a in ("X", "Y"):
                rows.append([1, p, a, f"{rng.standard_normal() * 0.1:.10f}"])
        self._write_intraday(path, rows)
        run_cli("ingest", "--input", str(path), "--grid-stride", "2",
                "--n-shifts", "1", "--out", str(tmp_path / "a"))
        run_cli("ingest", "--input", str(path), "--grid-stride", "2",
                "--out", str(tmp_path / "b"))
        assert (read_csv(tmp_path / "a" / "realized_cov.csv")
                == read_csv(tmp_path / "b" / "realized_cov.csv"))

    def test_incomplete_day_skipped_with_warning(self, tmp_path):
        path = tmp_path / "intraday.csv"
        self._write_intraday(path, [
            [1, 1, "X", 0.5], [1, 1, "Y", 0.1],
            [1, 2, "X", -0.2], [1, 2, "Y", 0.3],
            [2, 1, "X", 0.4],                      # day 2 incomplete
        ])
        result = run_cli("ingest", "--input", str(path), "--out", str(tmp_path))
        assert result.returncode == 0
        assert "day 2" in result.stderr and "skipped" in result.stderr
        rows = read_csv(tmp_path / "realized_cov.csv")
        assert {r[0] for r in rows[1:]} == {"1"}


class TestErrors:
    def test_malformed_header_exit_2(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w") as fh:
            fh.write("data,row,col,value\n1,X,X,1.0\n")
        result = run_cli("backtest", "--input", str(path), "--out",
                         str(tmp_path))
        assert result.returncode == 2
        assert "header" in result.stderr

    def test_unknown_config_key_exit_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"no_such_key": 1}')
        result = run_cli("backtest", "--input", RCOV, "--config", str(cfg),
                         "--out", str(tmp_path))
        assert result.returncode == 2

    def test_too_short_series_exit_2(self, tmp_path):
        src = read_csv(RCOV)
        path = tmp_path / "short.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            keep = {str(d) for d in range(1, 31)}
            w.writerow(src[0])
            w.writerows([r for r in src[1:] if r[0] in keep])
        result = run_cli("backtest", "--input", str(path), "--config", CONFIG,
                         "--out", str(tmp_path))
        assert result.returncode == 2


class TestSelectStructure:
    def test_emits_structure_and_audit(self, tmp_path):
        result = run_cli("select-structure", "--input", RCOV, "--weights",
                         "ewma", "--lambda", "0.99", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        structure = json.load(open(tmp_path / "structure.json"))
        assert structure["dim"] == 3
        assert len(structure["trees"]) == 2
        rows = read_csv(tmp_path / "weight_audit.csv")
        assert rows[0] == ["tree_level", "conditioning", "pair", "weight",
                           "selected"]
        selected = [r for r in rows[1:] if r[4] == "1"]
        assert len(selected) == 3  # d(d-1)/2 edges for d=3


class TestTransformFitForecast:
    def test_transform_components(self, tmp_path):
        result = run_cli("transform", "--input", RCOV, "--config", CONFIG,
                         "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        rows = read_csv(tmp_path / "components.csv")
        ids = {r[1] for r in rows[1:]}
        assert {"VAR:1", "VAR:2", "VAR:3"} <= ids
        assert any(i.startswith("PCOR:") for i in ids)

    def test_fit_model_json(self, tmp_path):
        result = run_cli("fit", "--input", RCOV, "--config", CONFIG,
                         "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        model = json.load(open(tmp_path / "model.json"))
        assert len(model["margins"]) == 6
        assert model["copula"]["dim"] == 6
        assert model["margins"][0]["spec"] == "HAR"

    def test_forecast_next_day(self, tmp_path):
        result = run_cli("forecast", "--input", RCOV, "--config", CONFIG,
                         "--seed", "7", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        rows = read_csv(tmp_path / "forecast.csv")
        assert rows[1][0] == "128"  # next day after the 127-day input
        values = {(r[1], r[2]): float(r[3]) for r in rows[1:]}
        m = np.array([[values[("AAA", "AAA")], values[("AAA", "BBB")],
                       values[("AAA", "CCC")]],
                      [values[("AAA", "BBB")], values[("BBB", "BBB")],
                       values[("BBB", "CCC")]],
                      [values[("AAA", "CCC")], values[("BBB", "CCC")],
                       values[("CCC", "CCC")]]])
        assert np.linalg.eigvalsh(m)[0] > 0


class TestEvaluate:
    def test_identical_models_zero_diff_full_mcs(self, tmp_path):
        shutil.copy(GOLDEN, tmp_path / "a.csv")
        shutil.copy(GOLDEN, tmp_path / "b.csv")
        result = run_cli("evaluate", "--actual", RCOV,
                         "--forecast", f"A={tmp_path / 'a.csv'}",
                         "--forecast", f"B={tmp_path / 'b.csv'}",
                         "--n-boot", "200", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        rows = read_csv(tmp_path / "rmse_frobenius.csv")
        rmse = {r[0]: float(r[1]) for r in rows[1:]}
        assert rmse["A"] == rmse["B"]
        flags = {r[0]: r[2] for r in rows[1:]}
        assert flags == {"A": "1", "B": "1"}
        result_json = json.load(open(tmp_path / "mcs.json"))
        assert set(result_json["superior"]) == {"A", "B"}

    def test_component_table_layout(self, tmp_path):
        result = run_cli("evaluate", "--actual", RCOV,
                         "--forecast", f"A={GOLDEN}",
                         "--n-boot", "50", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        rows = read_csv(tmp_path / "rmse_components.csv")
        assert rows[0] == ["component", "model", "rmse", "in_mcs"]
        components = {r[0] for r in rows[1:]}
        assert components == {"AAA,AAA", "AAA,BBB", "AAA,CCC", "BBB,BBB",
                              "BBB,CCC", "CCC,CCC"}
        assert all(r[3] == "1" for r in rows[1:])  # single model: full set


class TestFrontier:
    def test_outputs(self, tmp_path, rng):
        returns_path = tmp_path / "returns.csv"
        with open(returns_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["day", "asset", "return"])
            for day in range(1, 128):
                for a in ("AAA", "BBB", "CCC"):
                    w.writerow([day, a, f"{rng.standard_normal() * 0.01:.8f}"])
        result = run_cli("frontier", "--forecast", GOLDEN, "--actual", RCOV,
                         "--returns", str(returns_path), "--mean-window", "40",
                         "--targets", "0.0001,0.0004", "--out", str(tmp_path))
        assert result.returncode == 0, result.stderr
        exp = read_csv(tmp_path / "frontier_expected.csv")
        assert exp[0] == ["target_return", "expected_sd"]
        assert len(exp) == 3
        post = read_csv(tmp_path / "frontier_expost.csv")
        assert post[0] == ["target_return", "avg_realized_return",
                           "avg_realized_sd"]
        assert len(post) == 3
        assert all(float(r[1]) > 0 for r in exp[1:])
