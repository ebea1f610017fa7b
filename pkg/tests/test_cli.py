import json
import os

import numpy as np
import pytest

from dpmarkov.cli import main
from dpmarkov.draws import load_draws
from dpmarkov.io import format_series, read_series
from dpmarkov.simulate import simulate_brownian
from dpmarkov.variants.tar import TarParams

SHORT = ["--iterations", "240", "--burn-in", "40", "--thin", "5", "--L", "12"]


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def series_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    path = d / "walk.txt"
    path.write_text(format_series(simulate_brownian(60, seed=3)))
    return str(path)


@pytest.fixture(scope="module")
def fitted(tmp_path_factory, series_file):
    out = tmp_path_factory.mktemp("fit")
    assert main(["fit", series_file, "--out-dir", str(out), "--seed", "4", *SHORT]) == 0
    return out


class TestSimulate:
    def test_brownian_file_has_one_line_per_value(self, tmp_path):
        assert main(["simulate", "brownian", "--n", "500", "--seed", "1",
                     "--out-dir", str(tmp_path)]) == 0
        lines = (tmp_path / "brownian.txt").read_text().splitlines()
        assert len(lines) == 500 and float(lines[0]) == 0.0
        meta = json.loads((tmp_path / "brownian.txt.meta.json").read_text())
        assert meta == {"kind": "brownian", "n": 500, "seed": 1}

    def test_skewnormal_file(self, tmp_path):
        assert main(["simulate", "skewnormal", "--n", "500", "--z1", "0",
                     "--out-dir", str(tmp_path)]) == 0
        assert len((tmp_path / "skewnormal.txt").read_text().splitlines()) == 500

    def test_rerun_is_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            main(["simulate", "skewnormal", "--n", "100", "--seed", "7",
                  "--out-dir", str(tmp_path / sub)])
        assert read(tmp_path / "a" / "skewnormal.txt") == read(tmp_path / "b" / "skewnormal.txt")

    def test_output_directory_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DPMARKOV_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["simulate", "brownian", "--n", "10"]) == 0
        assert (tmp_path / "env" / "brownian.txt").exists()

    def test_from_fitted_model(self, tmp_path, fitted):
        assert main(["simulate", "model", "--draws", str(fitted / "draws.txt"), "--n", "50",
                     "--draw-index", "3", "--out-dir", str(tmp_path)]) == 0
        assert read_series(tmp_path / "model.txt").size == 50

    def test_invalid_length_is_a_validation_error(self, tmp_path):
        assert main(["simulate", "brownian", "--n", "0", "--out-dir", str(tmp_path)]) == 1


class TestFit:
    def test_outputs(self, fitted):
        for name in ("config.json", "draws.txt", "trace.txt", "fit.json"):
            assert (fitted / name).exists()
        summary = json.loads((fitted / "fit.json").read_text())
        assert summary["n_draws"] == 40
        assert summary["max_occupied"] < summary["L"]
        assert summary["slice_violations"] == 0
        assert set(summary["acceptance"]) == {"mu_x", "delta_x"}
        assert len(load_draws((fitted / "draws.txt").read_text())) == 40

    def test_rerun_is_byte_identical(self, tmp_path, series_file, fitted):
        assert main(["fit", series_file, "--out-dir", str(tmp_path), "--seed", "4", *SHORT]) == 0
        for name in ("config.json", "draws.txt", "trace.txt", "fit.json"):
            assert read(tmp_path / name) == read(fitted / name), name

    def test_resume_continues_bit_exactly(self, tmp_path, series_file, fitted):
        out = str(tmp_path)
        args = ["fit", series_file, "--out-dir", out, "--seed", "4", *SHORT]
        args[args.index("240")] = "120"
        assert main(args + ["--checkpoint-every", "60"]) == 0
        assert main(["fit", series_file, "--resume", os.path.join(out, "checkpoint.json"),
                     "--iterations", "240", "--out-dir", out]) == 0
        assert read(tmp_path / "draws.txt") == read(fitted / "draws.txt")

    def test_tar_model_writes_tar_columns(self, tmp_path, series_file):
        assert main(["fit", series_file, "--model", "tar", "--out-dir", str(tmp_path),
                     "--iterations", "200", "--burn-in", "50", "--thin", "5"]) == 0
        header = [ln for ln in (tmp_path / "draws.txt").read_text().splitlines()
                  if not ln.startswith("#")][0].split()
        assert header[-7:] == TarParams.names()

    def test_stationary_model(self, tmp_path, series_file):
        assert main(["fit", series_file, "--model", "stationary", "--out-dir", str(tmp_path),
                     *SHORT]) == 0
        assert load_draws((tmp_path / "draws.txt").read_text()).model == "stationary"

    def test_config_file_and_paper_defaults(self, tmp_path, series_file):
        assert main(["fit", series_file, "--paper-defaults", "brownian", "--write-config-only",
                     "--out-dir", str(tmp_path)]) == 0
        cfg = json.loads((tmp_path / "config.json").read_text())
        assert (cfg["L"], cfg["n_iterations"], cfg["burn_in"], cfg["thin"]) == (30, 120000,
                                                                                 20000, 20)
        assert (cfg["n_iterations"] - cfg["burn_in"]) // cfg["thin"] == 5000

    def test_unknown_config_key(self, tmp_path, series_file):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"L": 5, "mystery": 1}))
        assert main(["fit", series_file, "--config", str(bad), "--out-dir", str(tmp_path)]) == 1

    def test_missing_data_and_bad_settings(self, tmp_path, series_file):
        assert main(["fit", str(tmp_path / "nope.txt"), "--out-dir", str(tmp_path)]) == 1
        assert main(["fit", series_file, "--iterations", "10", "--burn-in", "20",
                     "--out-dir", str(tmp_path)]) == 1

    def test_malformed_series_names_the_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1.0\n2.0\nabc\n4.0\n")
        assert main(["fit", str(bad), "--out-dir", str(tmp_path)]) == 1
        assert "line 3" in capsys.readouterr().err


class TestPredict:
    def test_transition_files(self, tmp_path, fitted):
        assert main(["predict", str(fitted / "draws.txt"), "--transition-at", "0,1.5",
                     "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "transition_0.txt").exists()
        assert (tmp_path / "transition_1.5.txt").exists()

    def test_forecast_expectation_and_horizon(self, tmp_path, fitted):
        assert main(["predict", str(fitted / "draws.txt"), "--forecast", "--expectation",
                     "--horizon", "2", "--paths", "3", "--grid-n", "101",
                     "--out-dir", str(tmp_path)]) == 0
        for name in ("forecast.txt", "expectation.txt", "multistep_h1.txt", "multistep_h2.txt",
                     "multistep_paths.txt"):
            assert (tmp_path / name).exists()

    def test_empty_request_is_a_no_op(self, tmp_path, fitted, capsys):
        assert main(["predict", str(fitted / "draws.txt"), "--out-dir", str(tmp_path)]) == 0
        assert "nothing requested" in capsys.readouterr().out
        assert not any(tmp_path.iterdir())

    def test_rerun_is_byte_identical(self, tmp_path, fitted):
        for sub in ("a", "b"):
            main(["predict", str(fitted / "draws.txt"), "--horizon", "2", "--seed", "3",
                  "--out-dir", str(tmp_path / sub)])
        assert read(tmp_path / "a" / "multistep_paths.txt") == read(
            tmp_path / "b" / "multistep_paths.txt")


class TestPPOAndCompare:
    def test_ppo(self, tmp_path, fitted, series_file):
        assert main(["ppo", str(fitted / "draws.txt"), "--data", series_file, "--last", "20",
                     "--out-dir", str(tmp_path)]) == 0
        rows = [ln for ln in (tmp_path / "ppo.txt").read_text().splitlines()
                if not ln.startswith("#")]
        assert len(rows) == 21  # header plus t = 41..60

    def test_start_beyond_series_is_rejected(self, tmp_path, fitted, series_file):
        assert main(["ppo", str(fitted / "draws.txt"), "--data", series_file, "--t-start", "61",
                     "--out-dir", str(tmp_path)]) == 1

    def test_other_series_is_rejected(self, tmp_path, fitted):
        other = tmp_path / "other.txt"
        other.write_text(format_series(np.arange(60.0)))
        assert main(["ppo", str(fitted / "draws.txt"), "--data", str(other),
                     "--out-dir", str(tmp_path)]) == 1

    def test_single_model_has_no_ranking(self, tmp_path, fitted, series_file):
        assert main(["compare", str(fitted / "draws.txt"), "--data", series_file, "--last", "20",
                     "--out-dir", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "compare.json").read_text())
        assert "ranking" not in report
        assert "no ranking" in (tmp_path / "compare.txt").read_text()

    def test_ranking_orders_by_log_sum(self, tmp_path, fitted, series_file):
        tar_dir = tmp_path / "tar"
        main(["fit", series_file, "--model", "tar", "--out-dir", str(tar_dir), "--iterations",
              "200", "--burn-in", "50", "--thin", "5"])
        assert main(["compare", str(fitted / "draws.txt"), str(tar_dir / "draws.txt"), "--data",
                     series_file, "--last", "20", "--out-dir", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "compare.json").read_text())
        sums = {r["label"]: r["log_sum"] for r in report["models"]}
        assert report["ranking"] == sorted(sums, key=lambda k: -sums[k])


def test_bad_arguments_exit_with_validation_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "nonsense"])
    assert exc.value.code == 1
