"""Tests for the command-line interface: exit codes, files, precedence."""

import json
import os

import numpy as np
import pytest

from vfmlab.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from vfmlab.models import load_checkpoint


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def d1_file(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("data")
    assert run("gen-data", "--set", "d1", "--n", "2500", "--sigma", "2",
               "--seed", "7", "--outdir", str(outdir)) == EXIT_OK
    return str(outdir / "d1_n2500_sigma2_seed7.csv")


class TestGenData:
    def test_writes_named_file_and_reports_splits(self, d1_file, capsys):
        assert os.path.exists(d1_file)
        assert run("gen-data", "--set", "d1", "--n", "2500", "--sigma", "2",
                   "--seed", "7", "--outdir", os.path.dirname(d1_file)) \
            == EXIT_OK
        out = capsys.readouterr().out
        assert "generator=d1" in out
        assert "train/val/test=400/100/2000" in out

    def test_rerun_is_byte_identical(self, d1_file, tmp_path):
        assert run("gen-data", "--set", "d1", "--n", "2500", "--sigma", "2",
                   "--seed", "7", "--outdir", str(tmp_path)) == EXIT_OK
        again = tmp_path / "d1_n2500_sigma2_seed7.csv"
        assert again.read_bytes() == open(d1_file, "rb").read()

    def test_unknown_generator_is_usage_error(self, tmp_path):
        assert run("gen-data", "--set", "d9",
                   "--outdir", str(tmp_path)) == EXIT_USAGE

    def test_drift_sets_reject_noise(self, tmp_path):
        assert run("gen-data", "--set", "d2", "--n", "2700", "--sigma", "1",
                   "--outdir", str(tmp_path)) == EXIT_USAGE

    def test_bad_row_count_is_usage_error(self, tmp_path):
        assert run("gen-data", "--set", "d1", "--n", "0",
                   "--outdir", str(tmp_path)) == EXIT_USAGE

    def test_drift_set_written(self, tmp_path, capsys):
        assert run("gen-data", "--set", "d3", "--n", "2700",
                   "--outdir", str(tmp_path)) == EXIT_OK
        assert "generator=d3" in capsys.readouterr().out
        assert (tmp_path / "d3_n2700_sigma0_seed0.csv").exists()


class TestTrain:
    def test_writes_checkpoint_and_losses(self, d1_file, tmp_path, capsys):
        assert run("train", "--data", d1_file, "--model", "mech_oracle",
                   "--epochs", "20", "--outdir", str(tmp_path)) == EXIT_OK
        out = capsys.readouterr().out
        assert "validation MAE" in out
        ckpt = tmp_path / "d1_n2500_sigma2_seed7_mech_oracle.ckpt.json"
        losses = tmp_path / "d1_n2500_sigma2_seed7_mech_oracle_losses.csv"
        assert ckpt.exists() and losses.exists()
        model = load_checkpoint(ckpt)
        assert model.kind.value == "mech_oracle"
        lines = losses.read_text().splitlines()
        assert lines[1] == "epoch,train_objective,val_mse"
        assert len(lines) == 2 + 20

    def test_identical_invocations_match_bytes(self, d1_file, tmp_path):
        for sub in ("a", "b"):
            assert run("train", "--data", d1_file, "--model", "mech_plain",
                       "--epochs", "5", "--outdir",
                       str(tmp_path / sub)) == EXIT_OK
        name = "d1_n2500_sigma2_seed7_mech_plain.ckpt.json"
        assert (tmp_path / "a" / name).read_bytes() \
            == (tmp_path / "b" / name).read_bytes()

    def test_subset_limits_training_rows(self, d1_file, tmp_path, capsys):
        assert run("train", "--data", d1_file, "--model", "mech_oracle",
                   "--epochs", "5", "--subset", "50",
                   "--outdir", str(tmp_path)) == EXIT_OK
        capsys.readouterr()
        assert run("train", "--data", d1_file, "--model", "mech_oracle",
                   "--subset", "5000", "--outdir", str(tmp_path)) == EXIT_USAGE

    def test_unsplit_dataset_is_usage_error(self, tmp_path, capsys):
        assert run("gen-data", "--set", "d1", "--n", "1500",
                   "--outdir", str(tmp_path)) == EXIT_OK
        capsys.readouterr()
        path = str(tmp_path / "d1_n1500_sigma0_seed0.csv")
        assert run("train", "--data", path, "--model", "mech_plain",
                   "--outdir", str(tmp_path)) == EXIT_USAGE
        assert "training split" in capsys.readouterr().err

    def test_missing_file_is_usage_error(self, tmp_path):
        assert run("train", "--data", str(tmp_path / "none.csv"),
                   "--model", "mech_plain") == EXIT_USAGE

    def test_unknown_model_is_usage_error(self, d1_file):
        assert run("train", "--data", d1_file, "--model", "psychic") \
            == EXIT_USAGE

    def test_divergence_exits_runtime_and_keeps_losses(self, d1_file,
                                                       tmp_path, capsys):
        with np.errstate(all="ignore"):
            code = run("train", "--data", d1_file, "--model", "data_driven",
                       "--epochs", "5", "--lr-net", "1e150",
                       "--outdir", str(tmp_path))
        assert code == EXIT_RUNTIME
        assert "diverged" in capsys.readouterr().err
        assert (tmp_path / "d1_n2500_sigma2_seed7_data_driven_losses.csv"
                ).exists()
        assert not (tmp_path / "d1_n2500_sigma2_seed7_data_driven.ckpt.json"
                    ).exists()


def _write_config(path, **entries):
    cfg = {
        "experiment": "exp1",
        "trials": 2,
        "models": ["mech_oracle", "mech_plain"],
        "data": {"d1_n": 2500},
        "n_grid": [8, 20],
        "train": {"max_epochs": 3, "patience": None},
        "train_overrides": {},
    }
    cfg.update(entries)
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    return str(path)


class TestRunExp:
    def test_runs_and_writes_result_files(self, tmp_path, capsys):
        cfg = _write_config(tmp_path / "e.cfg", outdir=str(tmp_path / "out"))
        assert run("run-exp", "--config", cfg) == EXIT_OK
        out = capsys.readouterr().out
        assert "0 diverged" in out
        for name in ("exp1_tidy.csv", "exp1_quantiles.csv"):
            assert (tmp_path / "out" / name).exists()

    def test_trials_flag_overrides_config(self, tmp_path):
        cfg = _write_config(tmp_path / "e.cfg", outdir=str(tmp_path / "out"))
        assert run("run-exp", "--config", cfg, "--trials", "1") == EXIT_OK
        tidy = (tmp_path / "out" / "exp1_tidy.csv").read_text()
        rows = [l for l in tidy.splitlines()[2:]]
        trials = {int(r.split(",")[3]) for r in rows}
        assert trials == {0}

    def test_drift_experiment_prints_table(self, tmp_path, capsys):
        cfg = _write_config(
            tmp_path / "e.cfg", experiment="exp4", trials=1,
            models=["mech_oracle", "mech_plain"], data={"drift_n": 2700},
            outdir=str(tmp_path / "out"))
        assert run("run-exp", "--config", cfg) == EXIT_OK
        out = capsys.readouterr().out
        assert "mae_test" in out
        assert (tmp_path / "out" / "exp4_table.csv").exists()
        assert (tmp_path / "out" / "exp4_series.csv").exists()

    def test_missing_config_is_usage_error(self, tmp_path):
        assert run("run-exp", "--config", str(tmp_path / "no.cfg")) \
            == EXIT_USAGE

    def test_invalid_json_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("not json {")
        assert run("run-exp", "--config", str(bad)) == EXIT_USAGE

    def test_unknown_key_is_usage_error(self, tmp_path, capsys):
        cfg = _write_config(tmp_path / "e.cfg", epochs=12)
        assert run("run-exp", "--config", cfg) == EXIT_USAGE
        assert "unknown config keys" in capsys.readouterr().err

    def test_unknown_experiment_is_usage_error(self, tmp_path):
        cfg = _write_config(tmp_path / "e.cfg", experiment="exp9")
        assert run("run-exp", "--config", cfg) == EXIT_USAGE

    def test_unknown_model_is_usage_error(self, tmp_path):
        cfg = _write_config(tmp_path / "e.cfg", models=["psychic"])
        assert run("run-exp", "--config", cfg) == EXIT_USAGE

    def test_bad_train_field_is_usage_error(self, tmp_path):
        cfg = _write_config(tmp_path / "e.cfg", train={"epochz": 3})
        assert run("run-exp", "--config", cfg) == EXIT_USAGE


@pytest.fixture(scope="module")
def report_outdir(tmp_path_factory):
    base = tmp_path_factory.mktemp("rep")
    cfg = _write_config(base / "e.cfg", experiment="exp2", trials=2,
                        models=["mech_oracle", "mech_plain"],
                        noise_grid=[1.0, 3.0], outdir=str(base / "out"))
    entries = json.load(open(cfg))
    del entries["n_grid"]
    json.dump(entries, open(cfg, "w"))
    assert run("run-exp", "--config", cfg) == EXIT_OK
    return base / "out"


class TestReport:
    def test_reaggregation_matches_original_bytes(self, report_outdir,
                                                  tmp_path):
        assert run("report", "--tidy", str(report_outdir / "exp2_tidy.csv"),
                   "--outdir", str(tmp_path)) == EXIT_OK
        original = (report_outdir / "exp2_quantiles.csv").read_bytes()
        rebuilt = (tmp_path / "exp2_quantiles.csv").read_bytes()
        assert rebuilt == original

    def test_missing_tidy_is_usage_error(self, tmp_path):
        assert run("report", "--tidy", str(tmp_path / "no.csv")) == EXIT_USAGE

    def test_non_tidy_file_is_usage_error(self, tmp_path):
        junk = tmp_path / "junk.csv"
        junk.write_text("a,b,c\n1,2,3\n")
        assert run("report", "--tidy", str(junk)) == EXIT_USAGE


class TestEntryPoint:
    def test_no_arguments_prints_help(self, capsys):
        assert run() == EXIT_USAGE
        assert "gen-data" in capsys.readouterr().out

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("--version")
        assert exc.value.code == 0
        assert "vfmlab" in capsys.readouterr().out
