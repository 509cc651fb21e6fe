"""CLI contract: subcommands, exit codes, config handling, determinism."""

import numpy as np
import pytest

from tracerflow import cli
from tracerflow import ensemble as en
from tracerflow.config import build_experiment, merge_config, parse_config_file
from tracerflow.errors import ConfigError
from tracerflow.presets import PRESETS, get_preset


BASE_FLAGS = ["--scheme", "sp", "--spectrum", "e1", "--dt", "0.1",
              "--tmax", "5", "--particles", "16", "--modes", "8", "--seed", "5"]


class TestConfigFile:
    def test_parse_and_build(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "# comment\n"
            "scheme = sp\n"
            "spectrum = e2\n"
            "dt = 0.1\n"
            "tmax = 5.0   # trailing comment\n"
            "particles = 32\n"
            "modes = 16\n"
            "seed = 9\n")
        values = parse_config_file(cfg_file)
        cfg = build_experiment(values)
        assert cfg.spectrum.tag == "e2"
        assert cfg.n_particles == 32

    def test_unknown_key(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("dt = 0.1\nnparticles = 2\n")
        with pytest.raises(ConfigError) as err:
            parse_config_file(cfg_file)
        assert "nparticles" in str(err.value)

    def test_missing_required_field_named(self):
        values = {"scheme": "sp", "spectrum": "e1", "tmax": 5.0,
                  "particles": 16, "modes": 8}
        with pytest.raises(ConfigError) as err:
            build_experiment(values)
        assert "'dt'" in str(err.value)

    def test_flags_override_file(self):
        merged = merge_config({"dt": "0.1", "particles": "32"},
                              {"particles": 64})
        assert merged["particles"] == 64
        assert merged["dt"] == "0.1"


class TestExitCodes:
    def test_missing_dt_exit_2(self, capsys):
        argv = ["run", "--scheme", "sp", "--spectrum", "e1",
                "--tmax", "5", "--particles", "16", "--modes", "8"]
        assert cli.main(argv) == cli.EXIT_CONFIG_ERROR
        assert "dt" in capsys.readouterr().err

    def test_unknown_preset_exit_2(self, capsys):
        assert cli.main(["run", "--preset", "fig99"]) == cli.EXIT_CONFIG_ERROR

    def test_unknown_flag_exit_2(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["run", "--frobnicate"])
        assert err.value.code == 2

    def test_solver_divergence_exit_1(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        argv = ["run"] + BASE_FLAGS + ["--dt", "10", "--tmax", "100",
                                       "--fp-max-iters", "20", "--out", "x.csv"]
        assert cli.main(argv) == cli.EXIT_RUN_FAILURE
        assert "run failure" in capsys.readouterr().err

    def test_ok_run_exit_0(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["run"] + BASE_FLAGS + ["--out", "ok.csv"]) == cli.EXIT_OK
        assert (tmp_path / "ok.csv").exists()


class TestClassify:
    def test_diffusive(self, capsys):
        assert cli.main(["classify", "e1"]) == 0
        assert "diffusive" in capsys.readouterr().out

    def test_anomalous_3d(self, capsys):
        assert cli.main(["classify", "e7"]) == 0
        assert "anomalous" in capsys.readouterr().out

    def test_powerlaw_reports_exponent(self, capsys):
        assert cli.main(["classify", "powerlaw2d", "--alpha", "0.75"]) == 0
        out = capsys.readouterr().out
        assert "anomalous" in out
        assert "1.6" in out

    def test_alpha_missing_exit_2(self, capsys):
        assert cli.main(["classify", "powerlaw2d"]) == cli.EXIT_CONFIG_ERROR


class TestRun:
    def test_preset_listing(self, capsys):
        assert cli.main(["run", "--list-presets"]) == 0
        out = capsys.readouterr().out
        for name in PRESETS:
            assert name in out

    def test_preset_with_overrides(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        argv = ["run", "--preset", "fig1-sp-dt0.1", "--particles", "24",
                "--tmax", "20", "--modes", "8", "--out", "quick.csv"]
        assert cli.main(argv) == 0
        text = (tmp_path / "quick.csv").read_text()
        assert "# preset = fig1-sp-dt0.1" in text
        assert "# particles = 24" in text

    def test_multi_run_preset_writes_suffixed_files(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        argv = ["run", "--preset", "fig8-alpha0.5", "--particles", "16",
                "--tmax", "10", "--modes", "8", "--out", "pl.csv"]
        assert cli.main(argv) == 0
        assert (tmp_path / "pl-sp.csv").exists()
        assert (tmp_path / "pl-em.csv").exists()

    def test_preset_pure_function_of_name(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        argv = ["run", "--preset", "brownian-smoke", "--particles", "64",
                "--tmax", "10"]
        assert cli.main(argv + ["--out", "a.csv"]) == 0
        assert cli.main(argv + ["--out", "b.csv"]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_worker_count_invariance(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        argv = ["run", "--preset", "fig4-sp-d0-0.1", "--particles", "48",
                "--tmax", "12", "--modes", "12"]
        assert cli.main(argv + ["--workers", "1", "--out", "w1.csv"]) == 0
        assert cli.main(argv + ["--workers", "2", "--out", "w2.csv"]) == 0
        assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w2.csv").read_bytes()


class TestFit:
    def test_fit_matches_run_summary(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        argv = ["run", "--preset", "brownian-smoke", "--particles", "256",
                "--out", "s.csv"]
        assert cli.main(argv) == 0
        run_out = capsys.readouterr().out
        run_record = [l for l in run_out.splitlines() if l.startswith("FITCSV")][-1]
        assert cli.main(["fit", "s.csv"]) == 0
        fit_out = capsys.readouterr().out
        fit_record = [l for l in fit_out.splitlines() if l.startswith("FITCSV")][-1]
        assert fit_record == run_record

    def test_fit_window_flags(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        cli.main(["run", "--preset", "brownian-smoke", "--particles", "64",
                  "--out", "s.csv"])
        capsys.readouterr()
        assert cli.main(["fit", "s.csv", "--window-lo", "10",
                         "--window-hi", "50"]) == 0
        assert "[10, 50]" in capsys.readouterr().out

    def test_missing_file_exit_2(self, capsys):
        assert cli.main(["fit", "/does/not/exist.csv"]) == cli.EXIT_CONFIG_ERROR


class TestHelp:
    def test_run_help_lists_every_flag(self, capsys):
        with pytest.raises(SystemExit) as err:
            cli.main(["run", "--help"])
        assert err.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--scheme", "--spectrum", "--alpha", "--theta0", "--d0",
                     "--dt", "--tmax", "--particles", "--modes", "--seed",
                     "--field-mode", "--track-stream", "--out", "--preset",
                     "--fp-tol", "--fp-max-iters", "--workers"):
            assert flag in out, f"{flag} missing from run --help"

    def test_console_script(self):
        import subprocess, sys
        res = subprocess.run([sys.executable, "-m", "tracerflow.cli",
                              "classify", "e2"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "diffusive" in res.stdout


class TestPresetTable:
    def test_known_presets_resolve(self):
        for name, preset in PRESETS.items():
            for label, values in preset.runs:
                cfg = build_experiment(dict(values))
                assert cfg.n_particles >= 2, name

    def test_get_preset_unknown(self):
        with pytest.raises(ConfigError):
            get_preset("nope")

    def test_spec_documented_presets_exist(self):
        assert "fig1-sp-dt0.1" in PRESETS
        assert "fig8-alpha0.5" in PRESETS
