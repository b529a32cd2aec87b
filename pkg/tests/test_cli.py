"""Command-line contracts: config validation, outputs, manifests, exit codes,
and byte-level determinism across worker counts."""

import json
import os

import pytest

from ordlab.cli import main


def run(args):
    return main(args)


def read_bytes_except_manifest(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        if name == "manifest.json":
            continue
        with open(os.path.join(directory, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestConfigValidation:
    def test_missing_seed_is_config_error(self, capsys):
        assert run(["table", "--preset", "normal"]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["kind"] == "config"

    def test_missing_preset(self, capsys):
        assert run(["table", "--seed", "1"]) == 2

    def test_bad_config_file(self, tmp_path, capsys):
        bad = tmp_path / "cfg.json"
        bad.write_text("{not json")
        assert run(["table", "--preset", "normal", "--seed", "1",
                    "--config", str(bad)]) == 2

    def test_numerical_failures_exit_three(self, tmp_path, capsys):
        # reproduce rejects illustrative presets as figures
        code = run(["reproduce", "--figure", "illustrative_binary", "--seed", "1",
                    "-o", str(tmp_path)])
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["kind"] == "numerical"
        assert err["error"]["operation"] == "reproduce"


class TestOutputsAndManifest:
    def test_weights_json_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "w"
        assert run(["weights", "--preset", "normal", "--delta", "1.0",
                    "--categories", "11", "--seed", "4", "-o", str(out)]) == 0
        result = json.loads((out / "weights.json").read_text())
        assert result["w_x"] > 0 and result["ratio"] > 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "weights"
        assert manifest["seed"] == 4
        assert "numpy" in manifest["versions"]
        assert manifest["outputs"] == ["weights.json"]

    def test_simulate_csv_headers(self, tmp_path):
        out = tmp_path / "s"
        assert run(["simulate", "--preset", "uniform", "--n", "200", "--seed", "2",
                    "-o", str(out)]) == 0
        header = (out / "dataset.csv").read_text().splitlines()[0]
        assert header == "R,x1"
        out2 = tmp_path / "s2"
        assert run(["simulate", "--preset", "uniform", "--n", "200", "--seed", "2",
                    "--with-latent", "-o", str(out2)]) == 0
        header2 = (out2 / "dataset.csv").read_text().splitlines()[0]
        assert header2 == "R,x1,H,U,profile"

    def test_table_csv_schema(self, tmp_path):
        out = tmp_path / "t"
        assert run(["table", "--preset", "normal", "--seed", "3",
                    "--delta-grid", "1.0", "5.0", "--categories-grid", "2", "11",
                    "-o", str(out)]) == 0
        lines = (out / "normal_ratio.csv").read_text().splitlines()
        assert lines[0] == "delta,rbar,ratio,w_xxp,w_x,w_xp,nb"
        assert len(lines) == 5

    def test_config_file_drives_run(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"preset": "uniform", "seed": 9, "n": 150}))
        out = tmp_path / "c"
        assert run(["simulate", "--config", str(cfg), "-o", str(out)]) == 0
        assert (out / "dataset.csv").exists()

    def test_diagnose_json(self, tmp_path):
        out = tmp_path / "d"
        assert run(["diagnose", "--preset", "lognormal", "--delta", "0.5",
                    "--categories", "11", "--seed", "5", "-o", str(out)]) == 0
        result = json.loads((out / "diagnose.json").read_text())
        assert result["quantile_expansion"]["gap"] < 1e-6
        assert result["dominance_analytic"]["fosd_holds"]


class TestDeterminism:
    @pytest.mark.parametrize(
        "args",
        [
            ["weights", "--preset", "normal", "--delta", "0.5", "--categories", "11"],
            ["table", "--preset", "uniform", "--delta-grid", "-0.5", "1.0",
             "--categories-grid", "2", "5"],
            ["simulate", "--preset", "lognormal", "--n", "300", "--with-latent"],
            ["diagnose", "--preset", "normal", "--delta", "0.5", "--categories", "5",
             "--n", "2000"],
            ["reproduce", "--figure", "uniform", "--delta-grid", "0.5", "5.0",
             "--categories-grid", "2", "11"],
        ],
        ids=["weights", "table", "simulate", "diagnose", "reproduce"],
    )
    def test_jobs_do_not_change_bytes(self, tmp_path, args):
        d1, d8 = tmp_path / "j1", tmp_path / "j8"
        assert run(args + ["--seed", "11", "--jobs", "1", "-o", str(d1)]) == 0
        assert run(args + ["--seed", "11", "--jobs", "8", "-o", str(d8)]) == 0
        assert read_bytes_except_manifest(d1) == read_bytes_except_manifest(d8)

    def test_estimate_jobs_invariant(self, tmp_path):
        d1, d8 = tmp_path / "e1", tmp_path / "e8"
        args = ["estimate", "--preset", "illustrative_binary", "--rho", "0.0",
                "--n", "2000", "--bootstrap", "16"]
        assert run(args + ["--seed", "6", "--jobs", "1", "-o", str(d1)]) == 0
        assert run(args + ["--seed", "6", "--jobs", "8", "-o", str(d8)]) == 0
        assert read_bytes_except_manifest(d1) == read_bytes_except_manifest(d8)

    def test_env_var_sets_default_jobs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ORDLAB_JOBS", "3")
        out = tmp_path / "env"
        assert run(["weights", "--preset", "normal", "--seed", "1", "-o", str(out)]) == 0


class TestEstimateCommand:
    def test_three_columns_present(self, tmp_path):
        out = tmp_path / "est"
        assert run(["estimate", "--preset", "illustrative_binary", "--rho", "1.0",
                    "--n", "2000", "--seed", "1", "-o", str(out)]) == 0
        result = json.loads((out / "estimate.json").read_text())
        for column in ("ols_log", "nonparametric", "ols_income", "ols_infeasible_h"):
            assert column in result
        assert result["ols_log"]["ratio"]["value"] > 0  # spurious positive link
        assert result["ols_infeasible_h"]["coefficients"]["ln_x1"] < 0

    def test_eleven_point_scale_variant(self, tmp_path):
        out = tmp_path / "est11"
        assert run(["estimate", "--preset", "illustrative_11", "--rho", "0.0",
                    "--n", "2000", "--seed", "1", "-o", str(out)]) == 0
        result = json.loads((out / "estimate.json").read_text())
        # the x2 effect on an 11-point scale is several category steps
        assert result["ols_log"]["coefficients"]["x2"] > 0.5

    def test_scale_preset_rejected(self, tmp_path, capsys):
        assert run(["estimate", "--preset", "normal", "--n", "2000",
                    "--seed", "1", "-o", str(tmp_path)]) == 2
