"""Command-line interface: file outputs, determinism, exit codes."""

import json

from evsikit.cli import main
from evsikit.oracles import closed_form_normal_evsi
from evsikit.casemodels import ConjugateToy


def _read(path):
    return path.read_bytes()


class TestPsaCommand:
    def test_ades_csv_schema(self, tmp_path):
        out = tmp_path / "run"
        code = main(["psa", "--model", "ades", "--S", "1000", "--seed", "7",
                     "--out", str(out)])
        assert code == 0
        lines = (out / "psa.csv").read_text().splitlines()
        assert lines[0] == "Pc,Pse,log_or,logit_qe,NB1,NB2,INB"
        assert len(lines) == 1001
        summary = json.loads((out / "summary.json").read_text())
        assert summary["evpi"] >= 0.0

    def test_same_seed_identical_files(self, tmp_path):
        args = ["psa", "--model", "beta_binomial", "--S", "10", "--seed", "5"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert _read(a / "psa.csv") == _read(b / "psa.csv")
        assert _read(a / "summary.json") == _read(b / "summary.json")

    def test_unknown_model_lists_registry(self, tmp_path, capsys):
        code = main(["psa", "--model", "nosuch", "--out", str(tmp_path / "x")])
        assert code == 2
        err = capsys.readouterr().err
        assert "ades" in err and "beta_binomial" in err


class TestEvsiCommand:
    def test_ades_study1_outputs(self, tmp_path):
        out = tmp_path / "run"
        code = main(["evsi", "--model", "ades", "--design", "study1",
                     "--S", "20000", "--Q", "10", "--M", "2000",
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        result = json.loads((out / "result.json").read_text())
        assert result["evsi"] >= 0.0
        assert 0.0 <= result["a"] <= 1.0
        per_point = (out / "per_point.csv").read_text().splitlines()
        assert per_point[0] == "q,Pse,dataset,posterior_variance,acceptance_rate"
        assert len(per_point) == 11
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "evsi"

    def test_normal_normal_matches_closed_form(self, tmp_path):
        out = tmp_path / "run"
        code = main(["evsi", "--model", "normal_normal", "--N", "9",
                     "--param", "k=10000", "--S", "50000", "--Q", "10",
                     "--M", "5000", "--seed", "2", "--out", str(out)])
        assert code == 0
        result = json.loads((out / "result.json").read_text())
        oracle = closed_form_normal_evsi(ConjugateToy("normal_normal", 9)).evsi
        tol = max(0.01 * oracle, 3 * result["evsi_se"])
        assert abs(result["evsi"] - oracle) <= tol

    def test_zero_q_is_config_error(self, tmp_path):
        code = main(["evsi", "--model", "ades", "--design", "study1",
                     "--Q", "0", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_manifest_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["evsi", "--model", "normal_normal", "--S", "5000",
                     "--Q", "5", "--M", "1000", "--burn-in", "0",
                     "--seed", "3", "--out", str(a)]) == 0
        assert main(["evsi", "--from-manifest", str(a / "manifest.json"),
                     "--out", str(b)]) == 0
        assert _read(a / "result.json") == _read(b / "result.json")
        assert _read(a / "per_point.csv") == _read(b / "per_point.csv")


class TestEvppiCommand:
    def test_two_param_fit_diagnostics(self, tmp_path):
        out = tmp_path / "run"
        code = main(["evppi", "--model", "two_param_linear", "--S", "5000",
                     "--seed", "4", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "evppi.json").read_text())
        assert payload["evppi"] <= payload["evpi"] + 1e-9
        assert payload["fit"]["r_squared"] >= 0.0


class TestNestedCommand:
    def test_runs_and_reports(self, tmp_path):
        out = tmp_path / "run"
        code = main(["nested", "--model", "beta_binomial", "--N", "10",
                     "--n-outer", "2000", "--seed", "5", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "nested.json").read_text())
        assert payload["method"] == "nested_mc"
        assert payload["standard_error"] > 0.0
        assert (out / "timings.json").exists()

    def test_exhausted_budget_is_computation_error(self, tmp_path, capsys):
        code = main(["nested", "--model", "beta_binomial", "--N", "10",
                     "--n-outer", "200000", "--budget-seconds", "0",
                     "--seed", "5", "--out", str(tmp_path / "x")])
        assert code == 3
        assert "budget exceeded" in capsys.readouterr().err


class TestBenchmarkCommand:
    def test_unknown_experiment_lists_options(self, tmp_path, capsys):
        code = main(["benchmark", "nosuch", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "table1" in capsys.readouterr().err

    def test_missing_experiment_is_config_error(self, tmp_path, capsys):
        code = main(["benchmark", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "variance_convergence" in capsys.readouterr().err

    def test_variance_convergence_rerun_identical(self, tmp_path):
        args = ["benchmark", "variance_convergence", "--replicates", "3",
                "--Q-values", "1,5", "--S", "2000", "--M", "1000", "--seed", "6"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        name = "variance_convergence_long.csv"
        assert _read(a / name) == _read(b / name)
        lines = (a / name).read_text().splitlines()
        assert lines[0] == "experiment,parameter,replicate,estimate,oracle,se"
        assert len(lines) == 1 + 3 * 2

    def test_crosscheck_single_study_smoke(self, tmp_path):
        out = tmp_path / "run"
        code = main(["benchmark", "ades_crosscheck", "--studies", "study1",
                     "--S", "4000", "--Q", "5", "--M", "2000",
                     "--n-outer", "500", "--seed", "8", "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "ades_crosscheck_summary.json").read_text())
        assert summary[0]["study"] == "study1"
        assert summary[0]["nested_mc_se"] > 0.0

    def test_table1_column_set(self, tmp_path):
        out = tmp_path / "run"
        code = main(["benchmark", "table1", "--replicates", "2",
                     "--Q-values", "1,3", "--S", "2000", "--M", "1000",
                     "--oracle-n-outer", "2000", "--seed", "7", "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "table1_summary.json").read_text())
        assert [row["Q"] for row in summary] == [1, 3]
        assert all("bias" in row for row in summary)


class TestSelftest:
    def test_oracle_disagreement_exits_4(self, tmp_path, monkeypatch):
        import evsikit.cli as cli
        from evsikit.oracles import OracleResult

        def wrong_oracle(toy):
            return OracleResult(method="analytic_enumeration", evsi=999999.0,
                                standard_error=0.0)

        monkeypatch.setattr(cli, "enumeration_evsi", wrong_oracle)
        code = main(["selftest", "--seed", "0", "--out", str(tmp_path / "st")])
        assert code == 4


class TestConfigHandling:
    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": "beta_binomial", "S": 500}))
        out = tmp_path / "run"
        code = main(["psa", "--config", str(cfg), "--S", "700", "--seed", "8",
                     "--out", str(out)])
        assert code == 0
        assert len((out / "psa.csv").read_text().splitlines()) == 701

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": "beta_binomial", "banana": 1}))
        code = main(["psa", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "banana" in capsys.readouterr().err

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EVSIKIT_OUTPUT_DIR", str(tmp_path / "envout"))
        code = main(["psa", "--model", "beta_binomial", "--S", "10", "--seed", "1"])
        assert code == 0
        assert (tmp_path / "envout" / "psa.csv").exists()

    def test_worker_count_does_not_change_outputs(self, tmp_path):
        base = ["psa", "--model", "ades", "--S", "70000", "--seed", "9"]
        a, b = tmp_path / "w1", tmp_path / "w4"
        assert main(base + ["--workers", "1", "--out", str(a)]) == 0
        assert main(base + ["--workers", "4", "--out", str(b)]) == 0
        assert _read(a / "psa.csv") == _read(b / "psa.csv")
