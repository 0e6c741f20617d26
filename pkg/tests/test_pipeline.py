"""
End-to-end tests for the pipeline and the command line.
"""

import json

import pytest

from src.cli import build_parser, main
from src.core.config import load_run_config
from src.report.pipeline import MANIFEST_NAME, STAGES, run_pipeline
from src.synth.generator import SynthConfig, generate_city, write_bundle

CORE_ARTIFACTS = {"panel.csv", "cohorts.csv", "anova.json", "evaluation.json", "importance.csv",
                  "ablation.csv", "scatter.csv"}


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    """An 80-ward synthetic city written once for the module."""
    directory = tmp_path_factory.mktemp("city")
    cfg = SynthConfig(grid_rows=8, grid_cols=10, borough_side=2, venues_mean=10.0,
                      transitions_per_year=4000, sigma=2.0, seed=3)
    write_bundle(generate_city(cfg), directory)
    return directory


def _run_config(bundle_dir, output_dir, **overrides):
    values = {'output_dir': str(output_dir), 'folds': 3, 'subset_thresholds': "0,5"}
    values.update(overrides)
    return load_run_config(bundle_dir / "run.cfg", values)


def _manifest(directory):
    return json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))


class TestPipeline:
    """Test stage orchestration and the manifest."""

    def test_full_run(self, bundle_dir, tmp_path):
        """Test that a full run completes every stage and writes the core artifacts."""
        exit_code, manifest = run_pipeline(_run_config(bundle_dir, tmp_path / "out"))
        assert exit_code == 0
        assert manifest["status"] == "ok"
        assert manifest["stages_completed"] == list(STAGES)
        assert {a["name"] for a in manifest["artifacts"]} == CORE_ARTIFACTS
        assert _manifest(tmp_path / "out") == {'spec_version': "1.0", **manifest}

        evaluation = json.loads((tmp_path / "out" / "evaluation.json").read_text(encoding="utf-8"))
        assert evaluation["folds"] == 3
        assert {row["classifier"] for row in evaluation["rows"]} == {
            "decision_tree", "random_forest", "logistic_regression", "naive_bayes"}
        for row in evaluation["rows"]:
            assert 0.0 <= row["accuracy"] <= 1.0
        importance = (tmp_path / "out" / "importance.csv").read_text(encoding="utf-8").splitlines()
        assert importance[0] == "feature,importance"
        assert len(importance) == 17

    def test_rerun_is_identical(self, bundle_dir, tmp_path):
        """Test that two runs with the same inputs hash to identical artifacts."""
        _, first = run_pipeline(_run_config(bundle_dir, tmp_path / "a"))
        _, second = run_pipeline(_run_config(bundle_dir, tmp_path / "b"))
        assert first["artifacts"] == second["artifacts"]

    def test_until_stage(self, bundle_dir, tmp_path):
        """Test that a run stops after the requested stage."""
        exit_code, manifest = run_pipeline(_run_config(bundle_dir, tmp_path), until="metrics")
        assert exit_code == 0
        assert manifest["stages_completed"] == ["ingest", "graph", "metrics"]
        assert [a["name"] for a in manifest["artifacts"]] == ["panel.csv"]

    def test_extended_reports(self, bundle_dir, tmp_path):
        """Test that extended reports add their artifacts."""
        _, manifest = run_pipeline(_run_config(bundle_dir, tmp_path, extended_reports=True))
        names = {a["name"] for a in manifest["artifacts"]}
        assert CORE_ARTIFACTS < names
        assert {"graph_summary.json", "edges_2011.csv", "group_means.csv", "borough_overview.csv",
                "change_distribution.csv", "change_summary.json"} <= names

    def test_missing_input(self, bundle_dir, tmp_path):
        """Test that a missing input fails the ingest stage with exit 2 and an empty manifest."""
        run_config = _run_config(bundle_dir, tmp_path, imd_path=str(tmp_path / "nowhere" / "imd.csv"))
        exit_code, manifest = run_pipeline(run_config)
        assert exit_code == 2
        assert manifest["status"] == "failed"
        assert manifest["failed_stage"] == "ingest"
        assert "imd" in manifest["error"]
        assert manifest["artifacts"] == []
        assert _manifest(tmp_path)["failed_stage"] == "ingest"

    def test_unknown_stage(self, bundle_dir, tmp_path):
        """Test that an unknown stage name is rejected."""
        with pytest.raises(ValueError):
            run_pipeline(_run_config(bundle_dir, tmp_path), until="publish")


class TestCli:
    """Test the command line."""

    def test_subcommands(self):
        """Test that every stage has a subcommand and synth has its defaults."""
        parser = build_parser()
        for command in [*STAGES, "run-all"]:
            args = parser.parse_args([command, "--config", "run.cfg", "--seed", "4"])
            assert (args.command, args.seed) == (command, 4)
        args = parser.parse_args(["synth", "--out", "city"])
        assert args.rows == 24 and args.transitions == 1_000_000

    def test_synth_then_run_all(self, tmp_path):
        """Test generating a city and running the whole pipeline from the command line."""
        city = tmp_path / "city"
        assert main(["synth", "--out", str(city), "--rows", "8", "--cols", "10", "--transitions", "3000",
                     "--venues-mean", "10", "--sigma", "2", "--seed", "1"]) == 0
        assert (city / "ledger.json").exists()
        out = tmp_path / "out"
        code = main(["run-all", "--config", str(city / "run.cfg"), "--output-dir", str(out),
                     "--folds", "3", "--thresholds", "0", "--classifiers", "naive_bayes,random_forest"])
        assert code == 0
        assert _manifest(out)["status"] == "ok"

    def test_stage_command(self, bundle_dir, tmp_path):
        """Test that a stage subcommand runs the stages up to it."""
        code = main(["cohort", "--config", str(bundle_dir / "run.cfg"), "--output-dir", str(tmp_path)])
        assert code == 0
        assert _manifest(tmp_path)["stages_completed"] == ["ingest", "graph", "metrics", "cohort"]

    def test_config_error(self, tmp_path, capsys):
        """Test that a missing config file exits with 1."""
        assert main(["metrics", "--config", str(tmp_path / "missing.cfg")]) == 1
        assert "config file not found" in capsys.readouterr().err

    def test_invalid_value(self, bundle_dir, tmp_path):
        """Test that an invalid option value exits with 1."""
        assert main(["run-all", "--config", str(bundle_dir / "run.cfg"), "--output-dir", str(tmp_path),
                     "--folds", "1"]) == 1

    def test_data_error(self, bundle_dir, tmp_path):
        """Test that a missing input file exits with 2."""
        code = main(["run-all", "--config", str(bundle_dir / "run.cfg"), "--output-dir", str(tmp_path),
                     "--imd", str(tmp_path / "absent.csv")])
        assert code == 2

    def test_invalid_synth(self, tmp_path):
        """Test that an invalid synthetic city exits with 1."""
        assert main(["synth", "--out", str(tmp_path), "--rows", "0"]) == 1

    def test_bad_log_level(self, tmp_path):
        """Test that an unknown log level exits with 1."""
        assert main(["--log-level", "LOUD", "synth", "--out", str(tmp_path)]) == 1

    def test_unknown_anova_variable(self, bundle_dir, tmp_path, capsys):
        """Test that an unknown ANOVA variable is a configuration error and writes nothing."""
        out = tmp_path / "out"
        code = main(["run-all", "--config", str(bundle_dir / "run.cfg"), "--output-dir", str(out),
                     "--anova-variables", "IC,NOPE", "--folds", "2"])
        assert code == 1
        assert "unknown panel variables" in capsys.readouterr().err
        assert not out.exists()
