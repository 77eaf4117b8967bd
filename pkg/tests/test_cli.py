import json

import pytest

from bias_audit import __version__
from bias_audit.annotations import load_annotations
from bias_audit.runconfig import config_digest
from bias_audit.storage import read_jsonl, sha256_dir, write_jsonl

from .synthcorpus import write_fault_corpus


@pytest.fixture()
def mock_provider_file(tmp_path):
    """Mock provider with retries off, so injected faults fail fast."""
    path = tmp_path / "provider.json"
    path.write_text(json.dumps({"provider_kind": "mock", "max_retries": 0}), encoding="utf-8")
    return path


def read_manifest(run_dir, stage):
    return json.loads((run_dir / "manifests" / f"{stage}.json").read_text("utf-8"))


class TestExitCodes:
    def test_no_command(self, run_cli):
        assert run_cli() == 1

    def test_unknown_command(self, run_cli):
        assert run_cli("frobnicate") == 1

    def test_unknown_flag(self, run_cli):
        assert run_cli("stats", "--no-such-flag") == 1

    def test_missing_required_value(self, run_cli):
        assert run_cli("stats") == 1

    def test_bad_corpus_root(self, run_cli, tmp_path):
        assert run_cli("stats", "--corpus", tmp_path / "absent") == 1

    def test_missing_input_file(self, run_cli, tmp_path):
        assert run_cli("debias", "--assessments", tmp_path / "absent.jsonl",
                       "--out", tmp_path, "--level", "1") == 1

    def test_threshold_out_of_range(self, run_cli, tmp_path):
        assert run_cli("detect", "--corpus", tmp_path, "--provider", "mock",
                       "--failure-threshold", "7", "--out", tmp_path) == 1

    def test_bad_level_value(self, run_cli, tmp_path):
        assert run_cli("debias", "--assessments", "x.jsonl",
                       "--out", tmp_path, "--level", "9") == 1


class TestStats:
    def test_prints_corpus_counts(self, run_cli, synth_root, capsys):
        assert run_cli("stats", "--corpus", synth_root) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["article_count"] == 30
        assert doc["paragraph_count"] == 91
        assert set(doc["per_publisher"]) == {
            "CNN", "DailyBeast", "Fox News", "Newsweek", "The Washington Times"}


class TestIngest:
    def test_outputs_and_manifest(self, run_cli, synth_root, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli("ingest", "--corpus", synth_root, "--out", run_dir) == 0

        articles = list(read_jsonl(run_dir / "corpus" / "articles.jsonl"))
        paragraphs = list(read_jsonl(run_dir / "corpus" / "paragraphs.jsonl"))
        assert len(articles) == 30
        assert len(paragraphs) == 91

        manifest = read_manifest(run_dir, "ingest")
        assert manifest["stage"] == "ingest"
        assert manifest["package_version"] == __version__
        assert manifest["inputs"]["corpus"] == sha256_dir(synth_root)
        assert manifest["config_digest"] == config_digest({})
        for rel in manifest["outputs"]:
            assert (run_dir / rel).is_file(), rel

    def test_manifest_has_no_timestamps(self, run_cli, synth_root, tmp_path):
        run_dir = tmp_path / "run"
        run_cli("ingest", "--corpus", synth_root, "--out", run_dir)
        text = (run_dir / "manifests" / "ingest.json").read_text("utf-8")
        for needle in ("time", "date", "Date"):
            assert needle not in text


class TestDetect:
    def test_assesses_whole_corpus(self, run_cli, synth_root, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli("detect", "--corpus", synth_root, "--out", run_dir,
                       "--provider", "mock") == 0
        records = list(read_jsonl(run_dir / "assessments" / "mock-model.jsonl"))
        assert len(records) == 91
        assert all(r["status"] == "ok" for r in records)
        manifest = read_manifest(run_dir, "detect")
        assert manifest["outputs"] == ["assessments/mock-model.jsonl"]

    def test_model_override_names_output(self, run_cli, synth_root, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli("detect", "--corpus", synth_root, "--out", run_dir,
                       "--provider", "mock", "--model", "my model/v2") == 0
        assert (run_dir / "assessments" / "my_model_v2.jsonl").is_file()

    def test_rerun_is_byte_stable(self, run_cli, synth_root, tmp_path):
        runs = []
        for name in ("one", "two"):
            run_dir = tmp_path / name
            assert run_cli("detect", "--corpus", synth_root, "--out", run_dir,
                           "--provider", "mock") == 0
            runs.append((
                (run_dir / "assessments" / "mock-model.jsonl").read_bytes(),
                (run_dir / "manifests" / "detect.json").read_bytes(),
            ))
        assert runs[0] == runs[1]


class TestThreshold:
    def test_fault_rate_over_threshold_exits_2(self, run_cli, tmp_path, mock_provider_file):
        corpus = write_fault_corpus(tmp_path / "faulty")
        assert run_cli("detect", "--corpus", corpus, "--out", tmp_path / "run",
                       "--provider", mock_provider_file) == 2

    def test_loose_threshold_passes(self, run_cli, tmp_path, mock_provider_file):
        corpus = write_fault_corpus(tmp_path / "faulty")
        assert run_cli("detect", "--corpus", corpus, "--out", tmp_path / "run",
                       "--provider", mock_provider_file,
                       "--failure-threshold", "0.2") == 0

    def test_failures_recorded_not_dropped(self, run_cli, tmp_path, mock_provider_file):
        corpus = write_fault_corpus(tmp_path / "faulty")
        run_cli("detect", "--corpus", corpus, "--out", tmp_path / "run",
                "--provider", mock_provider_file)
        records = list(read_jsonl(tmp_path / "run" / "assessments" / "mock-model.jsonl"))
        assert len(records) == 100
        failed = [r for r in records if r["status"] == "failed"]
        assert len(failed) == 10
        assert all(r["error_kind"] == "TransportError" for r in failed)


class TestReassessValidation:
    def test_mixed_levels_rejected(self, run_cli, tmp_path):
        mixed = tmp_path / "mixed.jsonl"
        write_jsonl(mixed, [
            {"paragraph_id": "a#p0000", "article_id": "a", "index": 0,
             "prompt_level": 1, "pre_score": 1, "status": "failed"},
            {"paragraph_id": "a#p0001", "article_id": "a", "index": 1,
             "prompt_level": 2, "pre_score": 1, "status": "failed"},
        ])
        assert run_cli("reassess", "--in", mixed, "--out", tmp_path / "run",
                       "--provider", "mock") == 1


class TestReport:
    def test_without_evaluation_outputs(self, run_cli, tmp_path):
        assert run_cli("report", "--run", tmp_path / "empty") == 1


class TestPipeline:
    @pytest.fixture()
    def run_dir(self, run_cli, synth_root, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli("detect", "--corpus", synth_root, "--out", run_dir,
                       "--provider", "mock") == 0
        return run_dir

    def test_full_chain(self, run_cli, synth_root, run_dir, tmp_path):
        assessments = run_dir / "assessments" / "mock-model.jsonl"

        assert run_cli("debias", "--assessments", assessments, "--level", "1",
                       "--out", run_dir, "--provider", "mock") == 0
        debias_file = run_dir / "debias" / "level1.jsonl"

        assert run_cli("reassess", "--in", debias_file, "--out", run_dir,
                       "--provider", "mock") == 0
        reassess_file = run_dir / "reassess" / "level1.jsonl"

        votes = run_dir / "annotations.csv"
        assert run_cli("mock-annotate", "--detect", assessments,
                       "--debias", debias_file, "--out", votes) == 0

        assert run_cli("evaluate", "detection", "--annotations", votes,
                       "--assessments", assessments, "--out", run_dir) == 0
        assert run_cli("evaluate", "debias", "--annotations", votes,
                       "--assessments", reassess_file, "--out", run_dir) == 0
        assert run_cli("evaluate", "similarity", "--annotations", votes,
                       "--assessments", debias_file, "--out", run_dir,
                       "--provider", "mock") == 0

        assert run_cli("report", "--run", run_dir) == 0
        table1 = (run_dir / "report" / "table1.csv").read_text("utf-8")
        assert table1.splitlines()[0] == "model_id,exact_match_pct,kappa,alpha,fbeta"
        assert table1.splitlines()[1].startswith("mock-model,")
        assert (run_dir / "report" / "table2.csv").is_file()
        assert (run_dir / "report" / "table3.csv").is_file()

        # mock votes echo the mock scorer, so agreement is perfect
        detection_doc = json.loads(
            (run_dir / "evaluation" / "detection_mock-model.json").read_text("utf-8"))
        assert detection_doc["exact_match"] == 1.0
        assert detection_doc["alpha"] == 1.0

        assert run_cli("analyze", "--corpus", synth_root, "--assessments", assessments,
                       "--out", run_dir, "--charts") == 0
        analytics_dir = run_dir / "analytics"
        assert (analytics_dir / "publisher_year.csv").is_file()
        assert (analytics_dir / "state_year.csv").is_file()
        assert (analytics_dir / "pairwise_tests.csv").is_file()
        svgs = list((analytics_dir / "charts").glob("*.svg"))
        assert svgs
        manifest = read_manifest(run_dir, "analyze")
        for rel in manifest["outputs"]:
            assert (run_dir / rel).is_file(), rel

    def test_mock_annotate_loads_back(self, run_cli, run_dir, tmp_path):
        assessments = run_dir / "assessments" / "mock-model.jsonl"
        votes = tmp_path / "votes.csv"
        assert run_cli("mock-annotate", "--detect", assessments, "--out", votes) == 0
        records = load_annotations(votes)
        assert len(records) == 91 * 3
        assert {r.annotator_id for r in records} == {"rater-1", "rater-2", "rater-3"}

    def test_bootstrap_ci_recorded(self, run_cli, run_dir, tmp_path):
        assessments = run_dir / "assessments" / "mock-model.jsonl"
        votes = tmp_path / "votes.csv"
        run_cli("mock-annotate", "--detect", assessments, "--out", votes)
        assert run_cli("evaluate", "detection", "--annotations", votes,
                       "--assessments", assessments, "--out", run_dir,
                       "--bootstrap", "100", "--seed", "7") == 0
        doc = json.loads(
            (run_dir / "evaluation" / "detection_mock-model.json").read_text("utf-8"))
        ci = doc["exact_match_ci"]
        assert ci["seed"] == 7
        assert ci["n_resamples"] == 100
        assert ci["low"] <= ci["high"]

    def test_evaluate_detection_single_file_only(self, run_cli, run_dir, tmp_path):
        assessments = run_dir / "assessments" / "mock-model.jsonl"
        votes = tmp_path / "votes.csv"
        run_cli("mock-annotate", "--detect", assessments, "--out", votes)
        assert run_cli("evaluate", "detection", "--annotations", votes,
                       "--assessments", assessments, assessments,
                       "--out", run_dir) == 1


class TestConfigFile:
    def test_config_supplies_defaults(self, run_cli, synth_root, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "corpus_root": str(synth_root),
            "run_dir": "rundir",
            "detection_provider": "mock",
        }), encoding="utf-8")
        assert run_cli("detect", "--config", config) == 0
        # relative run_dir resolves against the config file location
        assert (tmp_path / "rundir" / "assessments" / "mock-model.jsonl").is_file()

    def test_config_threshold_applies(self, run_cli, tmp_path, mock_provider_file):
        corpus = write_fault_corpus(tmp_path / "faulty")
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "corpus_root": str(corpus),
            "run_dir": str(tmp_path / "run"),
            "detection_provider": str(mock_provider_file),
            "failure_threshold": 0.5,
        }), encoding="utf-8")
        assert run_cli("detect", "--config", config) == 0

    def test_invalid_config_rejected(self, run_cli, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text("[1, 2]", encoding="utf-8")
        assert run_cli("stats", "--config", config) == 1
