"""Tests for run orchestration and artifacts."""

from __future__ import annotations

import io
import json
from pathlib import Path

import pytest
from rich.console import Console

from legalir.config import RunConfig
from legalir.corpus import load_case_queries, load_questions
from legalir.exceptions import ConfigurationError
from legalir.manifest import RunManifest, config_hash
from legalir.runner import (
    ANSWERS_NAME,
    PREDICTIONS_NAME,
    REPORT_JSON_NAME,
    REPORT_MD_NAME,
    execute,
)


def _quiet() -> Console:
    return Console(file=io.StringIO())


def _lines(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


@pytest.fixture
def run(tmp_path: Path, clean_env):
    """Execute a task into a fresh output directory under tmp_path."""
    counter = iter(range(1000))

    def _run(task: str, **values):
        config = RunConfig(task=task, output_dir=tmp_path / f"run{next(counter)}", **values)
        return execute(config, _quiet())

    return _run


class TestTask1Run:
    """Tests for Task 1 runs."""

    def test_artifacts(self, run, synthetic_dir):
        """Predictions, both reports and the manifest are written."""
        result = run(
            "task1", cases=synthetic_dir["cases"], task1_queries=synthetic_dir["task1_queries"]
        )
        for name in (PREDICTIONS_NAME, REPORT_JSON_NAME, REPORT_MD_NAME, "manifest.json"):
            assert (result.output_dir / name).is_file()
        predictions = _lines(result.artifacts["predictions"])
        assert len(predictions) == 30
        assert set(predictions[0]) == {"query_id", "selected", "ranked"}
        assert result.report["queries"] == 30
        assert 0.0 <= result.report["metrics"]["f1"] <= 1.0
        assert result.exit_status == 0

    def test_predictions_are_byte_identical(self, run, synthetic_dir):
        """Two runs over the same inputs write the same predictions."""
        inputs = {"cases": synthetic_dir["cases"], "task1_queries": synthetic_dir["task1_queries"]}
        first = run("task1", **inputs)
        second = run("task1", **inputs)
        assert (
            first.artifacts["predictions"].read_bytes()
            == second.artifacts["predictions"].read_bytes()
        )
        assert (
            first.artifacts["report_json"].read_bytes()
            == second.artifacts["report_json"].read_bytes()
        )

    def test_manifest_records_config(self, run, synthetic_dir):
        """The manifest echoes the effective config and fingerprints inputs."""
        result = run(
            "task1",
            cases=synthetic_dir["cases"],
            task1_queries=synthetic_dir["task1_queries"],
            alpha=0.7,
        )
        manifest = RunManifest.load(result.artifacts["manifest"])
        assert manifest.task == "task1"
        assert manifest.config["alpha"] == 0.7
        assert manifest.config_hash == config_hash(manifest.config)
        assert set(manifest.inputs) == {"cases", "task1_queries"}
        assert manifest.seeds == {"seed": 0}

    def test_unlabeled_queries_write_predictions_only(self, run, synthetic_dir, tmp_path):
        """Without gold labels metrics are omitted, predictions still written."""
        queries = tmp_path / "unlabeled.jsonl"
        lines = synthetic_dir["task1_queries"].read_text(encoding="utf-8").splitlines()[:3]
        unlabeled = [{**json.loads(line), "gold": []} for line in lines]
        queries.write_text("".join(json.dumps(r) + "\n" for r in unlabeled), encoding="utf-8")
        result = run("task1", cases=synthetic_dir["cases"], task1_queries=queries)
        assert "metrics" not in result.report
        assert len(_lines(result.artifacts["predictions"])) == 3
        assert "metrics not computed" in result.markdown


class TestOtherTasks:
    """Tests for the remaining tasks."""

    def test_task2_from_weak_scorer(self, run, synthetic_dir):
        """Task 2 trains on weak pairs and evaluates the test split."""
        result = run(
            "task2",
            task2_queries=synthetic_dir["task2_queries"],
            cases=synthetic_dir["cases"],
            task2_setting=2,
        )
        queries = _lines(synthetic_dir["task2_queries"])
        test_count = sum(1 for q in queries if q["split"] == "test")
        assert len(_lines(result.artifacts["predictions"])) == test_count
        assert result.report["setting"] == 2
        assert result.report["train_queries"] == len(queries) - test_count

    def test_task2_needs_base_scorer(self, run, synthetic_dir):
        """Without a model or cases there is nothing to score with."""
        with pytest.raises(ConfigurationError) as excinfo:
            run("task2", task2_queries=synthetic_dir["task2_queries"])
        assert excinfo.value.key == "model"

    def test_task2_finetuning_does_not_hurt(self, run, synthetic_dir):
        """Setting 2 fine-tunes the weak scorer and scores at least the F1 of setting 1."""
        inputs = {"task2_queries": synthetic_dir["task2_queries"], "cases": synthetic_dir["cases"]}
        weak = run("task2", task2_setting=1, **inputs)
        tuned = run("task2", task2_setting=2, **inputs)
        assert tuned.report["metrics"]["f1"] >= weak.report["metrics"]["f1"] - 1e-9

    def test_task3(self, run, synthetic_dir):
        """Only the dev questions are answered and members are compared."""
        result = run(
            "task3", articles=synthetic_dir["articles"], questions=synthetic_dir["questions"], k=10
        )
        predictions = _lines(result.artifacts["predictions"])
        assert [p["query_id"] for p in predictions] == ["H29-3", "H29-6", "H29-9", "H29-12"]
        assert all(p["selected"] for p in predictions)
        assert all(len(p["ranked"]) == 10 for p in predictions)
        assert result.report["k"] == 10
        assert result.report["dev_prefix"] == "H29"
        assert set(result.report["members"]) == {"only_a", "only_b", "both"}

    @pytest.mark.parametrize("task", ["task3", "task4-entail", "task4-lawful"])
    def test_training_never_sees_evaluated_questions(self, run, synthetic_dir, task):
        """The trained-on and evaluated question ids are disjoint."""
        result = run(task, articles=synthetic_dir["articles"], questions=synthetic_dir["questions"])
        records = _lines(result.artifacts.get("predictions") or result.artifacts["answers"])
        evaluated = {r.get("query_id", r.get("question_id")) for r in records}
        trained = set(result.report["train_questions"])
        assert len(trained) == 8
        assert evaluated and trained.isdisjoint(evaluated)
        assert all(qid.startswith("H29-") for qid in evaluated)

    def test_dev_prefix_must_split(self, run, synthetic_dir):
        """A prefix matching no question leaves nothing to evaluate."""
        with pytest.raises(ConfigurationError) as excinfo:
            run(
                "task4-lawful",
                articles=synthetic_dir["articles"],
                questions=synthetic_dir["questions"],
                dev_prefix="R02",
            )
        assert excinfo.value.key == "dev_prefix"

    @pytest.mark.parametrize("task", ["task4-entail", "task4-lawful"])
    def test_task4(self, run, synthetic_dir, task):
        """Dev questions are answered Y or N into answers.jsonl and accuracy is reported."""
        result = run(task, articles=synthetic_dir["articles"], questions=synthetic_dir["questions"])
        assert (result.output_dir / ANSWERS_NAME).is_file()
        assert not (result.output_dir / PREDICTIONS_NAME).exists()
        answers = _lines(result.artifacts["answers"])
        assert len(answers) == 4
        assert {a["answer"] for a in answers} <= {"Y", "N"}
        assert result.report["metrics"]["total"] == 4
        assert "Accuracy" in result.markdown

    @pytest.mark.parametrize("source", ["gold", "tfidf"])
    def test_task4_entail_train_source(self, run, synthetic_dir, source):
        """Both training sources run and are recorded in the report."""
        result = run(
            "task4-entail",
            articles=synthetic_dir["articles"],
            questions=synthetic_dir["questions"],
            entail_train_source=source,
        )
        assert result.report["train_source"] == source
        assert len(_lines(result.artifacts["answers"])) == 4

    def test_civil_code_stands_in_for_articles(self, run, synthetic_dir):
        """A plain-text Civil Code gives the same Task 3 run as the articles file."""
        inputs = {"questions": synthetic_dir["questions"], "k": 10}
        from_jsonl = run("task3", articles=synthetic_dir["articles"], **inputs)
        from_text = run("task3", civil_code=synthetic_dir["civil_code"], **inputs)
        assert (
            from_text.artifacts["predictions"].read_bytes()
            == from_jsonl.artifacts["predictions"].read_bytes()
        )
        manifest = RunManifest.load(from_text.artifacts["manifest"])
        assert "civil_code" in manifest.inputs

    def test_stats(self, run, synthetic_dir):
        """Case and article statistics are reported, with sentence lengths."""
        result = run(
            "stats",
            cases=synthetic_dir["cases"],
            task1_queries=synthetic_dir["task1_queries"],
            articles=synthetic_dir["articles"],
            questions=synthetic_dir["questions"],
        )
        assert "predictions" not in result.artifacts
        assert result.report["cases"]["sample_count"] == 30
        assert result.report["cases"]["mean_gold_per_query"] == 1.0
        assert result.report["articles"]["sample_count"] == 40
        assert set(result.report["sentence_lengths"]) == {"articles", "questions"}
        assert "| corpus |" in result.markdown

    def test_sweep_k(self, run, synthetic_dir):
        """One recall row per k, reaching 1.0 once k covers the code."""
        result = run(
            "sweep-k",
            articles=synthetic_dir["articles"],
            questions=synthetic_dir["questions"],
            k_values=(10, 50, 150),
        )
        rows = result.report["recall_at_k"]
        assert [row["k"] for row in rows] == [10, 50, 150]
        assert rows[-1]["recall"] == 1.0
        assert "| 150 | 1.0000 |" in result.markdown


class TestEvalRun:
    """Tests for evaluating saved predictions."""

    def test_eval_matches_task_report(self, run, synthetic_dir):
        """Re-scoring Task 1 predictions reproduces the run's metrics."""
        task1 = run(
            "task1", cases=synthetic_dir["cases"], task1_queries=synthetic_dir["task1_queries"]
        )
        result = run(
            "eval",
            predictions=task1.artifacts["predictions"],
            gold=synthetic_dir["gold_task1"],
        )
        assert "predictions" not in result.artifacts
        assert result.report["metrics"] == task1.report["metrics"]

    def test_eval_micro(self, run, synthetic_dir):
        """The aggregation setting reaches the evaluator."""
        task1 = run(
            "task1", cases=synthetic_dir["cases"], task1_queries=synthetic_dir["task1_queries"]
        )
        result = run(
            "eval",
            predictions=task1.artifacts["predictions"],
            gold=synthetic_dir["gold_task1"],
            metric_aggregation="micro",
        )
        assert result.report["metrics"]["aggregation"] == "micro"

    @pytest.mark.parametrize("via_directory", [False, True])
    def test_eval_answers(self, run, synthetic_dir, tmp_path, via_directory):
        """Answer files, or the run directory holding them, are scored by accuracy."""
        task4 = run(
            "task4-entail",
            articles=synthetic_dir["articles"],
            questions=synthetic_dir["questions"],
        )
        gold = tmp_path / "gold_dev.jsonl"
        dev = [r for r in _lines(synthetic_dir["gold_task4"]) if r["query_id"].startswith("H29-")]
        gold.write_text("".join(json.dumps(r) + "\n" for r in dev), encoding="utf-8")
        result = run(
            "eval",
            predictions=task4.output_dir if via_directory else task4.artifacts["answers"],
            gold=gold,
        )
        assert result.report["total"] == 4
        assert result.report["metrics"]["accuracy"] == task4.report["metrics"]["accuracy"]

    def test_eval_directory_without_records(self, run, synthetic_dir, tmp_path):
        """A directory holding no answers or predictions is a configuration error."""
        empty = tmp_path / "empty_run"
        empty.mkdir()
        with pytest.raises(ConfigurationError) as excinfo:
            run("eval", predictions=empty, gold=synthetic_dir["gold_task4"])
        assert excinfo.value.key == "predictions"


class TestExecuteValidation:
    """Tests for checks done before anything runs."""

    def test_missing_task(self, tmp_path: Path, clean_env):
        """A config without a task cannot be executed."""
        with pytest.raises(ConfigurationError) as excinfo:
            execute(RunConfig(output_dir=tmp_path), _quiet())
        assert excinfo.value.key == "task"

    def test_out_of_range_value(self, tmp_path: Path, synthetic_dir, clean_env):
        """Range errors surface before any output is written."""
        config = RunConfig(
            task="task1",
            cases=synthetic_dir["cases"],
            task1_queries=synthetic_dir["task1_queries"],
            alpha=1.5,
            output_dir=tmp_path / "never",
        )
        with pytest.raises(ConfigurationError):
            execute(config, _quiet())
        assert not (tmp_path / "never").exists()

    def test_synthetic_inputs_are_consistent(self, synthetic_dir):
        """The fixture's files load and agree on sizes."""
        assert len(load_case_queries(synthetic_dir["task1_queries"])) == 30
        assert len(load_questions(synthetic_dir["questions"])) == 12
