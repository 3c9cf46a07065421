"""Run orchestration.

``execute`` runs one configured task and writes its artifacts under the
output directory:

  - predictions.jsonl  per-query output of the retrieval tasks
  - answers.jsonl      per-question Yes/No of Task 4
  - report.json        metrics or statistics
  - report.md          the same as a Markdown table
  - manifest.json      effective config, its hash, input fingerprints, seeds

Tasks 3 and 4 train on every question outside the development split and
are evaluated on the split (ids starting with ``dev_prefix``) when no
trained model is supplied.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn

from .config import RunConfig
from .corpus import (
    Answer,
    BarQuestion,
    CaseDocument,
    StatuteArticle,
    compute_corpus_stats,
    iter_jsonl,
    load_articles,
    load_case_queries,
    load_fragment_queries,
    load_questions,
    parse_case_corpus,
    parse_civil_code,
    resolve_questions,
    sentence_length_histogram,
    split_dev_by_prefix,
)
from .entail import (
    augment_lawfulness,
    entailment_training_pairs,
    evaluate_answers,
    run_task4_entailment,
    run_task4_lawfulness,
)
from .evaluation import (
    MetricsReport,
    QueryJudgment,
    accuracy,
    evaluate_run,
    load_answer_accuracy,
    load_judgments,
    render_markdown,
    summary_row,
)
from .exceptions import ConfigurationError, UndefinedMetricError
from .formatters import MarkdownTableFormatter, get_formatter, write_atomic
from .lexical import tfidf_fit
from .manifest import RunManifest
from .pairscore import (
    LawfulnessClassifier,
    LinearPairScorer,
    WeakLabelConfig,
    build_task3_training_pairs,
    extract_weak_pairs,
    load_external_scores,
    load_scorer,
    train,
    train_unary,
)
from .pipelines import (
    compare_members,
    prepare_task2_scorer,
    run_task1_batch,
    run_task2_batch,
    run_task3_batch,
    sweep_k,
)

logger = logging.getLogger(__name__)

PREDICTIONS_NAME = "predictions.jsonl"
ANSWERS_NAME = "answers.jsonl"
REPORT_JSON_NAME = "report.json"
REPORT_MD_NAME = "report.md"

Update = Callable[[str], None]


@dataclass
class RunResult:
    """What a run produced; ``exit_status`` is 0 for every completed run."""

    task: str
    output_dir: Path
    report: dict
    markdown: str
    rows: list[dict] = field(default_factory=list)
    artifacts: dict[str, Path] = field(default_factory=dict)
    exit_status: int = 0


@dataclass
class _Outcome:
    report: dict
    markdown: str
    rows: list[dict] = field(default_factory=list)
    records: list[dict] | None = None
    records_name: str = PREDICTIONS_NAME


@contextmanager
def _progress(console: Console, description: str) -> Iterator[Update]:
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    ) as progress:
        task_id = progress.add_task(description, total=None)

        def update(message: str) -> None:
            progress.update(task_id, description=message)

        yield update


def _counter(update: Update, label: str, total: int) -> Callable[[object], None]:
    done = 0

    def on_result(_: object) -> None:
        nonlocal done
        done += 1
        update(f"{label}: {done}/{total}")

    return on_result


# --------------------------------------------------------------------------
# Shared helpers
# --------------------------------------------------------------------------


def _retrieval_outcome(
    judgments: Sequence[QueryJudgment],
    records: list[dict],
    config: RunConfig,
    title: str,
    extra: dict | None = None,
) -> _Outcome:
    report: dict = {"task": config.task, "queries": len(judgments), **(extra or {})}
    markdown = f"## {title}\n\n_no gold labels: metrics not computed_\n"
    rows: list[dict] = []
    try:
        metrics = evaluate_run(judgments, config.metric_aggregation)
    except UndefinedMetricError:
        logger.warning("No query carries gold labels; writing predictions only")
    else:
        report["metrics"] = metrics.to_dict()
        markdown = render_markdown(metrics, title)
        rows = [summary_row(metrics)]
    return _Outcome(report, markdown, rows, records)


def _answer_outcome(
    records: list, questions: Sequence[BarQuestion], config: RunConfig, extra: dict
) -> _Outcome:
    report: dict = {"task": config.task, "questions": len(records), **extra}
    title = f"Task 4 ({config.approach})"
    markdown = f"## {title}\n\n_no labeled questions: accuracy not computed_\n"
    rows: list[dict] = []
    if any(q.label is not None for q in questions):
        score = evaluate_answers(records, questions)
        report["metrics"] = score.to_dict()
        metrics = MetricsReport(config.metric_aggregation, accuracy=score.accuracy)
        markdown = render_markdown(metrics, title)
        rows = [summary_row(metrics)]
    return _Outcome(report, markdown, rows, [r.to_dict() for r in records], ANSWERS_NAME)


def _weak_scorer(config: RunConfig, cases: Sequence[CaseDocument]) -> LinearPairScorer:
    if config.model is not None:
        return load_scorer(config.model)
    pairs = extract_weak_pairs(cases, WeakLabelConfig(seed=config.seed))
    logger.info("Training pair scorer on %d weak pairs", len(pairs))
    return train(pairs, config.training_hyper())


def _load_cases(path: Path) -> list[CaseDocument]:
    return parse_case_corpus(path, "plaintext-dir" if Path(path).is_dir() else "jsonl")


def _load_statute(config: RunConfig) -> list[StatuteArticle]:
    if config.articles is not None:
        return load_articles(config.articles)
    return parse_civil_code(Path(config.civil_code).read_text(encoding="utf-8"))


def _statute_inputs(config: RunConfig) -> tuple[list[StatuteArticle], list[BarQuestion]]:
    articles = _load_statute(config)
    questions = load_questions(config.questions)
    resolve_questions(questions, articles)
    return articles, questions


def _dev_split(
    config: RunConfig, questions: Sequence[BarQuestion]
) -> tuple[list[BarQuestion], list[BarQuestion]]:
    train_questions, dev = split_dev_by_prefix(questions, config.dev_prefix)
    if not train_questions or not dev:
        raise ConfigurationError(
            f"dev_prefix {config.dev_prefix!r} leaves {len(train_questions)} training and "
            f"{len(dev)} evaluation question(s); both must be non-empty",
            key="dev_prefix",
        )
    logger.info(
        "Training on %d question(s), evaluating on %d %s question(s)",
        len(train_questions),
        len(dev),
        config.dev_prefix,
    )
    return train_questions, dev


def _split_report(config: RunConfig, train_questions: Sequence[BarQuestion]) -> dict:
    return {"dev_prefix": config.dev_prefix, "train_questions": [q.id for q in train_questions]}


# --------------------------------------------------------------------------
# Tasks
# --------------------------------------------------------------------------


def _run_task1(config: RunConfig, console: Console) -> _Outcome:
    cases = _load_cases(config.cases)
    queries = load_case_queries(config.task1_queries)
    if config.external_scores is not None:
        scorer = load_external_scores(config.external_scores)
    else:
        scorer = _weak_scorer(config, cases)

    with _progress(console, "Task 1...") as update:
        results = run_task1_batch(
            cases,
            queries,
            scorer,
            config.bm25_params(),
            config.fusion_config(),
            tokenizer=config.tokenizer_config(),
            on_result=_counter(update, "Task 1 queries", len(queries)),
        )

    missing = sum(r.missing_scores for r in results)
    if missing:
        logger.warning("%d survivor(s) had no external score; default score used", missing)
    judgments = [
        QueryJudgment(q.query_id, q.gold, r.selected_set, tuple(r.ranked_ids))
        for q, r in zip(queries, results)
    ]
    return _retrieval_outcome(
        judgments,
        [r.to_dict() for r in results],
        config,
        "Task 1: case law retrieval",
        {"missing_scores": missing},
    )


def _run_task2(config: RunConfig, console: Console) -> _Outcome:
    queries = load_fragment_queries(config.task2_queries)
    if config.model is not None:
        base = load_scorer(config.model)
    elif config.cases is not None:
        base = _weak_scorer(config, _load_cases(config.cases))
    else:
        raise ConfigurationError("task2 needs 'model' or 'cases' for the base scorer", key="model")

    train_queries = [q for q in queries if q.split == "train"]
    test_queries = [q for q in queries if q.split == "test"] or queries
    scorer = prepare_task2_scorer(
        config.task2_setting, base, train_queries, config.training_hyper()
    )
    lexical = (
        load_external_scores(config.lexical_scores) if config.task2_setting == 3 else "bm25"
    )

    with _progress(console, "Task 2...") as update:
        results = run_task2_batch(
            test_queries,
            scorer,
            lexical,
            config.fusion_config(),
            bm25_params=config.bm25_params(),
            tokenizer=config.tokenizer_config(),
            on_result=_counter(update, "Task 2 queries", len(test_queries)),
        )

    judgments = [
        QueryJudgment(q.query_id, q.gold, r.selected_set, tuple(r.ranked_ids))
        for q, r in zip(test_queries, results)
    ]
    return _retrieval_outcome(
        judgments,
        [r.to_dict() for r in results],
        config,
        f"Task 2: paragraph entailment (setting {config.task2_setting})",
        {"setting": config.task2_setting, "train_queries": len(train_queries)},
    )


def _run_task3(config: RunConfig, console: Console) -> _Outcome:
    articles, questions = _statute_inputs(config)
    tfidf = tfidf_fit([(a.id, a.content) for a in articles], config.tokenizer_config())

    extra: dict = {"k": config.k}
    members = [load_scorer(path) for path in (config.model, config.model_b) if path is not None]
    if not members:
        train_questions, questions = _dev_split(config, questions)
        labeled = [q for q in train_questions if q.relevant_article_ids]
        pairs = build_task3_training_pairs(labeled, articles, tfidf, config.k)
        hyper = config.training_hyper()
        logger.info("Training two Task 3 members on %d pairs", len(pairs))
        members = [
            train(pairs, hyper),
            train(pairs, replace(hyper, seed=hyper.seed + 1, hash_seed=hyper.hash_seed + 1)),
        ]
        extra.update(_split_report(config, train_questions))

    with _progress(console, "Task 3...") as update:
        results = run_task3_batch(
            questions,
            articles,
            tfidf,
            config.k,
            members,
            config.threshold,
            on_result=_counter(update, "Task 3 questions", len(questions)),
        )

    extra["fallbacks"] = sum(r.fallback for r in results)
    if len(members) == 2:
        gold = {q.id: q.relevant_article_ids for q in questions}
        first = {r.question_id: r.member_selections[0] for r in results}
        second = {r.question_id: r.member_selections[1] for r in results}
        extra["members"] = compare_members(first, second, gold).to_dict()
    judgments = [
        QueryJudgment(q.id, q.relevant_article_ids, r.selected, r.candidates)
        for q, r in zip(questions, results)
    ]
    return _retrieval_outcome(
        judgments, [r.to_dict() for r in results], config, "Task 3: statute retrieval", extra
    )


def _run_task4_entail(config: RunConfig, console: Console) -> _Outcome:
    articles, questions = _statute_inputs(config)
    tfidf = tfidf_fit([(a.id, a.content) for a in articles], config.tokenizer_config())
    extra: dict = {}
    if config.model is not None:
        scorer = load_scorer(config.model)
    else:
        train_questions, questions = _dev_split(config, questions)
        pairs = entailment_training_pairs(
            train_questions, articles, config.entail_train_source, tfidf
        )
        logger.info("Training entailment scorer on %d pairs", len(pairs))
        scorer = train(pairs, config.training_hyper())
        extra = {
            "train_source": config.entail_train_source,
            **_split_report(config, train_questions),
        }
    with _progress(console, "Task 4 (entailment)..."):
        records = run_task4_entailment(questions, articles, tfidf, scorer, config.threshold)
    return _answer_outcome(records, questions, config, extra)


def _run_task4_lawful(config: RunConfig, console: Console) -> _Outcome:
    articles, questions = _statute_inputs(config)
    extra: dict = {}
    if config.model is not None:
        classifier = LawfulnessClassifier(load_scorer(config.model))
    else:
        train_questions, questions = _dev_split(config, questions)
        samples = augment_lawfulness(articles, train_questions)
        logger.info("Training lawfulness classifier on %d samples", len(samples))
        classifier = train_unary(
            [s.text for s in samples],
            [s.label is Answer.YES for s in samples],
            config.training_hyper(),
        )
        extra = _split_report(config, train_questions)
    with _progress(console, "Task 4 (lawfulness)..."):
        records = run_task4_lawfulness(questions, classifier)
    return _answer_outcome(records, questions, config, extra)


def _run_stats(config: RunConfig, console: Console) -> _Outcome:
    report: dict = {"task": "stats"}
    rows = []
    tokenizer = config.tokenizer_config()
    if config.cases is not None:
        cases = _load_cases(config.cases)
        queries = load_case_queries(config.task1_queries) if config.task1_queries else None
        stats = compute_corpus_stats(cases, queries, config=tokenizer)
        report["cases"] = stats.to_dict()
        rows.append({"corpus": "cases", **stats.to_dict()})
    if config.articles is not None or config.civil_code is not None:
        articles = _load_statute(config)
        questions = load_questions(config.questions) if config.questions else None
        stats = compute_corpus_stats(articles, questions, config=tokenizer)
        report["articles"] = stats.to_dict()
        rows.append({"corpus": "articles", **stats.to_dict()})
        if questions:
            lengths = {
                "articles": sentence_length_histogram(
                    [a.content for a in articles], config=tokenizer
                ),
                "questions": sentence_length_histogram(
                    [q.content for q in questions], config=tokenizer
                ),
            }
            report["sentence_lengths"] = {
                name: {str(k): v for k, v in hist.items()} for name, hist in lengths.items()
            }
    fields = [
        "corpus",
        "sample_count",
        "mean_words_per_doc",
        "max_words",
        "mean_paragraphs_per_doc",
        "max_paragraphs",
        "candidate_count",
        "mean_gold_per_query",
    ]
    markdown = MarkdownTableFormatter(fields=fields, title="Corpus statistics").format(rows)
    return _Outcome(report, markdown, [{f: row.get(f) for f in fields} for row in rows])


def _run_sweep_k(config: RunConfig, console: Console) -> _Outcome:
    articles, questions = _statute_inputs(config)
    tfidf = tfidf_fit([(a.id, a.content) for a in articles], config.tokenizer_config())
    sweep = sweep_k(questions, articles, tfidf, config.k_values)
    rows = [{"k": k, "recall": recall} for k, recall in sweep.recall.items()]
    report = {"task": "sweep-k", "recall_at_k": rows, "skipped": sweep.skipped}
    markdown = MarkdownTableFormatter(fields=["k", "recall"], title="Tf-idf top-k recall").format(
        rows
    )
    return _Outcome(report, markdown, rows)


def _run_file(path: Path) -> Path:
    """A run directory stands for the answers or predictions file inside it."""
    path = Path(path)
    if not path.is_dir():
        return path
    for name in (ANSWERS_NAME, PREDICTIONS_NAME):
        if (path / name).is_file():
            return path / name
    raise ConfigurationError(
        f"predictions: {path} holds neither {ANSWERS_NAME} nor {PREDICTIONS_NAME}",
        key="predictions",
    )


def _run_eval(config: RunConfig, console: Console) -> _Outcome:
    predictions = _run_file(config.predictions)
    first = next(iter_jsonl(predictions), None)
    if first is not None and "answer" in first[1]:
        correct, total = load_answer_accuracy(predictions, config.gold)
        metrics = MetricsReport(
            config.metric_aggregation, accuracy=accuracy(correct, total) if total else None
        )
        report = {"task": "eval", "correct": correct, "total": total, "metrics": metrics.to_dict()}
        return _Outcome(
            report, render_markdown(metrics, "Answer accuracy"), [summary_row(metrics)]
        )
    judgments = load_judgments(predictions, config.gold)
    metrics = evaluate_run(judgments, config.metric_aggregation)
    report = {"task": "eval", "metrics": metrics.to_dict()}
    return _Outcome(report, render_markdown(metrics, "Evaluation"), [summary_row(metrics)])


_TASKS: dict[str, Callable[[RunConfig, Console], _Outcome]] = {
    "task1": _run_task1,
    "task2": _run_task2,
    "task3": _run_task3,
    "task4-entail": _run_task4_entail,
    "task4-lawful": _run_task4_lawful,
    "stats": _run_stats,
    "sweep-k": _run_sweep_k,
    "eval": _run_eval,
}


def execute(config: RunConfig, console: Console | None = None) -> RunResult:
    """Run ``config.task`` and write its artifacts; errors propagate as LegalIRError."""
    config.check_ranges()
    config.check_inputs(require_task=True)
    console = console or Console(stderr=True)
    out_dir = config.output_path
    out_dir.mkdir(parents=True, exist_ok=True)

    logger.info("Running %s into %s", config.task, out_dir)
    outcome = _TASKS[config.task](config, console)

    artifacts: dict[str, Path] = {}
    if outcome.records is not None:
        records_path = out_dir / outcome.records_name
        artifacts[records_path.stem] = records_path
        write_atomic(records_path, get_formatter("jsonl").format(outcome.records))
    artifacts["report_json"] = out_dir / REPORT_JSON_NAME
    write_atomic(artifacts["report_json"], get_formatter("json", indent=2).format(outcome.report))
    artifacts["report_md"] = out_dir / REPORT_MD_NAME
    write_atomic(artifacts["report_md"], outcome.markdown)

    manifest = RunManifest.build(
        config.task, config.as_dict(), config.input_paths(), {"seed": config.seed}
    )
    artifacts["manifest"] = manifest.save(out_dir)
    return RunResult(
        config.task, out_dir, outcome.report, outcome.markdown, outcome.rows, artifacts
    )
