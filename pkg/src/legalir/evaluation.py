"""Retrieval and answering metrics.

Set metrics (precision, recall, F-beta) follow the usual definitions with
precision 0 for an empty prediction. Queries whose gold set is empty have no
defined recall; run-level aggregation skips them and counts how many.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, NamedTuple

from .corpus import iter_jsonl
from .exceptions import ArgumentError, ParseError, UndefinedMetricError
from .formatters import MarkdownTableFormatter

logger = logging.getLogger(__name__)

MetricAggregation = Literal["macro", "micro"]

RECALL_CUTOFFS = (5, 10, 30)
REPORT_COLUMNS = {
    "precision": "Prec",
    "recall": "Recall",
    "f1": "F1",
    "f2": "F2",
    "map": "MAP",
    "r5": "R5",
    "r10": "R10",
    "r30": "R30",
    "accuracy": "Accuracy",
}


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    f2: float


def f_beta(precision: float, recall: float, beta: float) -> float:
    """(1 + b^2) P R / (b^2 P + R), and 0 when both are 0."""
    b2 = beta * beta
    denominator = b2 * precision + recall
    if denominator == 0:
        return 0.0
    return (1.0 + b2) * precision * recall / denominator


def set_prf(predicted: Iterable[str], gold: Iterable[str]) -> PRF:
    predicted, gold = set(predicted), set(gold)
    if not gold:
        raise UndefinedMetricError("recall is undefined for an empty gold set")
    hits = len(predicted & gold)
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(gold)
    return PRF(precision, recall, f_beta(precision, recall, 1.0), f_beta(precision, recall, 2.0))


def accuracy(correct: int, total: int) -> float:
    if total < 1:
        raise ArgumentError("accuracy needs at least one answer")
    if not 0 <= correct <= total:
        raise ArgumentError(f"correct must lie in [0, {total}], got {correct}")
    return correct / total


def average_precision(ranked: Sequence[str], gold: Iterable[str]) -> float:
    """Mean of precision@r over the ranks r holding a gold item; absent gold adds 0."""
    gold = set(gold)
    if not gold:
        raise UndefinedMetricError("average precision is undefined for an empty gold set")
    found = 0
    total = 0.0
    for rank, item in enumerate(ranked, start=1):
        if item in gold:
            found += 1
            total += found / rank
    return total / len(gold)


def recall_at_k(ranked: Sequence[str], gold: Iterable[str], k: int) -> float:
    gold = set(gold)
    if not gold:
        raise UndefinedMetricError("recall is undefined for an empty gold set")
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    return len(gold & set(ranked[:k])) / len(gold)


@dataclass(frozen=True)
class QueryJudgment:
    """Gold and predicted ids of one query, optionally with the full ranking."""

    query_id: str
    gold: frozenset[str]
    predicted: frozenset[str]
    ranked: tuple[str, ...] | None = None


def mean_average_precision(judgments: Sequence[QueryJudgment]) -> float:
    """MAP over judgments with a ranking and a non-empty gold set."""
    values = [
        average_precision(j.ranked, j.gold)
        for j in judgments
        if j.gold and j.ranked is not None
    ]
    skipped = len(judgments) - len(values)
    if skipped:
        logger.warning("MAP skipped %d query(ies) without gold or ranking", skipped)
    if not values:
        raise UndefinedMetricError("no query has both gold items and a ranking")
    return sum(values) / len(values)


@dataclass(frozen=True)
class MetricsReport:
    aggregation: MetricAggregation
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    f2: float | None = None
    map: float | None = None
    r5: float | None = None
    r10: float | None = None
    r30: float | None = None
    accuracy: float | None = None
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    skipped: int = 0

    def summary(self) -> dict[str, float]:
        """Present metric values only, in report column order."""
        return {
            name: getattr(self, name)
            for name in REPORT_COLUMNS
            if getattr(self, name) is not None
        }

    def to_dict(self) -> dict:
        return {
            "aggregation": self.aggregation,
            **self.summary(),
            "per_query": self.per_query,
            "skipped": self.skipped,
        }


def evaluate_run(
    judgments: Sequence[QueryJudgment], aggregation: MetricAggregation = "macro"
) -> MetricsReport:
    """Aggregate per-query metrics.

    macro averages per-query P and R first and takes F-beta of the averages;
    micro pools hits, predictions and gold over all queries. Ranking metrics
    (MAP, R@k) are averaged per query and need every judgment to carry a ranking.
    """
    if not judgments:
        raise ArgumentError("evaluate_run needs at least one judgment")
    if aggregation not in ("macro", "micro"):
        raise ArgumentError(f"unknown aggregation: {aggregation!r}")

    scored = [j for j in judgments if j.gold]
    skipped = len(judgments) - len(scored)
    if skipped:
        logger.warning("Skipped %d query(ies) with an empty gold set", skipped)
    if not scored:
        raise UndefinedMetricError("every query has an empty gold set")

    per_query: dict[str, dict[str, float]] = {}
    for j in scored:
        prf = set_prf(j.predicted, j.gold)
        per_query[j.query_id] = prf._asdict()

    if aggregation == "macro":
        precision = sum(q["precision"] for q in per_query.values()) / len(scored)
        recall = sum(q["recall"] for q in per_query.values()) / len(scored)
    else:
        hits = sum(len(j.predicted & j.gold) for j in scored)
        predicted = sum(len(j.predicted) for j in scored)
        precision = hits / predicted if predicted else 0.0
        recall = hits / sum(len(j.gold) for j in scored)

    ranking: dict[str, float] = {}
    if all(j.ranked is not None for j in scored):
        ranking["map"] = sum(average_precision(j.ranked, j.gold) for j in scored) / len(scored)
        for k in RECALL_CUTOFFS:
            ranking[f"r{k}"] = sum(recall_at_k(j.ranked, j.gold, k) for j in scored) / len(scored)

    return MetricsReport(
        aggregation=aggregation,
        precision=precision,
        recall=recall,
        f1=f_beta(precision, recall, 1.0),
        f2=f_beta(precision, recall, 2.0),
        per_query=per_query,
        skipped=skipped,
        **ranking,
    )


def summary_row(report: MetricsReport) -> dict[str, float]:
    """Present metrics keyed by their report column names."""
    return {REPORT_COLUMNS[name]: value for name, value in report.summary().items()}


def render_markdown(report: MetricsReport, title: str | None = None) -> str:
    """One-row result table with a column per present metric."""
    row = summary_row(report)
    formatter = MarkdownTableFormatter(fields=list(row), title=title)
    text = formatter.format([row])
    note = f"\n_aggregation: {report.aggregation}"
    if report.skipped:
        note += f"; skipped queries: {report.skipped}"
    return text + note + "_\n"


# --------------------------------------------------------------------------
# Loading run files
# --------------------------------------------------------------------------


def _query_key(record: dict, path: Path, line_no: int) -> str:
    key = record.get("query_id", record.get("question_id"))
    if not isinstance(key, str) or not key:
        raise ParseError("missing 'query_id'", path, line_no)
    return key


def _ranked_ids(ranked: list) -> tuple[str, ...]:
    # Task 1/2 rank as [id, score] pairs, Task 3 as bare ids
    return tuple(str(r[0]) if isinstance(r, list) else str(r) for r in ranked)


def load_judgments(predictions_path: Path, gold_path: Path) -> list[QueryJudgment]:
    """Join predictions.jsonl with gold.jsonl on query id, in gold order.

    Gold queries absent from the predictions count as empty predictions.
    """
    predictions: dict[str, dict] = {}
    for line_no, record in iter_jsonl(Path(predictions_path)):
        predictions[_query_key(record, predictions_path, line_no)] = record

    judgments = []
    for line_no, record in iter_jsonl(Path(gold_path)):
        query_id = _query_key(record, gold_path, line_no)
        gold = record.get("gold")
        if not isinstance(gold, list):
            raise ParseError("'gold' must be a list of ids", gold_path, line_no)
        prediction = predictions.get(query_id, {})
        ranked = prediction.get("ranked")
        judgments.append(
            QueryJudgment(
                query_id=query_id,
                gold=frozenset(str(g) for g in gold),
                predicted=frozenset(str(s) for s in prediction.get("selected", ())),
                ranked=_ranked_ids(ranked) if ranked is not None else None,
            )
        )
    return judgments


def load_answer_accuracy(answers_path: Path, gold_path: Path) -> tuple[int, int]:
    """(correct, total) of answers.jsonl against gold records carrying an "answer"."""
    answers = {
        _query_key(record, answers_path, line_no): record.get("answer")
        for line_no, record in iter_jsonl(Path(answers_path))
    }
    correct = total = 0
    for line_no, record in iter_jsonl(Path(gold_path)):
        expected = record.get("answer", record.get("label"))
        if expected is None:
            continue
        total += 1
        correct += answers.get(_query_key(record, gold_path, line_no)) == expected
    return correct, total
