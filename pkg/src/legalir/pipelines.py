"""Two-stage retrieval: lexical filtering, supporting-score fusion, selection.

Fusion of one candidate is ``alpha * supporting + (1 - alpha) * lexical`` with
the lexical component min-max normalised per query beforehand. Rankings are
ordered by fused score descending, ties by ascending candidate id.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .corpus import BarQuestion, CaseDocument, CaseQuery, FragmentQuery, StatuteArticle
from .exceptions import (
    ArgumentError,
    ConfigurationError,
    LegalIRError,
    ResolutionError,
    ScoreRangeError,
)
from .lexical import (
    DEFAULT_TOKENIZER,
    Bm25Params,
    CosineRanker,
    InvertedIndex,
    TfidfModel,
    TokenizerConfig,
    Unit,
    build_index,
    tokenize,
)
from .pairscore import (
    ExternalScoreTable,
    LinearPairScorer,
    PairLabel,
    PairScorer,
    TextPair,
    TrainingHyper,
    continue_training,
)

logger = logging.getLogger(__name__)

Normalization = Literal["minmax_per_query", "none"]
Aggregation = Literal["max", "mean_top_m"]

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Selection:
    """Final selection rule: fused-score threshold or a fixed-size prefix."""

    mode: Literal["threshold", "fixed_k"] = "threshold"
    value: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if self.mode == "fixed_k":
            if self.value < 1 or int(self.value) != self.value:
                raise ArgumentError(f"fixed_k needs an integer >= 1, got {self.value}")
        elif self.mode != "threshold":
            raise ArgumentError(f"unknown selection mode: {self.mode!r}")

    @classmethod
    def threshold(cls, tau: float = DEFAULT_THRESHOLD) -> Selection:
        return cls("threshold", float(tau))

    @classmethod
    def fixed_k(cls, m: int) -> Selection:
        return cls("fixed_k", m)

    def apply(self, ranked: Sequence[RankedCandidate]) -> tuple[str, ...]:
        if self.mode == "fixed_k":
            return tuple(r.candidate_id for r in ranked[: int(self.value)])
        return tuple(r.candidate_id for r in ranked if r.fused >= self.value)

    def describe(self) -> str:
        if self.mode == "fixed_k":
            return f"fixed_k({int(self.value)})"
        return f"threshold({self.value})"


@dataclass(frozen=True)
class FusionConfig:
    """How lexical and supporting scores become one decision."""

    alpha: float = 0.85
    top_n: int = 25
    normalization: Normalization = "minmax_per_query"
    selection: Selection = field(default_factory=Selection)
    aggregation: Aggregation = "max"
    top_m: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.top_n < 1:
            raise ArgumentError(f"top_n must be >= 1, got {self.top_n}")
        if self.normalization not in ("minmax_per_query", "none"):
            raise ArgumentError(f"unknown normalization: {self.normalization!r}")
        if self.aggregation not in ("max", "mean_top_m"):
            raise ArgumentError(f"unknown aggregation: {self.aggregation!r}")
        if self.top_m < 1:
            raise ArgumentError(f"top_m must be >= 1, got {self.top_m}")


@dataclass(frozen=True)
class RankedCandidate:
    candidate_id: str
    fused: float
    bm25: float
    supporting: float


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked survivors of one query and the ids selected from them."""

    query_id: str
    ranked: tuple[RankedCandidate, ...]
    selected: tuple[str, ...]
    missing_scores: int = 0

    @property
    def selected_set(self) -> frozenset[str]:
        return frozenset(self.selected)

    @property
    def ranked_ids(self) -> list[str]:
        return [r.candidate_id for r in self.ranked]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "selected": list(self.selected),
            "ranked": [[r.candidate_id, r.fused] for r in self.ranked],
        }


# --------------------------------------------------------------------------
# Score arithmetic
# --------------------------------------------------------------------------


def normalize_scores(
    raw: Mapping[str, float], mode: Normalization = "minmax_per_query"
) -> dict[str, float]:
    """Min-max normalise one query's scores; all-equal inputs map to 1.0."""
    if not raw:
        raise ArgumentError("cannot normalize an empty score map")
    if mode == "none":
        return dict(raw)
    if mode != "minmax_per_query":
        raise ArgumentError(f"unknown normalization: {mode!r}")
    low, high = min(raw.values()), max(raw.values())
    if high == low:
        return {key: 1.0 for key in raw}
    span = high - low
    return {key: (value - low) / span for key, value in raw.items()}


def fuse(bm25_norm: float, supporting: float, alpha: float) -> float:
    """``alpha * supporting + (1 - alpha) * bm25_norm``."""
    for name, value in (("bm25_norm", bm25_norm), ("supporting", supporting), ("alpha", alpha)):
        if not 0.0 <= value <= 1.0:
            raise ScoreRangeError(f"{name} must lie in [0, 1], got {value}", value)
    return alpha * supporting + (1.0 - alpha) * bm25_norm


def aggregate_paragraph_scores(
    matrix: np.ndarray | Sequence[Sequence[float]], mode: Aggregation = "max", m: int = 3
) -> float:
    """Collapse a paragraph-pair score matrix into one document score."""
    values = np.asarray(matrix, dtype=np.float64).ravel()
    if values.size == 0:
        raise ArgumentError("cannot aggregate an empty score matrix")
    if mode == "max":
        return float(values.max())
    if mode == "mean_top_m":
        if m < 1:
            raise ArgumentError(f"m must be >= 1, got {m}")
        top = np.sort(values)[::-1][:m]
        return float(top.mean())
    raise ArgumentError(f"unknown aggregation: {mode!r}")


def rank_candidates(
    bm25_norm: Mapping[str, float],
    supporting: Mapping[str, float],
    alpha: float,
) -> list[RankedCandidate]:
    ranked = [
        RankedCandidate(
            cid, fuse(bm25_norm[cid], supporting[cid], alpha), bm25_norm[cid], supporting[cid]
        )
        for cid in bm25_norm
    ]
    ranked.sort(key=lambda r: (-r.fused, r.candidate_id))
    return ranked


def _finish(
    query_id: str,
    bm25_raw: Mapping[str, float],
    supporting: Mapping[str, float],
    fusion: FusionConfig,
    missing: int = 0,
) -> RetrievalResult:
    bm25_norm = normalize_scores(bm25_raw, fusion.normalization)
    ranked = rank_candidates(bm25_norm, supporting, fusion.alpha)
    return RetrievalResult(query_id, tuple(ranked), fusion.selection.apply(ranked), missing)


def _require_bounded_lexical(fusion: FusionConfig) -> None:
    # Raw BM25 is unbounded and cannot enter the fusion unnormalised
    if fusion.normalization == "none":
        raise ConfigurationError(
            "normalization=none needs a lexical score table in [0, 1], not BM25",
            key="normalization",
        )


def ensemble_or(predictions: Sequence[Iterable[str]]) -> frozenset[str]:
    """Union of member predictions: positive if any member says so."""
    if not predictions:
        raise ArgumentError("ensemble_or needs at least one prediction set")
    union: set[str] = set()
    for prediction in predictions:
        union.update(prediction)
    return frozenset(union)


# --------------------------------------------------------------------------
# Task 1: case law retrieval
# --------------------------------------------------------------------------


def paragraph_index(
    doc: CaseDocument, config: TokenizerConfig = DEFAULT_TOKENIZER
) -> InvertedIndex:
    """BM25 index over one case's paragraphs, unit ids "0".."n-1"."""
    return build_index([(str(p.ordinal), p.text) for p in doc.paragraphs], config)


def _supporting_case_score(
    scorer: PairScorer,
    base_case: CaseDocument,
    candidate: CaseDocument,
    fusion: FusionConfig,
) -> float:
    if isinstance(scorer, ExternalScoreTable):
        return scorer.score((base_case.id, candidate.id))
    if isinstance(scorer, LinearPairScorer):
        matrix = scorer.score_matrix(base_case.texts, candidate.texts)
    else:
        matrix = np.array(
            [[scorer.score(TextPair(q, c)) for c in candidate.texts] for q in base_case.texts]
        )
    return aggregate_paragraph_scores(matrix, fusion.aggregation, fusion.top_m)


def run_task1(
    base_case: CaseDocument,
    candidate_cases: Sequence[CaseDocument],
    scorer: PairScorer,
    bm25_params: Bm25Params = Bm25Params(),
    fusion: FusionConfig = FusionConfig(),
    *,
    tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
    indexes: dict[str, InvertedIndex] | None = None,
) -> RetrievalResult:
    """Retrieve the cases that support ``base_case``.

    Stage 1 keeps the ``top_n`` candidates by aggregated paragraph BM25.
    Stage 2 scores only those survivors with the supporting scorer and fuses.
    ``indexes`` caches per-candidate paragraph indexes between queries.
    """
    if not candidate_cases:
        raise ArgumentError(f"query {base_case.id!r} has no candidate cases")
    _require_bounded_lexical(fusion)
    indexes = {} if indexes is None else indexes
    try:
        query_tokens = [tokenize(text, tokenizer) for text in base_case.texts]
        lexical: dict[str, float] = {}
        for candidate in candidate_cases:
            index = indexes.get(candidate.id)
            if index is None:
                index = indexes[candidate.id] = paragraph_index(candidate, tokenizer)
            matrix = np.vstack([index.score_all(tokens, bm25_params) for tokens in query_tokens])
            lexical[candidate.id] = aggregate_paragraph_scores(
                matrix, fusion.aggregation, fusion.top_m
            )

        survivors = sorted(lexical, key=lambda cid: (-lexical[cid], cid))[: fusion.top_n]
        by_id = {c.id: c for c in candidate_cases}
        supporting = {
            cid: _supporting_case_score(scorer, base_case, by_id[cid], fusion) for cid in survivors
        }
        missing = (
            scorer.missing(base_case.id, survivors)
            if isinstance(scorer, ExternalScoreTable)
            else 0
        )
        kept = {cid: lexical[cid] for cid in survivors}
        return _finish(base_case.id, kept, supporting, fusion, missing)
    except LegalIRError as e:
        logger.error("Task 1 query %s failed: %s", base_case.id, e)
        raise


def run_task1_batch(
    cases: Sequence[CaseDocument],
    queries: Sequence[CaseQuery],
    scorer: PairScorer,
    bm25_params: Bm25Params = Bm25Params(),
    fusion: FusionConfig = FusionConfig(),
    *,
    tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
    on_result: Callable[[RetrievalResult], None] | None = None,
) -> list[RetrievalResult]:
    """Run Task 1 for each query in order, sharing candidate indexes."""
    by_id = {c.id: c for c in cases}
    indexes: dict[str, InvertedIndex] = {}
    results = []
    for query in queries:
        if query.query_id not in by_id:
            raise ResolutionError(f"query case {query.query_id!r} is not in the corpus")
        if query.candidates is None:
            candidate_ids = [c.id for c in cases if c.id != query.query_id]
        else:
            candidate_ids = list(query.candidates)
        unknown = [cid for cid in candidate_ids if cid not in by_id]
        if unknown:
            raise ResolutionError(
                f"query {query.query_id!r} lists unknown candidate(s): {', '.join(unknown[:5])}"
            )
        result = run_task1(
            by_id[query.query_id],
            [by_id[cid] for cid in candidate_ids],
            scorer,
            bm25_params,
            fusion,
            tokenizer=tokenizer,
            indexes=indexes,
        )
        results.append(result)
        if on_result:
            on_result(result)
    return results


# --------------------------------------------------------------------------
# Task 2: paragraph entailment retrieval
# --------------------------------------------------------------------------


def run_task2(
    fragment: str,
    candidate_paragraphs: Sequence[Unit],
    scorer: PairScorer,
    lexical_scorer: Literal["bm25"] | ExternalScoreTable = "bm25",
    fusion: FusionConfig = FusionConfig(),
    *,
    query_id: str = "",
    bm25_params: Bm25Params = Bm25Params(),
    tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
) -> RetrievalResult:
    """Find the candidate paragraphs that entail ``fragment``.

    The lexical slot is BM25 over the candidate paragraphs or an external
    score table; the supporting slot never takes an external table.
    """
    if not candidate_paragraphs:
        raise ArgumentError(f"query {query_id!r} has no candidate paragraphs")
    if isinstance(scorer, ExternalScoreTable):
        raise ConfigurationError(
            "external score tables occupy the lexical slot in Task 2, not the supporting slot",
            key="external_scores",
        )
    ids = [cid for cid, _ in candidate_paragraphs]
    missing = 0
    if isinstance(lexical_scorer, ExternalScoreTable):
        external = lexical_scorer.score_candidates(query_id, fragment, candidate_paragraphs)
        lexical = dict(zip(ids, external.tolist()))
        missing = lexical_scorer.missing(query_id, ids)
        if missing:
            logger.warning("query %s: %d candidate(s) without an external score", query_id, missing)
    elif lexical_scorer == "bm25":
        _require_bounded_lexical(fusion)
        index = build_index(candidate_paragraphs, tokenizer)
        scores = index.score_all(tokenize(fragment, tokenizer), bm25_params)
        lexical = dict(zip(index.unit_ids, scores.tolist()))
    else:
        raise ConfigurationError(f"unknown lexical scorer: {lexical_scorer!r}")

    scores = scorer.score_candidates(query_id, fragment, candidate_paragraphs)
    supporting = dict(zip(ids, scores.tolist()))
    return _finish(query_id, lexical, supporting, fusion, missing)


def task2_training_pairs(queries: Iterable[FragmentQuery]) -> list[TextPair]:
    """Every (fragment, candidate) of labeled queries, positive iff the candidate is gold."""
    pairs = []
    for query in queries:
        for cid, text in query.candidates:
            label = PairLabel.POSITIVE if cid in query.gold else PairLabel.NEGATIVE
            pairs.append(TextPair(query.fragment, text, label))
    return pairs


def prepare_task2_scorer(
    setting: int,
    scorer: LinearPairScorer,
    train_queries: Sequence[FragmentQuery],
    hyper: TrainingHyper | None = None,
) -> LinearPairScorer:
    """Setting 1 keeps the weak scorer; settings 2 and 3 fine-tune it on Task 2 data."""
    if setting not in (1, 2, 3):
        raise ConfigurationError(
            f"task2_setting must be 1, 2 or 3, got {setting}", key="task2_setting"
        )
    if setting == 1:
        return scorer
    pairs = task2_training_pairs(train_queries)
    if not pairs:
        raise ConfigurationError(
            "settings 2 and 3 need queries with split=train", key="task2_queries"
        )
    return continue_training(scorer, pairs, hyper)


def run_task2_batch(
    queries: Sequence[FragmentQuery],
    scorer: PairScorer,
    lexical_scorer: Literal["bm25"] | ExternalScoreTable = "bm25",
    fusion: FusionConfig = FusionConfig(),
    *,
    bm25_params: Bm25Params = Bm25Params(),
    tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
    on_result: Callable[[RetrievalResult], None] | None = None,
) -> list[RetrievalResult]:
    results = []
    for query in queries:
        result = run_task2(
            query.fragment,
            query.candidates,
            scorer,
            lexical_scorer,
            fusion,
            query_id=query.query_id,
            bm25_params=bm25_params,
            tokenizer=tokenizer,
        )
        results.append(result)
        if on_result:
            on_result(result)
    return results


# --------------------------------------------------------------------------
# Task 3: statute law retrieval
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Task3Result:
    """Per-question Task 3 outcome, member votes included."""

    question_id: str
    candidates: tuple[str, ...]
    member_selections: tuple[frozenset[str], ...]
    selected: frozenset[str]
    fallback: bool

    def to_dict(self) -> dict:
        return {
            "query_id": self.question_id,
            "selected": sorted(self.selected),
            "ranked": list(self.candidates),
            "fallback": self.fallback,
        }


def _article_ranker(articles: Sequence[StatuteArticle], tfidf_model: TfidfModel) -> CosineRanker:
    return CosineRanker(tfidf_model, [(a.id, a.content) for a in articles])


def task3_predict(
    question: BarQuestion,
    articles: Sequence[StatuteArticle],
    tfidf_model: TfidfModel,
    k: int,
    classifiers: Sequence[PairScorer],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    ranker: CosineRanker | None = None,
) -> Task3Result:
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if not articles:
        raise ArgumentError(f"question {question.id!r} has no articles to retrieve from")
    if not classifiers:
        raise ArgumentError("Task 3 needs at least one classifier")
    tfidf_model.require_fitted()
    ranker = ranker or _article_ranker(articles, tfidf_model)
    by_id = {a.id: a for a in articles}
    top = [aid for aid, _ in ranker.rank(question.content, k)]
    candidates = [(aid, by_id[aid].content) for aid in top]

    members = []
    for classifier in classifiers:
        scores = classifier.score_candidates(question.id, question.content, candidates)
        members.append(frozenset(aid for aid, s in zip(top, scores) if s >= threshold))
    selected = ensemble_or(members)
    fallback = not selected
    if fallback:
        selected = frozenset(top[:1])
    return Task3Result(question.id, tuple(top), tuple(members), selected, fallback)


def run_task3(
    question: BarQuestion,
    articles: Sequence[StatuteArticle],
    tfidf_model: TfidfModel,
    k: int,
    classifiers: Sequence[PairScorer],
    threshold: float = DEFAULT_THRESHOLD,
) -> frozenset[str]:
    """Relevant article ids for one question; never empty.

    Raises ArgumentError when there are no articles to choose from.
    """
    return task3_predict(question, articles, tfidf_model, k, classifiers, threshold).selected


def run_task3_batch(
    questions: Sequence[BarQuestion],
    articles: Sequence[StatuteArticle],
    tfidf_model: TfidfModel,
    k: int,
    classifiers: Sequence[PairScorer],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    on_result: Callable[[Task3Result], None] | None = None,
) -> list[Task3Result]:
    if not articles:
        raise ArgumentError("Task 3 needs at least one article")
    tfidf_model.require_fitted()
    ranker = _article_ranker(articles, tfidf_model)
    results = []
    for question in questions:
        result = task3_predict(
            question, articles, tfidf_model, k, classifiers, threshold, ranker=ranker
        )
        results.append(result)
        if on_result:
            on_result(result)
    return results


@dataclass(frozen=True)
class KSweep:
    recall: dict[int, float]
    skipped: int = 0


def sweep_k(
    labeled_questions: Sequence[BarQuestion],
    articles: Sequence[StatuteArticle],
    tfidf_model: TfidfModel,
    k_values: Sequence[int],
) -> KSweep:
    """Recall of the Tf-idf top-k filter for each k over all gold (question, article) pairs."""
    if not k_values:
        raise ArgumentError("k_values is empty")
    for k in k_values:
        if k < 1:
            raise ArgumentError(f"k must be >= 1, got {k}")
    ranker = _article_ranker(articles, tfidf_model)
    known = set(ranker.unit_ids)

    gold_ranks: list[int] = []
    skipped = 0
    for question in labeled_questions:
        if not question.relevant_article_ids:
            skipped += 1
            continue
        unknown = question.relevant_article_ids - known
        if unknown:
            raise ResolutionError(
                f"question {question.id!r} references unknown article(s): "
                f"{', '.join(sorted(unknown))}"
            )
        position = {aid: i for i, (aid, _) in enumerate(ranker.rank(question.content))}
        gold_ranks.extend(position[aid] + 1 for aid in question.relevant_article_ids)
    if skipped:
        logger.warning("Skipped %d question(s) with no gold articles", skipped)
    if not gold_ranks:
        raise ArgumentError("no question carries gold articles")

    ranks = np.array(gold_ranks)
    recall = {k: float(np.count_nonzero(ranks <= k) / ranks.size) for k in sorted(set(k_values))}
    return KSweep(recall, skipped)


@dataclass(frozen=True)
class MemberComparison:
    only_a: int
    only_b: int
    both: int

    def to_dict(self) -> dict:
        return {"only_a": self.only_a, "only_b": self.only_b, "both": self.both}


def compare_members(
    predictions_a: Mapping[str, Iterable[str]],
    predictions_b: Mapping[str, Iterable[str]],
    gold: Mapping[str, Iterable[str]],
) -> MemberComparison:
    """Count correct (query, id) pairs found by A only, B only, or both."""
    only_a = only_b = both = 0
    for query_id, gold_ids in gold.items():
        truth = set(gold_ids)
        hit_a = set(predictions_a.get(query_id, ())) & truth
        hit_b = set(predictions_b.get(query_id, ())) & truth
        both += len(hit_a & hit_b)
        only_a += len(hit_a - hit_b)
        only_b += len(hit_b - hit_a)
    return MemberComparison(only_a, only_b, both)
