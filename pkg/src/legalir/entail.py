"""Yes/no answering of bar exam questions.

Two approaches are supported:

- entailment: pair the question with its relevant articles plus the two best
  Tf-idf extras, classify every pair, answer Yes if any pair entails.
- lawfulness: classify the question text alone with a classifier trained on
  Civil Code sentences, bar questions and their negated variants.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Literal, NamedTuple

from .corpus import Answer, BarQuestion, StatuteArticle, split_sentences
from .evaluation import accuracy
from .exceptions import ArgumentError, ResolutionError
from .lexical import CosineRanker, TfidfModel
from .pairscore import LawfulnessClassifier, PairLabel, PairScorer, TextPair

logger = logging.getLogger(__name__)

Approach = Literal["entailment", "lawfulness"]
TrainSource = Literal["gold", "tfidf"]

PAIR_SEPARATOR = "\n"
DEFAULT_EXTRA_ARTICLES = 2
DEFAULT_AUXILIARIES = (
    "can", "could", "did", "do", "does", "had", "has", "have", "is", "are",
    "may", "might", "must", "shall", "should", "was", "were", "will", "would",
)


class SampleOrigin(str, Enum):
    CIVIL_CODE_SENTENCE = "civil_code_sentence"
    BAR_QUESTION = "bar_question"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class EntailmentPair:
    """A question linked to one article; question text comes first."""

    question_id: str
    article_id: str
    question_text: str
    article_text: str
    predicted: PairLabel | None = None

    @property
    def joined_text(self) -> str:
        return f"{self.question_text}{PAIR_SEPARATOR}{self.article_text}"


@dataclass(frozen=True)
class LawfulnessSample:
    text: str
    label: Answer
    origin: SampleOrigin

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ArgumentError("lawfulness sample text must be non-empty")


@dataclass(frozen=True)
class AnswerRecord:
    question_id: str
    answer: Answer
    approach: Approach

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "answer": self.answer.value,
            "approach": self.approach,
        }


class VocabOverlap(NamedTuple):
    shared: int
    only_a: int
    only_b: int


# --------------------------------------------------------------------------
# Entailment approach
# --------------------------------------------------------------------------


def build_entailment_pairs(
    question: BarQuestion,
    gold_article_ids: Iterable[str],
    tfidf_model: TfidfModel,
    articles: Sequence[StatuteArticle],
    extra: int = DEFAULT_EXTRA_ARTICLES,
    *,
    ranker: CosineRanker | None = None,
) -> list[EntailmentPair]:
    """Gold articles first, then the Tf-idf top-``extra`` articles not already present."""
    tfidf_model.require_fitted()
    by_id = {a.id: a for a in articles}
    gold = list(dict.fromkeys(gold_article_ids))
    unknown = [aid for aid in gold if aid not in by_id]
    if unknown:
        raise ResolutionError(
            f"question {question.id!r} references unknown article(s): {', '.join(unknown)}"
        )
    ranker = ranker or CosineRanker(tfidf_model, [(a.id, a.content) for a in articles])
    extras = [aid for aid, _ in ranker.rank(question.content, extra)] if extra > 0 else []

    ordered = list(dict.fromkeys(gold + extras))
    return [
        EntailmentPair(question.id, aid, question.content, by_id[aid].content)
        for aid in ordered
    ]


def classify_entailment_pairs(
    pairs: Sequence[EntailmentPair], scorer: PairScorer, threshold: float = 0.5
) -> list[EntailmentPair]:
    """Attach a verdict to every pair: positive iff the scorer gives at least ``threshold``."""
    if not pairs:
        return []
    scores = scorer.score_candidates(
        pairs[0].question_id,
        pairs[0].question_text,
        [(p.article_id, p.article_text) for p in pairs],
    )
    return [
        replace(p, predicted=PairLabel.POSITIVE if s >= threshold else PairLabel.NEGATIVE)
        for p, s in zip(pairs, scores)
    ]


def answer_entailment(pairs: Sequence[EntailmentPair]) -> Answer:
    """Yes iff at least one pair is classified as entailing."""
    if not pairs:
        raise ArgumentError("cannot answer from zero entailment pairs")
    if any(p.predicted is None for p in pairs):
        raise ArgumentError("every entailment pair needs a verdict")
    return Answer.YES if any(p.predicted is PairLabel.POSITIVE for p in pairs) else Answer.NO


def entailment_training_pairs(
    questions: Sequence[BarQuestion],
    articles: Sequence[StatuteArticle],
    source: TrainSource = "gold",
    tfidf_model: TfidfModel | None = None,
    extra: int = DEFAULT_EXTRA_ARTICLES,
) -> list[TextPair]:
    """Labeled (question, article) pairs for the entailment scorer.

    With ``source="gold"`` each labeled question is paired with its relevant
    articles, positive iff the answer is Yes. ``source="tfidf"`` also adds the
    Tf-idf top-``extra`` articles the question is paired with at prediction
    time; those not among the relevant articles are negative.
    """
    if source not in ("gold", "tfidf"):
        raise ArgumentError(f"unknown training source: {source!r}")
    if source == "tfidf" and tfidf_model is None:
        raise ArgumentError("source='tfidf' needs a fitted Tf-idf model")
    by_id = {a.id: a for a in articles}
    ranker = (
        CosineRanker(tfidf_model, [(a.id, a.content) for a in articles])
        if source == "tfidf"
        else None
    )
    pairs = []
    for question in questions:
        if question.label is None:
            continue
        label = PairLabel.POSITIVE if question.label is Answer.YES else PairLabel.NEGATIVE
        gold = sorted(question.relevant_article_ids)
        if ranker is None:
            unknown = [aid for aid in gold if aid not in by_id]
            if unknown:
                raise ResolutionError(
                    f"question {question.id!r} references unknown article(s): "
                    f"{', '.join(unknown)}"
                )
            pairs.extend(TextPair(question.content, by_id[aid].content, label) for aid in gold)
            continue
        linked = build_entailment_pairs(
            question, gold, tfidf_model, articles, extra, ranker=ranker
        )
        pairs.extend(
            TextPair(
                p.question_text,
                p.article_text,
                label if p.article_id in question.relevant_article_ids else PairLabel.NEGATIVE,
            )
            for p in linked
        )
    logger.debug("%d entailment training pair(s) from %s", len(pairs), source)
    return pairs


def run_task4_entailment(
    questions: Sequence[BarQuestion],
    articles: Sequence[StatuteArticle],
    tfidf_model: TfidfModel,
    scorer: PairScorer,
    threshold: float = 0.5,
) -> list[AnswerRecord]:
    ranker = CosineRanker(tfidf_model, [(a.id, a.content) for a in articles])
    records = []
    for question in questions:
        pairs = build_entailment_pairs(
            question, sorted(question.relevant_article_ids), tfidf_model, articles, ranker=ranker
        )
        verdicts = classify_entailment_pairs(pairs, scorer, threshold)
        records.append(AnswerRecord(question.id, answer_entailment(verdicts), "entailment"))
    return records


# --------------------------------------------------------------------------
# Lawfulness approach
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NegationLexicon:
    """Words after which "not" is inserted or removed to flip a statement."""

    auxiliaries: tuple[str, ...] = DEFAULT_AUXILIARIES

    def __post_init__(self) -> None:
        if not self.auxiliaries:
            raise ArgumentError("negation lexicon needs at least one auxiliary")

    def pattern(self) -> re.Pattern[str]:
        words = sorted(self.auxiliaries, key=len, reverse=True)
        alternation = "|".join(re.escape(w) for w in words)
        return re.compile(rf"\b({alternation})\b(\s+not\b)?", re.IGNORECASE)


DEFAULT_LEXICON = NegationLexicon()


def negate_sentence(text: str, lexicon: NegationLexicon = DEFAULT_LEXICON) -> str | None:
    """Flip the first auxiliary: "shall" becomes "shall not" and back.

    Returns None when the sentence has no auxiliary to work on. Applying it
    twice returns the original sentence.
    """
    match = lexicon.pattern().search(text)
    if match is None:
        return None
    if match.group(2):
        return text[: match.end(1)] + text[match.end(2) :]
    return text[: match.end(1)] + " not" + text[match.end(1) :]


def augment_lawfulness(
    articles: Sequence[StatuteArticle],
    questions: Sequence[BarQuestion],
    lexicon: NegationLexicon = DEFAULT_LEXICON,
) -> list[LawfulnessSample]:
    """Training samples for the lawfulness classifier.

    Civil Code sentences are lawful (Yes); labeled bar questions keep their
    label. Each original is followed by its negation with the opposite label
    when the sentence can be negated.
    """
    originals: list[LawfulnessSample] = []
    for article in articles:
        for sentence in split_sentences(article.content):
            originals.append(
                LawfulnessSample(sentence, Answer.YES, SampleOrigin.CIVIL_CODE_SENTENCE)
            )
    for question in questions:
        if question.label is not None:
            originals.append(
                LawfulnessSample(question.content, question.label, SampleOrigin.BAR_QUESTION)
            )

    samples: list[LawfulnessSample] = []
    skipped = 0
    for sample in originals:
        samples.append(sample)
        negated = negate_sentence(sample.text, lexicon)
        if negated is None:
            skipped += 1
            continue
        samples.append(LawfulnessSample(negated, sample.label.flipped(), SampleOrigin.AUGMENTED))
    if skipped:
        logger.debug("%d sentence(s) had no auxiliary to negate", skipped)
    return samples


def answer_lawfulness(question_text: str, classifier: LawfulnessClassifier) -> Answer:
    """Yes iff the classifier scores the text at least 0.5."""
    return Answer.YES if classifier.score(question_text) >= 0.5 else Answer.NO


def run_task4_lawfulness(
    questions: Sequence[BarQuestion], classifier: LawfulnessClassifier
) -> list[AnswerRecord]:
    return [
        AnswerRecord(q.id, answer_lawfulness(q.content, classifier), "lawfulness")
        for q in questions
    ]


# --------------------------------------------------------------------------
# Analysis
# --------------------------------------------------------------------------


def vocab_overlap(vocab_a: Iterable[str], vocab_b: Iterable[str]) -> VocabOverlap:
    a, b = set(vocab_a), set(vocab_b)
    return VocabOverlap(len(a & b), len(a - b), len(b - a))


def load_vocab(path: Path) -> frozenset[str]:
    """One token per line; blank lines are ignored."""
    with open(path, encoding="utf-8") as f:
        return frozenset(line.strip() for line in f if line.strip())


@dataclass(frozen=True)
class AnswerScore:
    correct: int
    total: int
    accuracy: float

    def to_dict(self) -> dict:
        return {"correct": self.correct, "total": self.total, "accuracy": self.accuracy}


def evaluate_answers(
    answers: Mapping[str, Answer] | Sequence[AnswerRecord], questions: Sequence[BarQuestion]
) -> AnswerScore:
    """Accuracy over the labeled questions that received an answer."""
    if not isinstance(answers, Mapping):
        answers = {r.question_id: r.answer for r in answers}
    scored = [q for q in questions if q.label is not None and q.id in answers]
    correct = sum(1 for q in scored if answers[q.id] == q.label)
    return AnswerScore(correct, len(scored), accuracy(correct, len(scored)))
