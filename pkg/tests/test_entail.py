"""Tests for yes/no answering."""

from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from legalir.corpus import Answer
from legalir.entail import (
    AnswerRecord,
    EntailmentPair,
    NegationLexicon,
    SampleOrigin,
    answer_entailment,
    answer_lawfulness,
    augment_lawfulness,
    build_entailment_pairs,
    classify_entailment_pairs,
    entailment_training_pairs,
    evaluate_answers,
    load_vocab,
    negate_sentence,
    run_task4_entailment,
    run_task4_lawfulness,
    vocab_overlap,
)
from legalir.exceptions import ArgumentError, ResolutionError
from legalir.lexical import tfidf_fit
from legalir.pairscore import ExternalScoreTable, PairLabel, TrainingHyper, train_unary


def _pair(article_id: str, predicted: PairLabel | None) -> EntailmentPair:
    return EntailmentPair("q", article_id, "question", f"article {article_id}", predicted)


@pytest.fixture
def tfidf(sample_articles):
    return tfidf_fit([(a.id, a.content) for a in sample_articles])


class TestAnswerEntailment:
    """Tests for the any-positive answer rule."""

    @pytest.mark.parametrize("size", [1, 2, 3])
    def test_exhaustive(self, size):
        """Yes iff at least one pair entails, for every label combination."""
        for labels in itertools.product([PairLabel.POSITIVE, PairLabel.NEGATIVE], repeat=size):
            pairs = [_pair(str(i), label) for i, label in enumerate(labels)]
            expected = Answer.YES if PairLabel.POSITIVE in labels else Answer.NO
            assert answer_entailment(pairs) is expected

    def test_empty(self):
        """No pairs means no answer."""
        with pytest.raises(ArgumentError):
            answer_entailment([])

    def test_missing_verdict(self):
        """Every pair must be classified first."""
        with pytest.raises(ArgumentError):
            answer_entailment([_pair("1", PairLabel.POSITIVE), _pair("2", None)])

    def test_joined_text_puts_question_first(self):
        """The question precedes the article in the joined text."""
        assert _pair("7", None).joined_text == "question\narticle 7"


class TestEntailmentPairs:
    """Tests for building and classifying question/article pairs."""

    def test_gold_first_and_deduplicated(self, tfidf, sample_articles, sample_questions):
        """Gold articles come first and extras never repeat them."""
        question = sample_questions[0]
        pairs = build_entailment_pairs(question, ["3"], tfidf, sample_articles)
        ids = [p.article_id for p in pairs]
        assert ids[0] == "3"
        assert len(ids) == len(set(ids))
        assert 2 <= len(ids) <= 3

    def test_extra_zero_keeps_gold_only(self, tfidf, sample_articles, sample_questions):
        """Without extras only gold pairs are built."""
        pairs = build_entailment_pairs(
            sample_questions[1], ["4", "4"], tfidf, sample_articles, extra=0
        )
        assert [p.article_id for p in pairs] == ["4"]

    def test_unknown_gold(self, tfidf, sample_articles, sample_questions):
        """Gold ids must resolve against the Civil Code."""
        with pytest.raises(ResolutionError):
            build_entailment_pairs(sample_questions[0], ["999"], tfidf, sample_articles)

    def test_classify_uses_threshold(self):
        """Pairs at or above the threshold are positive."""
        table = ExternalScoreTable({("q", "1"): 0.5, ("q", "2"): 0.49})
        verdicts = classify_entailment_pairs([_pair("1", None), _pair("2", None)], table)
        assert [p.predicted for p in verdicts] == [PairLabel.POSITIVE, PairLabel.NEGATIVE]

    def test_training_pairs_follow_answer(self, sample_articles, sample_questions):
        """Yes questions make positive pairs, No questions negative ones."""
        pairs = entailment_training_pairs(sample_questions, sample_articles)
        assert [p.label for p in pairs] == [
            PairLabel.POSITIVE,
            PairLabel.NEGATIVE,
            PairLabel.POSITIVE,
            PairLabel.NEGATIVE,
        ]

    def test_gold_source_pairs_relevant_articles_only(self, sample_articles, sample_questions):
        """The gold source links each question to its relevant articles and nothing else."""
        by_text = {a.content: a.id for a in sample_articles}
        pairs = entailment_training_pairs(sample_questions, sample_articles, "gold")
        assert [by_text[p.right] for p in pairs] == ["3", "4", "2", "1"]

    def test_tfidf_source_adds_top_articles(self, tfidf, sample_articles, sample_questions):
        """The tfidf source adds the top-2 articles; extras outside the gold set are negative."""
        by_text = {a.content: a.id for a in sample_articles}
        by_question = {q.content: q for q in sample_questions}
        pairs = entailment_training_pairs(sample_questions, sample_articles, "tfidf", tfidf)

        expected = sum(
            len(build_entailment_pairs(q, sorted(q.relevant_article_ids), tfidf, sample_articles))
            for q in sample_questions
        )
        assert len(pairs) == expected >= 2 * len(sample_questions)
        for pair in pairs:
            question = by_question[pair.left]
            if by_text[pair.right] in question.relevant_article_ids:
                yes = question.label is Answer.YES
                assert pair.label is (PairLabel.POSITIVE if yes else PairLabel.NEGATIVE)
            else:
                assert pair.label is PairLabel.NEGATIVE

    def test_tfidf_source_needs_model(self, sample_articles, sample_questions):
        """Without a Tf-idf model the tfidf source cannot find extras."""
        with pytest.raises(ArgumentError):
            entailment_training_pairs(sample_questions, sample_articles, "tfidf")

    def test_run_task4_entailment(self, tfidf, sample_articles, sample_questions):
        """One answer per question; a single entailing gold pair gives Yes."""
        table = ExternalScoreTable({("H29-1-A", "3"): 0.9})
        records = run_task4_entailment(sample_questions, sample_articles, tfidf, table)
        answers = {r.question_id: r.answer for r in records}
        assert answers == {
            "H29-1-A": Answer.YES,
            "H29-2-B": Answer.NO,
            "H28-1-A": Answer.NO,
            "H28-2-B": Answer.NO,
        }
        assert evaluate_answers(records, sample_questions).correct == 3


class TestNegation:
    """Tests for negation-based augmentation."""

    def test_inserts_not(self):
        """'shall' becomes 'shall not'."""
        assert negate_sentence("The lessee shall pay rent.") == "The lessee shall not pay rent."

    def test_removes_not(self):
        """'may not' becomes 'may'."""
        assert negate_sentence("The heir may not renounce.") == "The heir may renounce."

    @pytest.mark.parametrize(
        "sentence",
        [
            "The lessee shall pay rent.",
            "A guarantor is not liable.",
            "Shall the court decide?",
            "The agent could not act, and the principal must pay.",
        ],
    )
    def test_involution(self, sentence):
        """Negating twice restores the sentence."""
        assert negate_sentence(negate_sentence(sentence)) == sentence

    def test_no_auxiliary(self):
        """Sentences without an auxiliary cannot be negated."""
        assert negate_sentence("This contract binds both parties.") is None

    def test_custom_lexicon(self):
        """Only the listed auxiliaries are used."""
        lexicon = NegationLexicon(auxiliaries=("ought",))
        assert negate_sentence("The agent shall act.", lexicon) is None
        assert negate_sentence("One ought to act.", lexicon) == "One ought not to act."

    def test_empty_lexicon(self):
        """A lexicon needs at least one word."""
        with pytest.raises(ArgumentError):
            NegationLexicon(auxiliaries=())

    def test_augment(self, sample_articles, sample_questions):
        """Each original is followed by its negation with the opposite label."""
        samples = augment_lawfulness(sample_articles, sample_questions)
        assert len(samples) == 16
        for original, negated in zip(samples[::2], samples[1::2]):
            assert original.origin is not SampleOrigin.AUGMENTED
            assert negated.origin is SampleOrigin.AUGMENTED
            assert negated.label is original.label.flipped()
            assert negate_sentence(negated.text) == original.text
        articles = [s for s in samples if s.origin is SampleOrigin.CIVIL_CODE_SENTENCE]
        assert all(s.label is Answer.YES for s in articles)


class TestLawfulness:
    """Tests for the lawfulness answering path."""

    def test_half_score_answers_yes(self, sample_questions):
        """A score of exactly 0.5 answers Yes."""
        classifier = train_unary(["a b", "c d"], [True, False], TrainingHyper(epochs=0, dim=16))
        assert answer_lawfulness("anything", classifier) is Answer.YES
        records = run_task4_lawfulness(sample_questions, classifier)
        assert [r.approach for r in records] == ["lawfulness"] * 4
        assert records[0].to_dict() == {
            "question_id": "H29-1-A",
            "answer": "Y",
            "approach": "lawfulness",
        }

    def test_planted_token_decides_answer(self):
        """A classifier trained on a separable planted token answers by that token."""
        subjects = ["the obligor", "a lessee", "the guarantor", "a possessor", "the mortgagee"]
        verbs = ["claim", "perform"]
        lawful = [f"{s} grantable {v}" for s in subjects for v in verbs]
        unlawful = [f"{s} forbidden {v}" for s in subjects for v in verbs]
        classifier = train_unary(
            lawful + unlawful,
            [True] * len(lawful) + [False] * len(unlawful),
            TrainingHyper(epochs=20, lr=0.5),
        )
        assert answer_lawfulness("the lessor grantable claim", classifier) is Answer.YES
        assert answer_lawfulness("the lessor forbidden claim", classifier) is Answer.NO

    def test_evaluate_answers_skips_unanswered(self, sample_questions):
        """Only answered, labeled questions count."""
        score = evaluate_answers({"H29-1-A": Answer.YES, "H29-2-B": Answer.YES}, sample_questions)
        assert (score.correct, score.total, score.accuracy) == (1, 2, 0.5)

    def test_evaluate_answer_records(self, sample_questions):
        """A list of answer records is scored like a mapping."""
        records = [AnswerRecord("H29-1-A", Answer.YES, "entailment")]
        assert evaluate_answers(records, sample_questions).accuracy == 1.0


class TestVocabulary:
    """Tests for vocabulary comparison helpers."""

    def test_overlap(self, tmp_path: Path):
        """Shared and exclusive counts come from set arithmetic."""
        path = tmp_path / "vocab.txt"
        path.write_text("lien\n\nmortgage\nlease\n", encoding="utf-8")
        vocab = load_vocab(path)
        assert vocab == frozenset({"lien", "mortgage", "lease"})
        assert vocab_overlap(vocab, ["lease", "tort"]) == (1, 2, 1)
