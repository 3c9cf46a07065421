"""Tests for score fusion, selection and the retrieval pipelines."""

from __future__ import annotations

import numpy as np
import pytest

from legalir.corpus import BarQuestion, CaseDocument, CaseQuery, FragmentQuery
from legalir.exceptions import (
    ArgumentError,
    ConfigurationError,
    ResolutionError,
    ScoreRangeError,
)
from legalir.lexical import tfidf_fit
from legalir.pairscore import ExternalScoreTable, LinearPairScorer
from legalir.pipelines import (
    FusionConfig,
    RankedCandidate,
    Selection,
    aggregate_paragraph_scores,
    compare_members,
    ensemble_or,
    fuse,
    normalize_scores,
    prepare_task2_scorer,
    rank_candidates,
    run_task1,
    run_task1_batch,
    run_task2,
    run_task3,
    run_task3_batch,
    sweep_k,
    task2_training_pairs,
    task3_predict,
)
from legalir.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture
def task1_cases() -> tuple[CaseDocument, list[CaseDocument]]:
    base = CaseDocument.from_texts("q", ["contract breach damages", "notice was served"])
    candidates = [
        CaseDocument.from_texts("a", ["contract breach damages awarded"]),
        CaseDocument.from_texts("b", ["contract only", "nothing else"]),
        CaseDocument.from_texts("c", ["unrelated words entirely"]),
    ]
    return base, candidates


class TestScoreArithmetic:
    """Tests for normalization, fusion and aggregation."""

    def test_minmax(self):
        """Scores map linearly onto [0, 1]."""
        assert normalize_scores({"a": 1.0, "b": 3.0, "c": 5.0}) == {"a": 0.0, "b": 0.5, "c": 1.0}

    def test_all_equal_maps_to_one(self):
        """A query with identical scores normalizes to 1.0 everywhere."""
        assert normalize_scores({"a": 2.0, "b": 2.0}) == {"a": 1.0, "b": 1.0}

    def test_none_passes_through(self):
        """Normalization 'none' returns the raw scores."""
        assert normalize_scores({"a": 7.5}, "none") == {"a": 7.5}

    def test_empty_map(self):
        """Nothing to normalize is an argument error."""
        with pytest.raises(ArgumentError):
            normalize_scores({})

    def test_fuse_value(self):
        """alpha weights the supporting score."""
        assert fuse(0.2, 0.8, 0.85) == pytest.approx(0.71)

    def test_fuse_stays_in_unit_interval(self):
        """Fused scores of in-range inputs stay in [0, 1]."""
        rng = np.random.default_rng(0)
        for b, s, alpha in rng.random((200, 3)):
            assert 0.0 <= fuse(b, s, alpha) <= 1.0

    def test_fuse_out_of_range(self):
        """A supporting score above 1 raises ScoreRangeError."""
        with pytest.raises(ScoreRangeError):
            fuse(0.5, 1.2, 0.5)

    def test_aggregate_max(self):
        """'max' takes the best paragraph pair."""
        assert aggregate_paragraph_scores([[0.1, 0.9], [0.5, 0.3]]) == 0.9

    def test_aggregate_mean_top_m(self):
        """'mean_top_m' averages the m best pairs."""
        value = aggregate_paragraph_scores([[0.1, 0.9], [0.5, 0.3]], "mean_top_m", 2)
        assert value == pytest.approx(0.7)

    def test_aggregate_empty(self):
        """An empty matrix cannot be aggregated."""
        with pytest.raises(ArgumentError):
            aggregate_paragraph_scores(np.zeros((0, 3)))

    def test_invalid_fusion_config(self):
        """alpha outside [0, 1] is rejected."""
        with pytest.raises(ArgumentError):
            FusionConfig(alpha=1.5)


class TestRanking:
    """Tests for ordering and selection."""

    def test_alpha_endpoints(self):
        """alpha=0 orders by lexical score, alpha=1 by supporting score."""
        rng = np.random.default_rng(3)
        ids = [f"c{i}" for i in range(20)]
        bm25 = dict(zip(ids, rng.random(20).tolist()))
        supporting = dict(zip(ids, rng.random(20).tolist()))
        lexical_order = sorted(ids, key=lambda c: (-bm25[c], c))
        supporting_order = sorted(ids, key=lambda c: (-supporting[c], c))
        assert [r.candidate_id for r in rank_candidates(bm25, supporting, 0.0)] == lexical_order
        assert [r.candidate_id for r in rank_candidates(bm25, supporting, 1.0)] == supporting_order

    def test_ties_broken_by_id(self):
        """Equal fused scores are ordered by ascending id."""
        ranked = rank_candidates({"b": 0.5, "a": 0.5}, {"b": 0.5, "a": 0.5}, 0.5)
        assert [r.candidate_id for r in ranked] == ["a", "b"]

    def test_threshold_selection_is_inclusive(self):
        """Candidates at exactly the threshold are selected."""
        ranked = [RankedCandidate("a", 0.7, 0, 0), RankedCandidate("b", 0.5, 0, 0),
                  RankedCandidate("c", 0.2, 0, 0)]
        assert Selection.threshold(0.5).apply(ranked) == ("a", "b")
        assert Selection.fixed_k(1).apply(ranked) == ("a",)
        assert Selection.threshold(0.9).apply(ranked) == ()

    def test_fixed_k_needs_positive_integer(self):
        """fixed_k rejects zero and fractions."""
        with pytest.raises(ArgumentError):
            Selection.fixed_k(0)
        with pytest.raises(ArgumentError):
            Selection("fixed_k", 1.5)

    def test_ensemble_or_is_superset(self):
        """The union contains every member's prediction."""
        rng = np.random.default_rng(1)
        for _ in range(100):
            members = [
                {f"a{i}" for i in range(10) if rng.random() < 0.3}
                for _ in range(int(rng.integers(1, 4)))
            ]
            union = ensemble_or(members)
            assert all(member <= union for member in members)
            assert union == set().union(*members)

    def test_ensemble_or_needs_members(self):
        """An empty member list is an argument error."""
        with pytest.raises(ArgumentError):
            ensemble_or([])


class TestTask1:
    """Tests for case law retrieval."""

    def test_stage_one_limits_candidates(self, task1_cases):
        """Only the top_n lexical survivors reach the ranking."""
        base, candidates = task1_cases
        table = ExternalScoreTable({("q", "a"): 0.2, ("q", "b"): 0.9, ("q", "c"): 1.0})
        result = run_task1(base, candidates, table, fusion=FusionConfig(alpha=1.0, top_n=2))
        assert set(result.ranked_ids) == {"a", "b"}

    def test_alpha_one_follows_supporting_scores(self, task1_cases):
        """With alpha=1 the external scores decide the order."""
        base, candidates = task1_cases
        table = ExternalScoreTable({("q", "a"): 0.2, ("q", "b"): 0.9})
        result = run_task1(base, candidates, table, fusion=FusionConfig(alpha=1.0, top_n=2))
        assert result.ranked_ids == ["b", "a"]
        assert result.selected == ("b",)
        assert result.missing_scores == 0

    def test_alpha_zero_follows_bm25(self, task1_cases):
        """With alpha=0 the lexical score decides the order."""
        base, candidates = task1_cases
        table = ExternalScoreTable({("q", "a"): 0.2, ("q", "b"): 0.9})
        result = run_task1(base, candidates, table, fusion=FusionConfig(alpha=0.0, top_n=2))
        assert result.ranked_ids == ["a", "b"]
        assert result.ranked[0].fused == 1.0

    def test_missing_external_scores_counted(self, task1_cases):
        """Survivors without a stored score are counted and take the default."""
        base, candidates = task1_cases
        table = ExternalScoreTable({("q", "b"): 0.9}, default_score=0.0)
        result = run_task1(base, candidates, table, fusion=FusionConfig(top_n=2))
        assert result.missing_scores == 1
        assert {r.candidate_id: r.supporting for r in result.ranked}["a"] == 0.0

    def test_no_candidates(self, task1_cases):
        """A query needs at least one candidate."""
        base, _ = task1_cases
        with pytest.raises(ArgumentError):
            run_task1(base, [], LinearPairScorer.zeros(16))

    def test_batch_rejects_unknown_query(self, task1_cases):
        """A query id absent from the corpus raises ResolutionError."""
        base, candidates = task1_cases
        with pytest.raises(ResolutionError):
            run_task1_batch([base, *candidates], [CaseQuery("zzz")], LinearPairScorer.zeros(16))

    def test_batch_defaults_to_all_other_cases(self, task1_cases):
        """Without a candidate list every other case is a candidate."""
        base, candidates = task1_cases
        seen = []
        results = run_task1_batch(
            [base, *candidates],
            [CaseQuery("q")],
            LinearPairScorer.zeros(16),
            on_result=seen.append,
        )
        assert set(results[0].ranked_ids) == {"a", "b", "c"}
        assert seen == results

    def test_token_free_candidate_in_batch(self, task1_cases):
        """A candidate with no tokens gets a zero lexical score instead of failing the batch."""
        base, candidates = task1_cases
        blank = CaseDocument.from_texts("x", ["***", "-- . --"])
        results = run_task1_batch(
            [base, *candidates, blank], [CaseQuery("q")], LinearPairScorer.zeros(16)
        )
        ranked = {r.candidate_id: r for r in results[0].ranked}
        assert set(ranked) == {"a", "b", "c", "x"}
        assert ranked["x"].bm25 == 0.0

    def test_unbounded_lexical_scores_rejected(self, task1_cases):
        """BM25 must be normalized before it is fused."""
        base, candidates = task1_cases
        with pytest.raises(ConfigurationError) as excinfo:
            run_task1(
                base,
                candidates,
                LinearPairScorer.zeros(16),
                fusion=FusionConfig(normalization="none"),
            )
        assert excinfo.value.key == "normalization"

    def test_linear_scorer_ranking_is_valid(self, task1_cases):
        """Fused scores are sorted and lie in [0, 1]."""
        base, candidates = task1_cases
        result = run_task1(base, candidates, LinearPairScorer.zeros(16))
        fused = [r.fused for r in result.ranked]
        assert fused == sorted(fused, reverse=True)
        assert all(0.0 <= f <= 1.0 for f in fused)


class TestTask2:
    """Tests for paragraph entailment retrieval."""

    CANDIDATES = (
        ("p#0", "The lessee paid rent."),
        ("p#1", "The court held the contract void."),
        ("p#2", "Costs follow the event."),
    )

    def test_external_table_in_supporting_slot(self):
        """External tables only fill the lexical slot."""
        with pytest.raises(ConfigurationError) as excinfo:
            run_task2("contract void", self.CANDIDATES, ExternalScoreTable({}))
        assert excinfo.value.key == "external_scores"

    def test_bm25_lexical_slot(self):
        """With alpha=0 the BM25 best match ranks first."""
        result = run_task2(
            "contract void",
            self.CANDIDATES,
            LinearPairScorer.zeros(16),
            fusion=FusionConfig(alpha=0.0),
            query_id="f1",
        )
        assert result.ranked_ids[0] == "p#1"
        assert result.query_id == "f1"

    def test_external_lexical_slot(self):
        """External lexical scores replace BM25 and missing ones are counted."""
        table = ExternalScoreTable({("f1", "p#2"): 0.9, ("f1", "p#0"): 0.1})
        result = run_task2(
            "contract void",
            self.CANDIDATES,
            LinearPairScorer.zeros(16),
            table,
            FusionConfig(alpha=0.0),
            query_id="f1",
        )
        assert result.ranked_ids[0] == "p#2"
        assert result.missing_scores == 1

    def test_bm25_slot_needs_normalization(self):
        """Raw BM25 cannot fill the lexical slot unnormalized."""
        with pytest.raises(ConfigurationError) as excinfo:
            run_task2(
                "contract void",
                self.CANDIDATES,
                LinearPairScorer.zeros(16),
                fusion=FusionConfig(normalization="none"),
            )
        assert excinfo.value.key == "normalization"

    def test_external_slot_without_normalization(self):
        """Bounded external scores may be fused as they are."""
        table = ExternalScoreTable({("f1", "p#2"): 0.9, ("f1", "p#0"): 0.1})
        result = run_task2(
            "contract void",
            self.CANDIDATES,
            LinearPairScorer.zeros(16),
            table,
            FusionConfig(alpha=0.0, normalization="none"),
            query_id="f1",
        )
        assert result.ranked_ids[0] == "p#2"
        assert result.ranked[0].fused == pytest.approx(0.9)

    def test_training_pairs_follow_gold(self):
        """Gold candidates become positives."""
        query = FragmentQuery("f1", "contract void", self.CANDIDATES, frozenset({"p#1"}), "train")
        pairs = task2_training_pairs([query])
        assert [p.label.value for p in pairs] == ["negative", "positive", "negative"]

    def test_prepare_scorer_settings(self):
        """Setting 1 keeps the scorer; unknown settings and empty training data fail."""
        scorer = LinearPairScorer.zeros(16)
        assert prepare_task2_scorer(1, scorer, []) is scorer
        with pytest.raises(ConfigurationError):
            prepare_task2_scorer(4, scorer, [])
        with pytest.raises(ConfigurationError):
            prepare_task2_scorer(2, scorer, [])


class TestTask3:
    """Tests for statute law retrieval."""

    def test_never_empty(self, sample_articles, sample_questions):
        """When every member says no, the top Tf-idf article is returned."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        silent = ExternalScoreTable({}, default_score=0.0)
        for question in sample_questions:
            result = task3_predict(question, sample_articles, model, 3, [silent])
            assert result.fallback
            assert result.selected == frozenset(result.candidates[:1])

    def test_random_members_never_empty(self, sample_articles, sample_questions):
        """run_task3 returns a non-empty set for any member scores."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        rng = np.random.default_rng(2)
        for _ in range(25):
            members = [
                ExternalScoreTable(
                    {(q.id, a.id): float(rng.random()) for q in sample_questions
                     for a in sample_articles}
                )
                for _ in range(2)
            ]
            for question in sample_questions:
                assert run_task3(question, sample_articles, model, 2, members, threshold=0.8)

    def test_union_of_members(self, sample_articles, sample_questions):
        """Selections are the union of member votes within the top k."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        question = sample_questions[0]
        first = ExternalScoreTable({(question.id, "3"): 0.9})
        second = ExternalScoreTable({(question.id, "1"): 0.9})
        result = task3_predict(question, sample_articles, model, 4, [first, second])
        assert result.selected == frozenset({"1", "3"})
        assert result.member_selections == (frozenset({"3"}), frozenset({"1"}))
        assert not result.fallback

    def test_batch_reports_each_question(self, sample_articles, sample_questions):
        """The batch runner yields one result per question, in order."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        results = run_task3_batch(
            sample_questions, sample_articles, model, 2, [ExternalScoreTable({})]
        )
        assert [r.question_id for r in results] == [q.id for q in sample_questions]
        assert all(len(r.candidates) == 2 for r in results)

    def test_rejects_zero_k(self, sample_articles, sample_questions):
        """k below 1 is an argument error."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        with pytest.raises(ArgumentError):
            run_task3(sample_questions[0], sample_articles, model, 0, [ExternalScoreTable({})])

    def test_no_articles(self, sample_articles, sample_questions):
        """An empty Civil Code is an argument error, for one question or a batch."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        members = [ExternalScoreTable({})]
        with pytest.raises(ArgumentError, match="no articles"):
            run_task3(sample_questions[0], [], model, 3, members)
        with pytest.raises(ArgumentError, match="at least one article"):
            run_task3_batch(sample_questions, [], model, 3, members)


class TestSweepK:
    """Tests for the top-k recall analysis."""

    @pytest.fixture(scope="class")
    def statute_corpus(self):
        dataset = generate_synthetic(
            SyntheticSpec(n_cases=5, n_articles=200, n_questions=50, seed=1)
        )
        model = tfidf_fit([(a.id, a.content) for a in dataset.articles])
        return dataset, model

    def test_monotone_and_complete(self, statute_corpus):
        """Recall never drops as k grows and reaches 1.0 at k=200."""
        dataset, model = statute_corpus
        sweep = sweep_k(dataset.questions, dataset.articles, model, [200, 1, 10, 50, 100, 150])
        values = [sweep.recall[k] for k in sorted(sweep.recall)]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert sweep.recall[200] == 1.0
        assert sweep.skipped == 0

    def test_unlabeled_questions_skipped(self, sample_articles, sample_questions):
        """Questions without gold are counted, not scored."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        questions = [*sample_questions, BarQuestion("H30-9", "Unlabeled statement.")]
        sweep = sweep_k(questions, sample_articles, model, [4])
        assert sweep.skipped == 1
        assert sweep.recall[4] == 1.0

    def test_invalid_k_values(self, sample_articles, sample_questions):
        """Empty k lists and k below 1 are argument errors."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        with pytest.raises(ArgumentError):
            sweep_k(sample_questions, sample_articles, model, [])
        with pytest.raises(ArgumentError):
            sweep_k(sample_questions, sample_articles, model, [0, 5])

    def test_no_gold_at_all(self, sample_articles):
        """Recall is undefined without any gold article."""
        model = tfidf_fit([(a.id, a.content) for a in sample_articles])
        with pytest.raises(ArgumentError):
            sweep_k([BarQuestion("H1", "Text.")], sample_articles, model, [1])


class TestCompareMembers:
    """Tests for member agreement counts."""

    def test_counts(self):
        """Correct hits are split into A only, B only and both."""
        gold = {"q1": ["1", "2"], "q2": ["3"]}
        a = {"q1": ["1", "2", "9"], "q2": []}
        b = {"q1": ["2"], "q2": ["3"]}
        comparison = compare_members(a, b, gold)
        assert comparison.to_dict() == {"only_a": 1, "only_b": 1, "both": 1}
