"""Deterministic synthetic corpora standing in for licensed competition data.

Case corpus layout, per case:

- fact paragraphs of filler tokens ``w0000``..;
- internal reasoning units: a ``Held <claims>.`` paragraph immediately
  followed by ``Therefore, <claims>.`` (the source of weak pairs);
- for every planted support (query q, candidate c): q and c both get the
  marker sentence ``Consequently, <claims>.`` over the same fresh claim tokens;
- for every distractor of q: the candidate gets a long paragraph made of a
  copy of one of q's fact paragraphs plus unique padding tokens, which scores
  high under BM25 while sharing little of its vocabulary.

The statute corpus has numbered articles under Part/Chapter/Section headings
and bar questions built from the tokens of their relevant articles. Every
planted relation is recorded in the ledger.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import (
    Answer,
    BarQuestion,
    CaseDocument,
    CaseQuery,
    FragmentQuery,
    StatuteArticle,
    dump_articles,
    dump_cases,
    dump_questions,
    dump_records,
)
from .entail import negate_sentence
from .exceptions import ArgumentError
from .formatters import dumps_jsonl, write_atomic
from .pairscore import DEFAULT_MARKERS

FACT_TOKENS = 40
PAD_TOKENS = 360
CLAIM_TOKENS = 5
PLANTED_MARKER = DEFAULT_MARKERS[-1]
SENTENCE_TOKENS = 10

_ROLES = ("obligor", "obligee", "mortgagee", "lessee", "guarantor", "agent", "purchaser", "heir")
_MODALS = ("shall", "may")
_VERBS = ("perform", "tender", "register", "rescind", "demand", "deliver", "assert", "waive")
_ROMAN = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X",
          "XI", "XII", "XIII", "XIV", "XV", "XVI", "XVII", "XVIII", "XIX", "XX")


@dataclass(frozen=True)
class SyntheticSpec:
    """Size and seed of a generated dataset.

    ``planted_support_rate`` is the fraction of the other cases planted as
    supports of each base case, so every query gets the same number of gold
    candidates.
    """

    n_cases: int = 100
    paragraphs_per_case: tuple[int, int] = (6, 10)
    planted_support_rate: float = 0.05
    vocab_size: int = 2000
    seed: int = 0
    n_articles: int = 200
    n_questions: int = 50
    distractors_per_query: int = 2

    def __post_init__(self) -> None:
        low, high = self.paragraphs_per_case
        if self.n_cases < 1 or self.vocab_size < 1 or self.n_articles < 1 or self.n_questions < 1:
            raise ArgumentError("synthetic sizes must be >= 1")
        if not 3 <= low <= high:
            raise ArgumentError(
                f"paragraphs_per_case must satisfy 3 <= min <= max, got {low}, {high}"
            )
        if not 0.0 <= self.planted_support_rate <= 1.0:
            raise ArgumentError("planted_support_rate must lie in [0, 1]")
        if self.distractors_per_query < 0:
            raise ArgumentError("distractors_per_query must be >= 0")
        if self.seed < 0:
            raise ArgumentError("seed must be non-negative")

    @property
    def supports_per_query(self) -> int:
        return int(round(self.planted_support_rate * (self.n_cases - 1)))


@dataclass(frozen=True)
class PlantedSupport:
    """One planted (query, candidate) support and where it lives."""

    query_id: str
    candidate_id: str
    query_paragraph: int
    candidate_paragraph: int

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "candidate_id": self.candidate_id,
            "query_paragraph": self.query_paragraph,
            "candidate_paragraph": self.candidate_paragraph,
        }


@dataclass(frozen=True)
class SyntheticDataset:
    cases: tuple[CaseDocument, ...]
    articles: tuple[StatuteArticle, ...]
    questions: tuple[BarQuestion, ...]
    task1_queries: tuple[CaseQuery, ...]
    task2_queries: tuple[FragmentQuery, ...]
    ledger: tuple[PlantedSupport, ...]
    distractors: tuple[tuple[str, str], ...] = field(default=())

    @property
    def gold_pair_count(self) -> int:
        return sum(len(q.gold) for q in self.task1_queries)


@dataclass
class _Block:
    paragraphs: list[str]
    tag: tuple[str, str, str] | None = None


def _sentences(tokens: Sequence[str]) -> str:
    chunks = [tokens[i : i + SENTENCE_TOKENS] for i in range(0, len(tokens), SENTENCE_TOKENS)]
    return " ".join(
        " ".join([chunk[0].capitalize(), *chunk[1:]]) + "." for chunk in chunks if chunk
    )


class _Generator:
    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self._fresh: Iterator[int] = itertools.count()

    def filler(self, count: int, prefix: str = "w") -> list[str]:
        return [f"{prefix}{int(i):04d}" for i in self.rng.integers(0, self.spec.vocab_size, count)]

    def fresh(self, prefix: str, count: int) -> list[str]:
        return [f"{prefix}{next(self._fresh):06d}" for _ in range(count)]

    # -- cases ------------------------------------------------------------

    def cases(self) -> tuple[list[CaseDocument], list[PlantedSupport], list[tuple[str, str]]]:
        spec = self.spec
        ids = [f"case{i:04d}" for i in range(spec.n_cases)]
        blocks: dict[str, list[_Block]] = {}
        first_fact: dict[str, list[str]] = {}

        low, high = spec.paragraphs_per_case
        for case_id in ids:
            n_par = int(self.rng.integers(low, high + 1))
            n_units = max(1, n_par // 4)
            n_facts = max(1, n_par - 2 * n_units)
            facts = [self.filler(FACT_TOKENS) for _ in range(n_facts)]
            first_fact[case_id] = facts[0]
            case_blocks = [_Block([_sentences(f)]) for f in facts]
            for _ in range(n_units):
                claims = " ".join(self.fresh("k", CLAIM_TOKENS))
                case_blocks.append(_Block([f"Held {claims}.", f"Therefore, {claims}."]))
            blocks[case_id] = case_blocks

        planted: list[tuple[str, str]] = []
        distractors: list[tuple[str, str]] = []
        k = spec.supports_per_query
        for query_id in ids:
            others = [c for c in ids if c != query_id]
            gold = sorted(self.rng.choice(others, size=min(k, len(others)), replace=False).tolist())
            for candidate_id in gold:
                claims = " ".join(self.fresh("k", CLAIM_TOKENS))
                key = (query_id, candidate_id)
                shared = f"{PLANTED_MARKER}, {claims}."
                blocks[query_id].append(_Block([shared], (*key, "query")))
                blocks[candidate_id].append(_Block([shared], (*key, "candidate")))
                planted.append(key)

            pool = [c for c in others if c not in gold]
            count = min(spec.distractors_per_query, len(pool))
            if count:
                for target in sorted(self.rng.choice(pool, size=count, replace=False).tolist()):
                    pads = self.fresh("p", PAD_TOKENS)
                    blocks[target].append(_Block([_sentences(first_fact[query_id] + pads)]))
                    distractors.append((query_id, target))

        docs = []
        positions: dict[tuple[str, str, str], int] = {}
        for case_id in ids:
            texts: list[str] = []
            for index in self.rng.permutation(len(blocks[case_id])):
                block = blocks[case_id][int(index)]
                if block.tag is not None:
                    positions[block.tag] = len(texts)
                texts.extend(block.paragraphs)
            docs.append(CaseDocument.from_texts(case_id, texts))

        ledger = [
            PlantedSupport(q, c, positions[(q, c, "query")], positions[(q, c, "candidate")])
            for q, c in planted
        ]
        return docs, ledger, distractors

    # -- statutes ---------------------------------------------------------

    def articles(self) -> tuple[list[StatuteArticle], list[list[str]]]:
        spec = self.spec
        articles = []
        signatures = []
        for i in range(spec.n_articles):
            tokens = self.filler(15, prefix="s")
            role = _ROLES[int(self.rng.integers(len(_ROLES)))]
            modal = _MODALS[int(self.rng.integers(len(_MODALS)))]
            verb = _VERBS[int(self.rng.integers(len(_VERBS)))]
            content = (
                f"The {role} {modal} {verb} {' '.join(tokens[:10])}. "
                f"This applies to {' '.join(tokens[10:])}."
            )
            part, chapter, section = i // 50, i // 10, (i % 10) // 5
            articles.append(
                StatuteArticle(
                    id=str(i + 1),
                    part=f"Part {_ROMAN[part % len(_ROMAN)]} Division {part + 1}",
                    chapter=f"Chapter {_ROMAN[chapter % len(_ROMAN)]} Matters {chapter + 1}",
                    section=f"Section {section + 1} Provisions {chapter + 1}.{section + 1}",
                    summary_line=f"(Subject of Article {i + 1})",
                    content=content,
                )
            )
            signatures.append([role, modal, verb, *tokens])
        return articles, signatures

    def questions(
        self, articles: Sequence[StatuteArticle], signatures: Sequence[list[str]]
    ) -> list[BarQuestion]:
        questions = []
        for i in range(self.spec.n_questions):
            n_gold = 1 + int(self.rng.integers(2))
            size = min(n_gold, len(articles))
            gold = sorted(self.rng.choice(len(articles), size=size, replace=False).tolist())
            role, modal, verb = signatures[gold[0]][:3]
            pool = [t for g in gold for t in signatures[g][3:]]
            drawn = self.rng.choice(len(pool), size=min(6, len(pool)), replace=False)
            picked = [pool[int(j)] for j in drawn]
            text = f"The {role} {modal} {verb} {' '.join(picked + self.filler(4, prefix='s'))}."
            label = Answer.YES
            if i % 2:
                text = negate_sentence(text) or text
                label = Answer.NO
            questions.append(
                BarQuestion(
                    id=f"H{27 + i % 3}-{i + 1}",
                    content=text,
                    relevant_article_ids=frozenset(articles[g].id for g in gold),
                    label=label,
                )
            )
        return questions


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Build case and statute corpora with labeled queries; deterministic given ``spec``."""
    gen = _Generator(spec)
    cases, ledger, distractors = gen.cases()
    articles, signatures = gen.articles()
    questions = gen.questions(articles, signatures)

    gold: dict[str, set[str]] = {c.id: set() for c in cases}
    for entry in ledger:
        gold[entry.query_id].add(entry.candidate_id)
    task1 = [CaseQuery(c.id, None, frozenset(gold[c.id])) for c in cases]

    by_id = {c.id: c for c in cases}
    task2 = []
    for i, entry in enumerate(ledger):
        query_case, candidate = by_id[entry.query_id], by_id[entry.candidate_id]
        task2.append(
            FragmentQuery(
                query_id=f"{entry.query_id}~{entry.candidate_id}",
                fragment=query_case.paragraphs[entry.query_paragraph].text,
                candidates=tuple(
                    (f"{candidate.id}#{p.ordinal}", p.text) for p in candidate.paragraphs
                ),
                gold=frozenset({f"{candidate.id}#{entry.candidate_paragraph}"}),
                split="train" if i % 2 == 0 else "test",
            )
        )

    return SyntheticDataset(
        cases=tuple(cases),
        articles=tuple(articles),
        questions=tuple(questions),
        task1_queries=tuple(task1),
        task2_queries=tuple(task2),
        ledger=tuple(ledger),
        distractors=tuple(distractors),
    )


def render_civil_code(articles: Sequence[StatuteArticle]) -> str:
    """Plain-text Civil Code layout accepted by ``parse_civil_code``."""
    lines: list[str] = []
    part = chapter = section = None
    for article in articles:
        if article.part != part:
            part, chapter, section = article.part, None, None
            lines += ["", article.part]
        if article.chapter != chapter:
            chapter, section = article.chapter, None
            lines += ["", article.chapter]
        if article.section != section:
            section = article.section
            lines += [article.section]
        if article.summary_line:
            lines.append(article.summary_line)
        lines.append(f"Article {article.id} {article.content}")
    return "\n".join(lines).lstrip("\n") + "\n"


def write_dataset(dataset: SyntheticDataset, out_dir: Path) -> dict[str, Path]:
    """Write every corpus, query set and gold file under ``out_dir``."""
    out_dir = Path(out_dir)
    paths = {
        name: out_dir / filename
        for name, filename in (
            ("cases", "cases.jsonl"),
            ("articles", "articles.jsonl"),
            ("civil_code", "civil_code.txt"),
            ("questions", "questions.jsonl"),
            ("task1_queries", "task1_queries.jsonl"),
            ("task2_queries", "task2_queries.jsonl"),
            ("gold_task1", "gold_task1.jsonl"),
            ("gold_task2", "gold_task2.jsonl"),
            ("gold_task3", "gold_task3.jsonl"),
            ("gold_task4", "gold_task4.jsonl"),
            ("ledger", "ledger.jsonl"),
        )
    }
    dump_cases(dataset.cases, paths["cases"])
    dump_articles(dataset.articles, paths["articles"])
    write_atomic(paths["civil_code"], render_civil_code(dataset.articles))
    dump_questions(dataset.questions, paths["questions"])
    dump_records(dataset.task1_queries, paths["task1_queries"])
    dump_records(dataset.task2_queries, paths["task2_queries"])
    write_atomic(
        paths["gold_task1"],
        dumps_jsonl(
            {"query_id": q.query_id, "gold": sorted(q.gold)} for q in dataset.task1_queries
        ),
    )
    write_atomic(
        paths["gold_task2"],
        dumps_jsonl(
            {"query_id": q.query_id, "gold": sorted(q.gold)} for q in dataset.task2_queries
        ),
    )
    write_atomic(
        paths["gold_task3"],
        dumps_jsonl(
            {"query_id": q.id, "gold": sorted(q.relevant_article_ids)} for q in dataset.questions
        ),
    )
    write_atomic(
        paths["gold_task4"],
        dumps_jsonl(
            {"query_id": q.id, "answer": q.label.value} for q in dataset.questions if q.label
        ),
    )
    write_atomic(paths["ledger"], dumps_jsonl(e.to_dict() for e in dataset.ledger))
    return paths
