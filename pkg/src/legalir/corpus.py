"""Legal corpus units: case documents, Civil Code articles, bar questions.

Canonical on-disk formats are JSON Lines, one record per line:
  - cases.jsonl:     {"id", "paragraphs": [str, ...]}
  - articles.jsonl:  {"id", "part", "chapter", "section", "summary_line", "content"}
  - questions.jsonl: {"id", "content", "relevant_article_ids": [...], "label": "Y"|"N"|null}

Plaintext adapters convert a directory of case files (paragraphs separated by
blank lines) and the plain-text Civil Code layout into these types. Parsed
corpora are immutable.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Literal

from .exceptions import ArgumentError, CorpusError, ParseError, ResolutionError
from .formatters import dumps_jsonl, write_atomic
from .lexical import DEFAULT_TOKENIZER, TokenizerConfig, tokenize

logger = logging.getLogger(__name__)

CaseFormat = Literal["jsonl", "plaintext-dir"]

DEFAULT_BUCKET_WIDTH = 100

DEFAULT_ABBREVIATIONS: frozenset[str] = frozenset(
    {
        "art.", "arts.", "cf.", "ch.", "co.", "corp.", "dr.", "e.g.", "etc.", "i.e.",
        "inc.", "j.", "jj.", "ltd.", "mr.", "mrs.", "ms.", "no.", "nos.", "p.", "para.",
        "paras.", "pp.", "sec.", "ss.", "st.", "v.", "vs.",
    }
)

_PARAGRAPH_BREAK_RE = re.compile(r"\n[ \t\r\f\v]*\n")
_SENTENCE_END_RE = re.compile(r"[.?!]+(\s+)")

_PART_RE = re.compile(r"^Part\s+[IVXLCDM\d]+\b")
_CHAPTER_RE = re.compile(r"^Chapter\s+[IVXLCDM\d]+\b")
_SECTION_RE = re.compile(r"^Section\s+\d+\b")
_SUBSECTION_RE = re.compile(r"^Subsection\s+\d+\b")
_SUMMARY_RE = re.compile(r"^\(.+\)$")
_ARTICLE_RE = re.compile(r"^Article\s+(\d+(?:-\d+)*)\b\s*(.*)$")


class Answer(str, Enum):
    """Yes/No label of a bar question or lawfulness sample."""

    YES = "Y"
    NO = "N"

    def flipped(self) -> Answer:
        return Answer.NO if self is Answer.YES else Answer.YES


# --------------------------------------------------------------------------
# Sentences
# --------------------------------------------------------------------------


def split_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    """Rule-based sentence splitter.

    A boundary is sentence-final punctuation followed by whitespace and an
    uppercase letter or digit, unless the word carrying the period is in
    ``abbreviations`` (compared lowercased, period included). Only the
    whitespace between sentences is dropped.
    """
    sentences: list[str] = []
    start = 0
    for match in _SENTENCE_END_RE.finditer(text):
        next_pos = match.end(1)
        if next_pos >= len(text):
            break
        following = text[next_pos]
        if not (following.isupper() or following.isdigit()):
            continue
        head = text[start : match.start(1)]
        words = head.split()
        if words and head.endswith(".") and words[-1].lower() in abbreviations:
            continue
        if head.strip():
            sentences.append(head.strip())
        start = next_pos
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Paragraph:
    """One paragraph of a case document."""

    ordinal: int
    text: str
    sentences: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise CorpusError(f"paragraph ordinal must be non-negative, got {self.ordinal}")
        if not self.text.strip():
            raise CorpusError(f"paragraph {self.ordinal} is empty")
        if not self.sentences:
            object.__setattr__(self, "sentences", tuple(split_sentences(self.text)))


@dataclass(frozen=True)
class CaseDocument:
    """A case presented as an ordered list of paragraphs."""

    id: str
    paragraphs: tuple[Paragraph, ...]
    source_path: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("case id must be non-empty")
        if not self.paragraphs:
            raise CorpusError(f"case {self.id!r} has no paragraphs")
        for position, paragraph in enumerate(self.paragraphs):
            if paragraph.ordinal != position:
                raise CorpusError(
                    f"case {self.id!r}: paragraph ordinals must be contiguous from 0, "
                    f"found {paragraph.ordinal} at position {position}"
                )

    @classmethod
    def from_texts(
        cls, case_id: str, texts: Sequence[str], source_path: str | None = None
    ) -> CaseDocument:
        return cls(
            id=case_id,
            paragraphs=tuple(Paragraph(i, t.strip()) for i, t in enumerate(texts)),
            source_path=source_path,
        )

    @property
    def texts(self) -> list[str]:
        return [p.text for p in self.paragraphs]

    def to_dict(self) -> dict:
        return {"id": self.id, "paragraphs": self.texts}


@dataclass(frozen=True)
class StatuteArticle:
    """One Civil Code article with its structural context."""

    id: str
    part: str
    chapter: str
    section: str
    summary_line: str
    content: str

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("article id must be non-empty")
        if not self.content.strip():
            raise CorpusError(f"article {self.id!r} has empty content")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "part": self.part,
            "chapter": self.chapter,
            "section": self.section,
            "summary_line": self.summary_line,
            "content": self.content,
        }

    @classmethod
    def from_dict(cls, data: dict) -> StatuteArticle:
        return cls(
            id=str(data["id"]),
            part=data.get("part", ""),
            chapter=data.get("chapter", ""),
            section=data.get("section", ""),
            summary_line=data.get("summary_line", ""),
            content=data["content"],
        )


@dataclass(frozen=True)
class BarQuestion:
    """A yes/no bar exam statement, optionally labeled with its relevant articles."""

    id: str
    content: str
    relevant_article_ids: frozenset[str] = frozenset()
    label: Answer | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("question id must be non-empty")
        if not self.content.strip():
            raise CorpusError(f"question {self.id!r} has empty content")

    @property
    def gold(self) -> frozenset[str]:
        return self.relevant_article_ids

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "content": self.content,
            "relevant_article_ids": sorted(self.relevant_article_ids),
            "label": self.label.value if self.label else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> BarQuestion:
        label = data.get("label")
        return cls(
            id=str(data["id"]),
            content=data["content"],
            relevant_article_ids=frozenset(str(a) for a in data.get("relevant_article_ids") or ()),
            label=Answer(label) if label else None,
        )


@dataclass(frozen=True)
class CaseQuery:
    """Task 1 query: a base case, its candidate pool, and its noticed cases."""

    query_id: str
    candidates: tuple[str, ...] | None = None
    gold: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        data: dict = {"query_id": self.query_id, "gold": sorted(self.gold)}
        if self.candidates is not None:
            data["candidates"] = list(self.candidates)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> CaseQuery:
        candidates = data.get("candidates")
        return cls(
            query_id=str(data["query_id"]),
            candidates=tuple(str(c) for c in candidates) if candidates is not None else None,
            gold=frozenset(str(g) for g in data.get("gold") or ()),
        )


@dataclass(frozen=True)
class FragmentQuery:
    """Task 2 query: an entailed fragment and the candidate paragraphs to search."""

    query_id: str
    fragment: str
    candidates: tuple[tuple[str, str], ...]
    gold: frozenset[str] = frozenset()
    split: str = "test"

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "fragment": self.fragment,
            "candidates": [{"id": cid, "text": text} for cid, text in self.candidates],
            "gold": sorted(self.gold),
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FragmentQuery:
        return cls(
            query_id=str(data["query_id"]),
            fragment=data["fragment"],
            candidates=tuple((str(c["id"]), c["text"]) for c in data["candidates"]),
            gold=frozenset(str(g) for g in data.get("gold") or ()),
            split=data.get("split", "test"),
        )


@dataclass(frozen=True)
class CorpusStats:
    """Summary statistics of a document collection."""

    mean_words_per_doc: float
    mean_paragraphs_per_doc: float
    max_words: int
    max_paragraphs: int
    sample_count: int
    candidate_count: int
    mean_gold_per_query: float | None
    length_histogram: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "mean_words_per_doc": self.mean_words_per_doc,
            "mean_paragraphs_per_doc": self.mean_paragraphs_per_doc,
            "max_words": self.max_words,
            "max_paragraphs": self.max_paragraphs,
            "sample_count": self.sample_count,
            "candidate_count": self.candidate_count,
            "mean_gold_per_query": self.mean_gold_per_query,
            "length_histogram": {str(k): v for k, v in self.length_histogram.items()},
        }


# --------------------------------------------------------------------------
# JSON Lines plumbing
# --------------------------------------------------------------------------


def iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for each non-blank line."""
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", path, line_no) from e
            if not isinstance(record, dict):
                raise ParseError("expected a JSON object", path, line_no)
            yield line_no, record


def _check_unique(ids: Iterable[str], kind: str) -> None:
    seen: set[str] = set()
    for item_id in ids:
        if item_id in seen:
            raise CorpusError(f"duplicate {kind} id: {item_id!r}")
        seen.add(item_id)


def _case_from_record(record: dict, path: Path, line_no: int) -> CaseDocument:
    case_id = record.get("id")
    paragraphs = record.get("paragraphs")
    if not isinstance(case_id, str) or not case_id:
        raise ParseError("missing or invalid 'id'", path, line_no)
    if not isinstance(paragraphs, list) or not all(isinstance(p, str) for p in paragraphs):
        raise ParseError("'paragraphs' must be a list of strings", path, line_no)
    try:
        return CaseDocument.from_texts(case_id, paragraphs, source_path=str(path))
    except CorpusError as e:
        raise ParseError(str(e), path, line_no) from e


def _parse_case_file(path: Path) -> CaseDocument:
    raw = path.read_text(encoding="utf-8")
    texts = [p.strip() for p in _PARAGRAPH_BREAK_RE.split(raw.replace("\r\n", "\n"))]
    texts = [t for t in texts if t]
    if not texts:
        raise ParseError("file contains no paragraphs", path)
    return CaseDocument.from_texts(path.stem, texts, source_path=str(path))


def parse_case_corpus(path: Path, format: CaseFormat = "jsonl") -> list[CaseDocument]:
    """Load case documents from canonical JSONL or a directory of plaintext files."""
    path = Path(path)
    if not path.exists():
        raise ParseError("path does not exist", path)
    if format == "jsonl":
        docs = [_case_from_record(rec, path, n) for n, rec in iter_jsonl(path)]
    elif format == "plaintext-dir":
        if not path.is_dir():
            raise ParseError("plaintext-dir format needs a directory", path)
        files = sorted(p for p in path.iterdir() if p.is_file() and p.suffix == ".txt")
        with ThreadPoolExecutor() as pool:
            docs = list(pool.map(_parse_case_file, files))
    else:
        raise ArgumentError(f"unknown case corpus format: {format!r}")
    _check_unique((d.id for d in docs), "case")
    logger.debug("Parsed %d cases from %s", len(docs), path)
    return docs


def load_articles(path: Path) -> list[StatuteArticle]:
    articles = []
    for line_no, record in iter_jsonl(Path(path)):
        try:
            articles.append(StatuteArticle.from_dict(record))
        except (KeyError, TypeError, CorpusError) as e:
            raise ParseError(f"invalid article record: {e}", path, line_no) from e
    _check_unique((a.id for a in articles), "article")
    return articles


def load_questions(path: Path) -> list[BarQuestion]:
    questions = []
    for line_no, record in iter_jsonl(Path(path)):
        try:
            questions.append(BarQuestion.from_dict(record))
        except (KeyError, TypeError, ValueError, CorpusError) as e:
            raise ParseError(f"invalid question record: {e}", path, line_no) from e
    _check_unique((q.id for q in questions), "question")
    return questions


def load_case_queries(path: Path) -> list[CaseQuery]:
    queries = []
    for line_no, record in iter_jsonl(Path(path)):
        try:
            queries.append(CaseQuery.from_dict(record))
        except (KeyError, TypeError) as e:
            raise ParseError(f"invalid query record: {e}", path, line_no) from e
    _check_unique((q.query_id for q in queries), "query")
    return queries


def load_fragment_queries(path: Path) -> list[FragmentQuery]:
    queries = []
    for line_no, record in iter_jsonl(Path(path)):
        try:
            queries.append(FragmentQuery.from_dict(record))
        except (KeyError, TypeError) as e:
            raise ParseError(f"invalid fragment query record: {e}", path, line_no) from e
    _check_unique((q.query_id for q in queries), "query")
    return queries


def dump_cases(docs: Iterable[CaseDocument], path: Path) -> None:
    write_atomic(Path(path), dumps_jsonl(d.to_dict() for d in docs))


def dump_articles(articles: Iterable[StatuteArticle], path: Path) -> None:
    write_atomic(Path(path), dumps_jsonl(a.to_dict() for a in articles))


def dump_questions(questions: Iterable[BarQuestion], path: Path) -> None:
    write_atomic(Path(path), dumps_jsonl(q.to_dict() for q in questions))


def dump_records(records: Iterable[CaseQuery | FragmentQuery], path: Path) -> None:
    write_atomic(Path(path), dumps_jsonl(r.to_dict() for r in records))


def resolve_questions(
    questions: Sequence[BarQuestion], articles: Sequence[StatuteArticle]
) -> None:
    """Check every relevant article id against the loaded Civil Code."""
    known = {a.id for a in articles}
    for question in questions:
        missing = sorted(question.relevant_article_ids - known)
        if missing:
            raise ResolutionError(
                f"question {question.id!r} references unknown article(s): {', '.join(missing)}"
            )


def split_dev_by_prefix(
    questions: Sequence[BarQuestion], prefix: str = "H29"
) -> tuple[list[BarQuestion], list[BarQuestion]]:
    """Split off a development set: every question whose id starts with ``prefix``."""
    dev = [q for q in questions if q.id == prefix or q.id.startswith(f"{prefix}-")]
    dev_ids = {q.id for q in dev}
    return [q for q in questions if q.id not in dev_ids], dev


# --------------------------------------------------------------------------
# Civil Code
# --------------------------------------------------------------------------


def parse_civil_code(raw: str) -> list[StatuteArticle]:
    """Parse the plain-text Civil Code layout into articles.

    Headings reset the levels below them (a new Part clears Chapter and
    Section). A parenthesized line immediately before an ``Article`` line is
    that article's summary line; anywhere else it is body text.
    """
    articles: list[StatuteArticle] = []
    part = chapter = section = ""
    pending_summary: tuple[int, str] | None = None
    current: dict | None = None

    def flush() -> None:
        nonlocal current
        if current is None:
            return
        content = "\n".join(current["body"]).strip()
        if not content:
            raise ParseError(f"article {current['id']} has an empty body", line=current["line"])
        articles.append(
            StatuteArticle(
                id=current["id"],
                part=current["part"],
                chapter=current["chapter"],
                section=current["section"],
                summary_line=current["summary_line"],
                content=content,
            )
        )
        current = None

    def add_body(line_no: int, text: str) -> None:
        if current is None:
            raise ParseError("body text before any Article marker", line=line_no)
        current["body"].append(text)

    for line_no, raw_line in enumerate(raw.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue

        article = _ARTICLE_RE.match(line)
        is_heading = any(
            pattern.match(line)
            for pattern in (_PART_RE, _CHAPTER_RE, _SECTION_RE, _SUBSECTION_RE)
        )
        if pending_summary is not None and not article:
            # The parenthesized line was not followed by an article
            summary_line_no, summary_text = pending_summary
            pending_summary = None
            add_body(summary_line_no, summary_text)

        if article:
            flush()
            summary = ""
            if pending_summary is not None:
                summary = pending_summary[1]
                pending_summary = None
            current = {
                "id": article.group(1),
                "part": part,
                "chapter": chapter,
                "section": section,
                "summary_line": summary,
                "body": [article.group(2)] if article.group(2) else [],
                "line": line_no,
            }
        elif is_heading:
            flush()
            if _PART_RE.match(line):
                part, chapter, section = line, "", ""
            elif _CHAPTER_RE.match(line):
                chapter, section = line, ""
            elif _SECTION_RE.match(line):
                section = line
        elif _SUMMARY_RE.match(line):
            pending_summary = (line_no, line)
        else:
            add_body(line_no, line)

    if pending_summary is not None:
        add_body(*pending_summary)
    flush()
    _check_unique((a.id for a in articles), "article")
    return articles


# --------------------------------------------------------------------------
# Statistics
# --------------------------------------------------------------------------


def _doc_texts(doc: CaseDocument | StatuteArticle) -> list[str]:
    if isinstance(doc, CaseDocument):
        return doc.texts
    return [line for line in doc.content.split("\n") if line.strip()]


def _gold_of(query: CaseQuery | BarQuestion) -> frozenset[str]:
    return query.gold


def length_histogram(
    lengths: Iterable[int], bucket_width: int = DEFAULT_BUCKET_WIDTH
) -> dict[int, int]:
    """Count lengths per bucket, keyed by each bucket's lower bound."""
    if bucket_width < 1:
        raise ArgumentError(f"bucket width must be >= 1, got {bucket_width}")
    histogram: dict[int, int] = {}
    for length in lengths:
        bucket = (length // bucket_width) * bucket_width
        histogram[bucket] = histogram.get(bucket, 0) + 1
    return dict(sorted(histogram.items()))


def sentence_length_histogram(
    texts: Iterable[str],
    bucket_width: int = 10,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
) -> dict[int, int]:
    """Token-length distribution of short texts (articles, questions)."""
    return length_histogram((len(tokenize(t, config)) for t in texts), bucket_width)


def compute_corpus_stats(
    docs: Sequence[CaseDocument | StatuteArticle],
    queries: Sequence[CaseQuery | BarQuestion] | None = None,
    *,
    bucket_width: int = DEFAULT_BUCKET_WIDTH,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
) -> CorpusStats:
    """Per-document word and paragraph statistics plus gold density of queries."""
    if not docs:
        raise ArgumentError("cannot compute statistics of an empty corpus")
    words = [sum(len(tokenize(t, config)) for t in _doc_texts(d)) for d in docs]
    paragraphs = [len(_doc_texts(d)) for d in docs]

    mean_gold = None
    candidate_count = len(docs)
    if queries:
        labeled = [len(_gold_of(q)) for q in queries if _gold_of(q)]
        if labeled:
            mean_gold = sum(labeled) / len(labeled)
        pools = [q.candidates for q in queries if isinstance(q, CaseQuery) and q.candidates]
        if pools:
            candidate_count = len({c for pool in pools for c in pool})

    return CorpusStats(
        mean_words_per_doc=sum(words) / len(docs),
        mean_paragraphs_per_doc=sum(paragraphs) / len(docs),
        max_words=max(words),
        max_paragraphs=max(paragraphs),
        sample_count=len(docs),
        candidate_count=candidate_count,
        mean_gold_per_query=mean_gold,
        length_histogram=length_histogram(words, bucket_width),
    )
