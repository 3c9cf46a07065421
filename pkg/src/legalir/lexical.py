"""Lexical scoring: tokenization, BM25 over an inverted index, Tf-idf cosine ranking.

Both scoring structures are immutable once built and can be shared between
threads. Ties are always broken by ascending unit id so rankings are
reproducible.

Persisted formats:
  - ``LIRX1``: inverted index (unit table followed by postings)
  - ``LTFV1``: Tf-idf model (vocabulary and idf table)
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import struct
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS, TfidfVectorizer
from sklearn.metrics.pairwise import cosine_similarity

from .exceptions import (
    ArgumentError,
    FormatError,
    IndexingError,
    ModelStateError,
    UnknownUnitError,
)

logger = logging.getLogger(__name__)

INDEX_MAGIC = b"LIRX1"
TFIDF_MAGIC = b"LTFV1"

# Supplied stopword list; removal is off unless a config opts in
ENGLISH_STOPWORDS: frozenset[str] = frozenset(ENGLISH_STOP_WORDS)

# Alphanumeric runs; everything else (punctuation, hyphens, underscores) splits
_TOKEN_RE = re.compile(r"[^\W_]+")

Unit = tuple[str, str]


@dataclass(frozen=True)
class TokenizerConfig:
    """How raw text becomes tokens."""

    lowercase: bool = True
    stopwords: frozenset[str] | None = None
    min_token_len: int = 1

    def __post_init__(self) -> None:
        if self.min_token_len < 1:
            raise ArgumentError(f"min_token_len must be >= 1, got {self.min_token_len}")

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords) if self.stopwords else None,
            "min_token_len": self.min_token_len,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TokenizerConfig:
        stopwords = data.get("stopwords")
        return cls(
            lowercase=bool(data.get("lowercase", True)),
            stopwords=frozenset(stopwords) if stopwords else None,
            min_token_len=int(data.get("min_token_len", 1)),
        )


DEFAULT_TOKENIZER = TokenizerConfig()


def tokenize(text: str, config: TokenizerConfig = DEFAULT_TOKENIZER) -> list[str]:
    """Split text on non-alphanumeric boundaries.

    Lowercasing happens before stopword removal, so a lowercase stopword list
    matches capitalised input.
    """
    tokens = _TOKEN_RE.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.min_token_len > 1:
        tokens = [t for t in tokens if len(t) >= config.min_token_len]
    if config.stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    return tokens


def fingerprint_units(units: Iterable[Unit]) -> str:
    """Content fingerprint of an ordered unit collection."""
    digest = hashlib.sha256()
    for unit_id, text in units:
        digest.update(unit_id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(text.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()


# --------------------------------------------------------------------------
# BM25
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Bm25Params:
    """Okapi BM25 parameters."""

    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ArgumentError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ArgumentError(f"b must be in [0, 1], got {self.b}")


def bm25_idf(unit_count: int, document_frequency: int) -> float:
    """Robertson/Okapi idf with +1 inside the log, never negative."""
    n, df = unit_count, document_frequency
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


class InvertedIndex:
    """Token postings over a fixed set of text units."""

    def __init__(
        self,
        unit_ids: Sequence[str],
        doc_len: Mapping[str, int],
        postings: Mapping[str, Mapping[str, int]],
        tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
    ):
        self._unit_ids = tuple(unit_ids)
        self._doc_len = MappingProxyType(dict(doc_len))
        self._postings = MappingProxyType(
            {t: MappingProxyType(dict(p)) for t, p in postings.items()}
        )
        self._position = {uid: i for i, uid in enumerate(self._unit_ids)}
        self._lengths = np.array([self._doc_len[u] for u in self._unit_ids], dtype=np.float64)
        self.tokenizer = tokenizer
        total = float(self._lengths.sum())
        if total <= 0:
            # No postings: every unit scores 0
            logger.debug("indexing %d unit(s) with no tokens", len(self._unit_ids))
            self.avgdl = 1.0
        else:
            self.avgdl = total / len(self._unit_ids)

    @property
    def unit_ids(self) -> tuple[str, ...]:
        return self._unit_ids

    @property
    def unit_count(self) -> int:
        return len(self._unit_ids)

    @property
    def doc_len(self) -> Mapping[str, int]:
        return self._doc_len

    @property
    def postings(self) -> dict[str, tuple[tuple[str, int], ...]]:
        """Token -> ((unit_id, term_frequency), ...) in unit insertion order."""
        return {
            token: tuple(
                sorted(units.items(), key=lambda item: self._position[item[0]])
            )
            for token, units in self._postings.items()
        }

    def document_frequency(self, token: str) -> int:
        units = self._postings.get(token)
        return len(units) if units else 0

    def term_frequency(self, token: str, unit_id: str) -> int:
        units = self._postings.get(token)
        return units.get(unit_id, 0) if units else 0

    def __contains__(self, unit_id: object) -> bool:
        return unit_id in self._position

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        return (
            self._unit_ids == other._unit_ids
            and dict(self._doc_len) == dict(other._doc_len)
            and self.postings == other.postings
        )

    def _length_norms(self, params: Bm25Params) -> np.ndarray:
        return params.k1 * (1.0 - params.b + params.b * self._lengths / self.avgdl)

    def score_all(self, query_tokens: Sequence[str], params: Bm25Params) -> np.ndarray:
        """BM25 score of every unit, aligned with ``unit_ids``."""
        scores = np.zeros(self.unit_count, dtype=np.float64)
        norms = self._length_norms(params)
        for token, qf in Counter(query_tokens).items():
            units = self._postings.get(token)
            if not units:
                continue
            idf = bm25_idf(self.unit_count, len(units))
            for unit_id, tf in units.items():
                i = self._position[unit_id]
                scores[i] += qf * idf * tf * (params.k1 + 1.0) / (tf + norms[i])
        return scores


def build_index(
    units: Sequence[Unit], config: TokenizerConfig = DEFAULT_TOKENIZER
) -> InvertedIndex:
    """Build an inverted index over ``(unit_id, text)`` pairs."""
    if not units:
        raise ArgumentError("cannot build an index from zero units")
    unit_ids: list[str] = []
    doc_len: dict[str, int] = {}
    postings: dict[str, dict[str, int]] = {}
    for unit_id, text in units:
        if unit_id in doc_len:
            raise IndexingError(f"duplicate unit id: {unit_id!r}")
        tokens = tokenize(text, config)
        unit_ids.append(unit_id)
        doc_len[unit_id] = len(tokens)
        for token, tf in Counter(tokens).items():
            postings.setdefault(token, {})[unit_id] = tf
    return InvertedIndex(unit_ids, doc_len, postings, tokenizer=config)


def bm25_score(
    index: InvertedIndex, params: Bm25Params, query_tokens: Sequence[str], unit_id: str
) -> float:
    """BM25 score of one unit; repeated query tokens count once per occurrence."""
    if unit_id not in index:
        raise UnknownUnitError(f"unit {unit_id!r} is not in the index")
    dl = index.doc_len[unit_id]
    norm = params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
    score = 0.0
    for token in query_tokens:
        tf = index.term_frequency(token, unit_id)
        if tf == 0:
            continue
        idf = bm25_idf(index.unit_count, index.document_frequency(token))
        score += idf * tf * (params.k1 + 1.0) / (tf + norm)
    return score


def bm25_rank(
    index: InvertedIndex, params: Bm25Params, query_tokens: Sequence[str]
) -> list[tuple[str, float]]:
    """All units by descending BM25 score, ties by ascending unit id."""
    scores = index.score_all(query_tokens, params)
    ranked = [(uid, float(s)) for uid, s in zip(index.unit_ids, scores)]
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def bm25_pair_matrix(
    query_paragraphs: Sequence[str],
    candidate_paragraphs: Sequence[str],
    params: Bm25Params = Bm25Params(),
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    *,
    index: InvertedIndex | None = None,
) -> np.ndarray:
    """Paragraph-by-paragraph BM25 matrix.

    Entry (i, j) scores query paragraph i against candidate paragraph j with
    an index built from the candidate paragraphs alone. A prebuilt ``index``
    over the same candidate paragraphs (unit ids "0".."n-1") may be passed to
    skip rebuilding it.
    """
    if not query_paragraphs or not candidate_paragraphs:
        raise ArgumentError("bm25_pair_matrix needs at least one paragraph on each side")
    if index is None:
        index = build_index(
            [(str(j), text) for j, text in enumerate(candidate_paragraphs)], config
        )
    matrix = np.empty((len(query_paragraphs), len(candidate_paragraphs)), dtype=np.float64)
    for i, text in enumerate(query_paragraphs):
        matrix[i] = index.score_all(tokenize(text, index.tokenizer), params)
    return matrix


# --------------------------------------------------------------------------
# Tf-idf
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TfidfModel:
    """Vocabulary and idf weights fitted on a unit collection.

    ``vectorizer`` is rebuilt from the vocabulary and idf table when the model
    is loaded from disk, so both paths vectorise text identically.
    """

    vocabulary: Mapping[str, int]
    idf: np.ndarray
    fitted_on: str
    unit_count: int
    tokenizer: TokenizerConfig = field(default=DEFAULT_TOKENIZER)
    vectorizer: TfidfVectorizer | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.vectorizer is None and self.is_fitted:
            vectorizer = _make_vectorizer(self.tokenizer, vocabulary=dict(self.vocabulary))
            vectorizer.idf_ = np.asarray(self.idf, dtype=np.float64)
            object.__setattr__(self, "vectorizer", vectorizer)

    @property
    def is_fitted(self) -> bool:
        return self.unit_count > 0 and len(self.vocabulary) > 0

    def require_fitted(self) -> None:
        if not self.is_fitted:
            raise ModelStateError("Tf-idf model is not fitted")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TfidfModel):
            return NotImplemented
        return (
            dict(self.vocabulary) == dict(other.vocabulary)
            and np.array_equal(self.idf, other.idf)
            and self.fitted_on == other.fitted_on
            and self.unit_count == other.unit_count
            and self.tokenizer == other.tokenizer
        )


def _make_vectorizer(
    config: TokenizerConfig, vocabulary: Mapping[str, int] | None = None
) -> TfidfVectorizer:
    # Raw tf with unsmoothed idf: idf(t) = ln(N / df(t)) + 1
    return TfidfVectorizer(
        tokenizer=partial(tokenize, config=config),
        preprocessor=None,
        lowercase=False,
        token_pattern=None,
        vocabulary=vocabulary,
        smooth_idf=False,
        norm=None,
        dtype=np.float64,
    )


def tfidf_fit(units: Sequence[Unit], config: TokenizerConfig = DEFAULT_TOKENIZER) -> TfidfModel:
    """Fit idf(t) = ln(N / df(t)) + 1 over ``(unit_id, text)`` pairs."""
    if not units:
        raise ArgumentError("cannot fit a Tf-idf model on zero units")
    vectorizer = _make_vectorizer(config)
    try:
        vectorizer.fit([text for _, text in units])
    except ValueError as e:
        raise IndexingError(f"cannot fit a Tf-idf model: {e}") from e
    vocabulary = {term: int(i) for term, i in sorted(vectorizer.vocabulary_.items())}
    return TfidfModel(
        vocabulary=MappingProxyType(vocabulary),
        idf=np.asarray(vectorizer.idf_, dtype=np.float64),
        fitted_on=fingerprint_units(units),
        unit_count=len(units),
        tokenizer=config,
        vectorizer=vectorizer,
    )


def tfidf_matrix(model: TfidfModel, texts: Sequence[str]) -> sparse.csr_matrix:
    """Raw (unnormalised) tf*idf rows for each text; OOV tokens are ignored."""
    model.require_fitted()
    return sparse.csr_matrix(model.vectorizer.transform(list(texts)), dtype=np.float64)


def tfidf_vector(model: TfidfModel, text: str) -> sparse.csr_matrix:
    """Sparse 1 x |V| tf*idf vector for one text."""
    return tfidf_matrix(model, [text])


class CosineRanker:
    """Ranks a fixed unit collection against query texts by Tf-idf cosine."""

    def __init__(self, model: TfidfModel, units: Sequence[Unit]):
        model.require_fitted()
        self.model = model
        self.unit_ids = [uid for uid, _ in units]
        self._matrix = tfidf_matrix(model, [text for _, text in units])

    def similarities(self, query_text: str) -> np.ndarray:
        query = tfidf_vector(self.model, query_text)
        if query.nnz == 0:
            return np.zeros(len(self.unit_ids), dtype=np.float64)
        sims = cosine_similarity(query, self._matrix).ravel()
        return np.clip(sims, 0.0, 1.0)

    def rank(self, query_text: str, k: int | None = None) -> list[tuple[str, float]]:
        """Units by descending similarity (ties by id), truncated to ``k``."""
        if k is not None and k < 1:
            raise ArgumentError(f"k must be >= 1, got {k}")
        sims = self.similarities(query_text)
        ranked = [(uid, float(s)) for uid, s in zip(self.unit_ids, sims)]
        ranked.sort(key=lambda item: (-item[1], item[0]))
        return ranked if k is None else ranked[:k]


def cosine_rank_topk(
    model: TfidfModel, query_text: str, units: Sequence[Unit], k: int
) -> list[tuple[str, float]]:
    """Top-k units by Tf-idf cosine similarity to the query."""
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    return CosineRanker(model, units).rank(query_text, k)


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def _write_str(out: BinaryIO, value: str) -> None:
    raw = value.encode("utf-8")
    out.write(struct.pack("<I", len(raw)))
    out.write(raw)


def _read_exact(data: BinaryIO, size: int) -> bytes:
    raw = data.read(size)
    if len(raw) != size:
        raise FormatError("unexpected end of file")
    return raw


def _read_u32(data: BinaryIO) -> int:
    return struct.unpack("<I", _read_exact(data, 4))[0]


def _read_str(data: BinaryIO) -> str:
    return _read_exact(data, _read_u32(data)).decode("utf-8")


def _check_magic(data: BinaryIO, magic: bytes, path: Path) -> None:
    if data.read(len(magic)) != magic:
        raise FormatError(f"{path}: not a {magic.decode()} file")


def save_index(index: InvertedIndex, path: Path) -> None:
    """Write an index; identical input and config give identical bytes."""
    with open(path, "wb") as out:
        out.write(INDEX_MAGIC)
        _write_str(out, json.dumps(index.tokenizer.to_dict(), sort_keys=True))
        out.write(struct.pack("<I", index.unit_count))
        for uid in index.unit_ids:
            _write_str(out, uid)
            out.write(struct.pack("<I", index.doc_len[uid]))
        position = {uid: i for i, uid in enumerate(index.unit_ids)}
        postings = index.postings
        out.write(struct.pack("<I", len(postings)))
        for token in sorted(postings):
            _write_str(out, token)
            entries = postings[token]
            out.write(struct.pack("<I", len(entries)))
            for uid, tf in entries:
                out.write(struct.pack("<II", position[uid], tf))


def load_index(path: Path) -> InvertedIndex:
    with open(path, "rb") as data:
        _check_magic(data, INDEX_MAGIC, path)
        tokenizer = TokenizerConfig.from_dict(json.loads(_read_str(data)))
        unit_ids: list[str] = []
        doc_len: dict[str, int] = {}
        for _ in range(_read_u32(data)):
            uid = _read_str(data)
            unit_ids.append(uid)
            doc_len[uid] = _read_u32(data)
        postings: dict[str, dict[str, int]] = {}
        for _ in range(_read_u32(data)):
            token = _read_str(data)
            entries: dict[str, int] = {}
            for _ in range(_read_u32(data)):
                position, tf = struct.unpack("<II", _read_exact(data, 8))
                if position >= len(unit_ids):
                    raise FormatError(f"{path}: posting refers to unknown unit {position}")
                entries[unit_ids[position]] = tf
            postings[token] = entries
    return InvertedIndex(unit_ids, doc_len, postings, tokenizer=tokenizer)


def save_tfidf(model: TfidfModel, path: Path) -> None:
    model.require_fitted()
    with open(path, "wb") as out:
        out.write(TFIDF_MAGIC)
        _write_str(out, model.fitted_on)
        out.write(struct.pack("<I", model.unit_count))
        _write_str(out, json.dumps(model.tokenizer.to_dict(), sort_keys=True))
        terms = sorted(model.vocabulary, key=model.vocabulary.__getitem__)
        out.write(struct.pack("<I", len(terms)))
        for term in terms:
            _write_str(out, term)
            out.write(struct.pack("<d", float(model.idf[model.vocabulary[term]])))


def load_tfidf(path: Path) -> TfidfModel:
    with open(path, "rb") as data:
        _check_magic(data, TFIDF_MAGIC, path)
        fitted_on = _read_str(data)
        unit_count = _read_u32(data)
        tokenizer = TokenizerConfig.from_dict(json.loads(_read_str(data)))
        vocabulary: dict[str, int] = {}
        idf: list[float] = []
        for i in range(_read_u32(data)):
            vocabulary[_read_str(data)] = i
            idf.append(struct.unpack("<d", _read_exact(data, 8))[0])
    return TfidfModel(
        vocabulary=MappingProxyType(vocabulary),
        idf=np.array(idf, dtype=np.float64),
        fitted_on=fitted_on,
        unit_count=unit_count,
        tokenizer=tokenizer,
    )

