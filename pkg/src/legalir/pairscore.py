"""Supporting-pair scoring.

A :class:`PairScorer` maps a (left, right) text pair to a supporting score in
[0, 1]. Two implementations exist:

- :class:`LinearPairScorer`, a feature-hashed logistic model trained with
  seeded SGD on weakly labeled pairs mined from case documents.
- :class:`ExternalScoreTable`, a lookup of scores produced elsewhere (for
  instance by a fine-tuned neural model) keyed by (query id, candidate id).

Feature layout of a pair, all hashed with seeded MurmurHash3 into ``dim``
buckets (unsigned, collisions add up):

- ``L:`` unigrams and bigrams of the left text
- ``R:`` unigrams and bigrams of the right text
- ``X:`` every token shared by both sides

Each namespace block is L2-normalised on its own. A final real-valued
feature carries the Jaccard overlap of the two token sets unscaled.
"""

from __future__ import annotations

import logging
import math
import re
import struct
from abc import ABC, abstractmethod
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType

import numpy as np
from scipy import sparse
from scipy.special import expit
from sklearn.utils import murmurhash3_32

from .corpus import BarQuestion, CaseDocument, StatuteArticle, iter_jsonl
from .exceptions import (
    ArgumentError,
    FormatError,
    ModelStateError,
    ParseError,
    ScoreRangeError,
    TrainingError,
)
from .formatters import dumps_jsonl, write_atomic, write_atomic_bytes
from .lexical import DEFAULT_TOKENIZER, CosineRanker, TfidfModel, tokenize

logger = logging.getLogger(__name__)

SCORER_MAGIC = b"LPSC1"
DEFAULT_DIM = 2**18
DEFAULT_MARKERS = ("Therefore", "Accordingly", "For these reasons", "Consequently")

_OVERLAP_KEY = "X:__overlap__"
_ORDINAL_RE = re.compile(r"^\[\d+\]\s*")
# Keeps scores strictly inside (0, 1) when the logit saturates
_EPS = 1e-12
_HEADER = struct.Struct("<IIId")


class PairLabel(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class TextPair:
    """A (left, right) text pair with an optional supporting label."""

    left: str
    right: str
    label: PairLabel | None = None

    def __post_init__(self) -> None:
        if not self.left.strip() or not self.right.strip():
            raise ArgumentError("both texts of a pair must be non-empty")

    def to_dict(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "label": self.label.value if self.label else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TextPair:
        label = data.get("label")
        return cls(data["left"], data["right"], PairLabel(label) if label else None)


def load_pairs(path: Path) -> list[TextPair]:
    pairs = []
    for line_no, record in iter_jsonl(Path(path)):
        try:
            pairs.append(TextPair.from_dict(record))
        except (KeyError, ValueError) as e:
            raise ParseError(f"invalid pair record: {e}", path, line_no) from e
    return pairs


def dump_pairs(pairs: Iterable[TextPair], path: Path) -> None:
    write_atomic(Path(path), dumps_jsonl(p.to_dict() for p in pairs))


# --------------------------------------------------------------------------
# Weak labeling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakLabelConfig:
    """Marker-sentence heuristic for mining supporting pairs."""

    marker_list: tuple[str, ...] = DEFAULT_MARKERS
    negatives_per_positive: int = 3
    min_negative_distance: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.marker_list or not all(m.strip() for m in self.marker_list):
            raise ArgumentError("marker_list must contain at least one non-empty marker")
        if self.negatives_per_positive < 1:
            raise ArgumentError("negatives_per_positive must be >= 1")
        if self.min_negative_distance < 2:
            raise ArgumentError("min_negative_distance must be >= 2")
        if self.seed < 0:
            raise ArgumentError(f"seed must be non-negative, got {self.seed}")


def starts_with_marker(sentence: str, markers: Sequence[str]) -> bool:
    """True if the sentence opens with a marker, after an optional ``[n]`` ordinal."""
    text = _ORDINAL_RE.sub("", sentence.strip(), count=1)
    for marker in markers:
        if text.startswith(marker):
            rest = text[len(marker) :]
            if not rest or not rest[0].isalnum():
                return True
    return False


def _document_rng(seed: int, doc_id: str) -> np.random.Generator:
    # Seeded per document so output does not depend on corpus order
    return np.random.default_rng([seed, murmurhash3_32(doc_id, seed=0, positive=True)])


def extract_weak_pairs(docs: Sequence[CaseDocument], config: WeakLabelConfig) -> list[TextPair]:
    """Mine supporting pairs from conclusion sentences.

    Every sentence opening with a marker is paired with the paragraph right
    before it (positive) and with up to ``negatives_per_positive`` paragraphs
    of the same document at least ``min_negative_distance`` away (negative).
    """
    pairs: list[TextPair] = []
    for doc in docs:
        rng = _document_rng(config.seed, doc.id)
        for paragraph in doc.paragraphs[1:]:
            for sentence in paragraph.sentences:
                if not starts_with_marker(sentence, config.marker_list):
                    continue
                previous = doc.paragraphs[paragraph.ordinal - 1]
                pairs.append(TextPair(sentence, previous.text, PairLabel.POSITIVE))

                far = [
                    p
                    for p in doc.paragraphs
                    if abs(p.ordinal - paragraph.ordinal) >= config.min_negative_distance
                ]
                count = min(config.negatives_per_positive, len(far))
                if count == 0:
                    continue
                for i in rng.choice(len(far), size=count, replace=False):
                    pairs.append(TextPair(sentence, far[int(i)].text, PairLabel.NEGATIVE))
    logger.debug("Extracted %d weak pairs from %d documents", len(pairs), len(docs))
    return pairs


# --------------------------------------------------------------------------
# Features
# --------------------------------------------------------------------------


def _check_dim(dim: int) -> None:
    if dim < 1 or dim & (dim - 1):
        raise ArgumentError(f"feature dimension must be a power of two, got {dim}")


def _check_hash_seed(hash_seed: int) -> None:
    if not 0 <= hash_seed < 2**32:
        raise ArgumentError(f"hash_seed must fit in 32 unsigned bits, got {hash_seed}")


@lru_cache(maxsize=2**20)
def _bucket(key: str, hash_seed: int, dim: int) -> int:
    return murmurhash3_32(key, seed=hash_seed, positive=True) % dim


def _block(keys: Iterable[str], hash_seed: int, dim: int) -> dict[int, float]:
    counts = Counter(_bucket(k, hash_seed, dim) for k in keys)
    if not counts:
        return {}
    norm = math.sqrt(sum(c * c for c in counts.values()))
    return {i: c / norm for i, c in counts.items()}


def _ngram_keys(prefix: str, tokens: Sequence[str]) -> list[str]:
    keys = [f"{prefix}{t}" for t in tokens]
    keys += [f"{prefix}{a} {b}" for a, b in zip(tokens, tokens[1:])]
    return keys


def _jaccard(left: set[str], right: set[str], shared: int) -> float:
    union = len(left) + len(right) - shared
    return shared / union if union else 0.0


@dataclass(frozen=True)
class FeatureVector:
    """Sparse hashed features of one pair (unique, sorted indices)."""

    indices: np.ndarray
    values: np.ndarray
    overlap_ratio: float
    shared_tokens: frozenset[str] = field(default=frozenset())

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def _featurize_texts(left: str, right: str, hash_seed: int, dim: int) -> FeatureVector:
    left_tokens = tokenize(left, DEFAULT_TOKENIZER)
    right_tokens = tokenize(right, DEFAULT_TOKENIZER)
    left_set, right_set = set(left_tokens), set(right_tokens)
    shared = left_set & right_set
    ratio = _jaccard(left_set, right_set, len(shared))

    merged: dict[int, float] = {}
    blocks = (
        _block(_ngram_keys("L:", left_tokens), hash_seed, dim),
        _block(_ngram_keys("R:", right_tokens), hash_seed, dim),
        _block((f"X:{t}" for t in sorted(shared)), hash_seed, dim),
        {_bucket(_OVERLAP_KEY, hash_seed, dim): ratio} if ratio else {},
    )
    for block in blocks:
        for index, value in block.items():
            merged[index] = merged.get(index, 0.0) + value

    indices = np.fromiter(sorted(merged), dtype=np.int64, count=len(merged))
    values = np.array([merged[i] for i in indices.tolist()], dtype=np.float64)
    return FeatureVector(indices, values, ratio, frozenset(shared))


def featurize(pair: TextPair, hash_seed: int = 0, dim: int = DEFAULT_DIM) -> FeatureVector:
    """Hash a pair into the L/R/X namespaces plus the overlap-ratio feature."""
    _check_dim(dim)
    _check_hash_seed(hash_seed)
    return _featurize_texts(pair.left, pair.right, hash_seed, dim)


def feature_matrix(
    features: Sequence[FeatureVector], dim: int
) -> sparse.csr_matrix:
    """Stack feature vectors into an (n, dim) CSR matrix."""
    indptr = np.zeros(len(features) + 1, dtype=np.int64)
    np.cumsum([f.nnz for f in features], out=indptr[1:])
    indices = np.concatenate([f.indices for f in features]) if features else np.empty(0, np.int64)
    data = np.concatenate([f.values for f in features]) if features else np.empty(0)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(features), dim))


# --------------------------------------------------------------------------
# Scorers
# --------------------------------------------------------------------------


class PairScorer(ABC):
    """Anything that produces a supporting score in [0, 1]."""

    @abstractmethod
    def score(self, item: TextPair | tuple[str, str]) -> float:
        """Score a text pair, or a (query_id, candidate_id) key for id-based scorers."""

    @abstractmethod
    def score_candidates(
        self, query_id: str, query_text: str, candidates: Sequence[tuple[str, str]]
    ) -> np.ndarray:
        """Score one query against (candidate_id, text) candidates, in input order."""


def score(scorer: PairScorer, item: TextPair | tuple[str, str]) -> float:
    return scorer.score(item)


class LinearPairScorer(PairScorer):
    """Logistic model over hashed pair features. Immutable after construction."""

    def __init__(
        self,
        weights: np.ndarray,
        bias: float = 0.0,
        hash_seed: int = 0,
        trained_epochs: int = 0,
        loss_history: Sequence[float] = (),
    ):
        weights = np.array(weights, dtype=np.float64)
        if weights.ndim != 1:
            raise ArgumentError("weights must be a 1-D array")
        _check_dim(weights.size)
        _check_hash_seed(hash_seed)
        weights.flags.writeable = False
        self._weights = weights
        self._bias = float(bias)
        self._hash_seed = hash_seed
        self._trained_epochs = trained_epochs
        self._loss_history = tuple(float(x) for x in loss_history)

    @classmethod
    def zeros(cls, dim: int = DEFAULT_DIM, hash_seed: int = 0) -> LinearPairScorer:
        _check_dim(dim)
        return cls(np.zeros(dim), 0.0, hash_seed, 0)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def bias(self) -> float:
        return self._bias

    @property
    def dim(self) -> int:
        return int(self._weights.size)

    @property
    def hash_seed(self) -> int:
        return self._hash_seed

    @property
    def trained_epochs(self) -> int:
        return self._trained_epochs

    @property
    def loss_history(self) -> tuple[float, ...]:
        return self._loss_history

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearPairScorer):
            return NotImplemented
        return (
            self._bias == other._bias
            and self._hash_seed == other._hash_seed
            and self._trained_epochs == other._trained_epochs
            and np.array_equal(self._weights, other._weights)
        )

    def __repr__(self) -> str:
        return (
            f"LinearPairScorer(dim={self.dim}, hash_seed={self._hash_seed}, "
            f"trained_epochs={self._trained_epochs})"
        )

    def featurize(self, pair: TextPair) -> FeatureVector:
        return _featurize_texts(pair.left, pair.right, self._hash_seed, self.dim)

    def score_features(self, features: FeatureVector) -> float:
        z = float(self._weights[features.indices] @ features.values) + self._bias
        return float(np.clip(expit(z), _EPS, 1.0 - _EPS))

    def score(self, item: TextPair | tuple[str, str]) -> float:
        if not isinstance(item, TextPair):
            raise ArgumentError("LinearPairScorer scores TextPair instances, not id keys")
        return self.score_features(self.featurize(item))

    def score_candidates(
        self, query_id: str, query_text: str, candidates: Sequence[tuple[str, str]]
    ) -> np.ndarray:
        return self.score_matrix([query_text], [text for _, text in candidates])[0]

    def score_matrix(self, lefts: Sequence[str], rights: Sequence[str]) -> np.ndarray:
        """Scores of every (left, right) combination as a (len(lefts), len(rights)) array.

        Equal to scoring each pair on its own. The L and R blocks are scored
        once per text; only the shared-token block depends on the pair.
        """
        w, seed, dim = self._weights, self._hash_seed, self.dim

        def side(texts: Sequence[str], prefix: str) -> tuple[list[list[str]], np.ndarray]:
            tokens = [tokenize(t, DEFAULT_TOKENIZER) for t in texts]
            partial = np.array(
                [
                    sum(w[i] * v for i, v in _block(_ngram_keys(prefix, toks), seed, dim).items())
                    for toks in tokens
                ],
                dtype=np.float64,
            )
            return tokens, partial

        left_tokens, left_part = side(lefts, "L:")
        right_tokens, right_part = side(rights, "R:")
        left_sets = [set(t) for t in left_tokens]
        right_sets = [set(t) for t in right_tokens]
        w_overlap = w[_bucket(_OVERLAP_KEY, seed, dim)]

        logits = self._bias + left_part[:, None] + right_part[None, :]
        for i, left_set in enumerate(left_sets):
            for j, right_set in enumerate(right_sets):
                shared = left_set & right_set
                if not shared:
                    continue
                x_block = _block((f"X:{t}" for t in sorted(shared)), seed, dim)
                logits[i, j] += sum(w[k] * v for k, v in x_block.items())
                logits[i, j] += w_overlap * _jaccard(left_set, right_set, len(shared))
        return np.clip(expit(logits), _EPS, 1.0 - _EPS)


@dataclass(frozen=True)
class ExternalScoreTable(PairScorer):
    """Scores computed outside this package, keyed by (query_id, candidate_id)."""

    scores: Mapping[tuple[str, str], float]
    default_score: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.default_score <= 1.0:
            raise ScoreRangeError("default_score must lie in [0, 1]", self.default_score)
        for key, value in self.scores.items():
            if not 0.0 <= value <= 1.0:
                raise ScoreRangeError(f"score for {key} outside [0, 1]", value)
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))

    def __len__(self) -> int:
        return len(self.scores)

    def __contains__(self, key: object) -> bool:
        return key in self.scores

    def get(self, query_id: str, candidate_id: str) -> float | None:
        return self.scores.get((query_id, candidate_id))

    def score(self, item: TextPair | tuple[str, str]) -> float:
        if isinstance(item, TextPair):
            raise ArgumentError("ExternalScoreTable is keyed by (query_id, candidate_id)")
        return self.scores.get(tuple(item), self.default_score)

    def score_candidates(
        self, query_id: str, query_text: str, candidates: Sequence[tuple[str, str]]
    ) -> np.ndarray:
        return np.array(
            [self.scores.get((query_id, cid), self.default_score) for cid, _ in candidates],
            dtype=np.float64,
        )

    def missing(self, query_id: str, candidate_ids: Iterable[str]) -> int:
        """How many of the candidates have no stored score for this query."""
        return sum(1 for cid in candidate_ids if (query_id, cid) not in self.scores)


def load_external_scores(path: Path, default_score: float = 0.0) -> ExternalScoreTable:
    """Read ``query_id<TAB>candidate_id<TAB>score`` lines (UTF-8, no header)."""
    path = Path(path)
    scores: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3 or not fields[0] or not fields[1]:
                raise ParseError("expected query_id<TAB>candidate_id<TAB>score", path, line_no)
            try:
                value = float(fields[2])
            except ValueError as e:
                raise ParseError(f"score is not a number: {fields[2]!r}", path, line_no) from e
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ScoreRangeError(f"{path}:{line_no}: score {value} outside [0, 1]", value)
            key = (fields[0], fields[1])
            if key in scores:
                raise ParseError(f"duplicate entry for {key[0]}/{key[1]}", path, line_no)
            scores[key] = value
    logger.debug("Loaded %d external scores from %s", len(scores), path)
    return ExternalScoreTable(scores, default_score)


def dump_external_scores(rows: Iterable[tuple[str, str, float]], path: Path) -> None:
    write_atomic(Path(path), "".join(f"{q}\t{c}\t{s!r}\n" for q, c, s in rows))


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingHyper:
    """SGD hyper-parameters."""

    lr: float = 0.1
    epochs: int = 5
    l2: float = 1e-6
    seed: int = 0
    dim: int = DEFAULT_DIM
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ArgumentError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ArgumentError(f"epochs must be >= 0, got {self.epochs}")
        if self.l2 < 0:
            raise ArgumentError(f"l2 must be >= 0, got {self.l2}")
        _check_dim(self.dim)
        _check_hash_seed(self.hash_seed)


def logistic_loss(
    weights: np.ndarray, bias: float, matrix: sparse.csr_matrix, y: np.ndarray, l2: float
) -> float:
    """Mean logistic loss plus ``l2 / 2 * ||w||^2``."""
    z = matrix @ weights + bias
    data = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(data + 0.5 * l2 * float(weights @ weights))


def logistic_gradient(
    weights: np.ndarray, bias: float, matrix: sparse.csr_matrix, y: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`logistic_loss` with respect to (weights, bias)."""
    residual = expit(matrix @ weights + bias) - y
    grad_w = matrix.T @ residual / matrix.shape[0] + l2 * weights
    return np.asarray(grad_w, dtype=np.float64), float(np.mean(residual))


def _labels(pairs: Sequence[TextPair]) -> np.ndarray:
    if any(p.label is None for p in pairs):
        raise ArgumentError("training pairs must all be labeled")
    return np.array([p.label is PairLabel.POSITIVE for p in pairs], dtype=np.float64)


def _sgd(
    matrix: sparse.csr_matrix,
    y: np.ndarray,
    weights: np.ndarray,
    bias: float,
    hyper: TrainingHyper,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, list[float]]:
    history: list[float] = []
    indptr, indices, data = matrix.indptr, matrix.indices, matrix.data
    for epoch in range(hyper.epochs):
        for row in rng.permutation(matrix.shape[0]):
            cols = indices[indptr[row] : indptr[row + 1]]
            vals = data[indptr[row] : indptr[row + 1]]
            residual = expit(float(weights[cols] @ vals) + bias) - y[row]
            # L2 decay only touches the active coordinates
            weights[cols] -= hyper.lr * (residual * vals + hyper.l2 * weights[cols])
            bias -= hyper.lr * residual
        history.append(logistic_loss(weights, bias, matrix, y, hyper.l2))
        logger.debug("epoch %d: loss %.6f", epoch + 1, history[-1])
    return weights, bias, history


def _check_two_classes(y: np.ndarray) -> None:
    if y.size == 0:
        raise TrainingError("no training pairs")
    if np.all(y == y[0]):
        raise TrainingError("training data contains a single class")


def train(pairs: Sequence[TextPair], hyper: TrainingHyper | None = None) -> LinearPairScorer:
    """Fit a :class:`LinearPairScorer` with seeded logistic SGD."""
    hyper = hyper or TrainingHyper()
    y = _labels(pairs)
    _check_two_classes(y)
    matrix = feature_matrix(
        [_featurize_texts(p.left, p.right, hyper.hash_seed, hyper.dim) for p in pairs],
        hyper.dim,
    )
    rng = np.random.default_rng(hyper.seed)
    weights, bias, history = _sgd(matrix, y, np.zeros(hyper.dim), 0.0, hyper, rng)
    return LinearPairScorer(weights, bias, hyper.hash_seed, hyper.epochs, history)


def continue_training(
    scorer: LinearPairScorer, pairs: Sequence[TextPair], hyper: TrainingHyper | None = None
) -> LinearPairScorer:
    """Keep training an existing scorer on new pairs with the same hyper-parameters.

    Hashing (seed and dimension) comes from the scorer. Shuffling draws from a
    stream keyed by the seed and the epochs already trained.
    """
    hyper = hyper or TrainingHyper()
    y = _labels(pairs)
    _check_two_classes(y)
    matrix = feature_matrix(
        [_featurize_texts(p.left, p.right, scorer.hash_seed, scorer.dim) for p in pairs],
        scorer.dim,
    )
    rng = np.random.default_rng([hyper.seed, scorer.trained_epochs])
    weights, bias, history = _sgd(matrix, y, scorer.weights.copy(), scorer.bias, hyper, rng)
    return LinearPairScorer(
        weights,
        bias,
        scorer.hash_seed,
        scorer.trained_epochs + hyper.epochs,
        scorer.loss_history + tuple(history),
    )


def build_task3_training_pairs(
    questions: Sequence[BarQuestion],
    articles: Sequence[StatuteArticle],
    tfidf_model: TfidfModel,
    k: int,
) -> list[TextPair]:
    """Pair each question with its Tf-idf top-k articles; positive iff the article is gold."""
    ranker = CosineRanker(tfidf_model, [(a.id, a.content) for a in articles])
    by_id = {a.id: a for a in articles}
    pairs = []
    for question in questions:
        for article_id, _ in ranker.rank(question.content, k):
            label = (
                PairLabel.POSITIVE
                if article_id in question.relevant_article_ids
                else PairLabel.NEGATIVE
            )
            pairs.append(TextPair(question.content, by_id[article_id].content, label))
    return pairs


# --------------------------------------------------------------------------
# Single-text classification
# --------------------------------------------------------------------------


class LawfulnessClassifier:
    """Yes/no classifier over one text: pair features with an empty right side."""

    def __init__(self, scorer: LinearPairScorer, trained: bool = True):
        self.scorer = scorer
        self.trained = trained

    @classmethod
    def untrained(cls, dim: int = DEFAULT_DIM, hash_seed: int = 0) -> LawfulnessClassifier:
        return cls(LinearPairScorer.zeros(dim, hash_seed), trained=False)

    @property
    def is_trained(self) -> bool:
        return self.trained

    def score(self, text: str) -> float:
        if not self.is_trained:
            raise ModelStateError("lawfulness classifier has not been trained")
        features = _featurize_texts(text, "", self.scorer.hash_seed, self.scorer.dim)
        return self.scorer.score_features(features)


def train_unary(
    texts: Sequence[str], labels: Sequence[bool], hyper: TrainingHyper | None = None
) -> LawfulnessClassifier:
    """Fit a :class:`LawfulnessClassifier` on (text, is_yes) samples.

    With ``epochs=0`` the result is trained but zero-weight, scoring 0.5 everywhere.
    """
    hyper = hyper or TrainingHyper()
    if len(texts) != len(labels):
        raise ArgumentError("texts and labels differ in length")
    y = np.array(labels, dtype=np.float64)
    _check_two_classes(y)
    matrix = feature_matrix(
        [_featurize_texts(t, "", hyper.hash_seed, hyper.dim) for t in texts], hyper.dim
    )
    rng = np.random.default_rng(hyper.seed)
    weights, bias, history = _sgd(matrix, y, np.zeros(hyper.dim), 0.0, hyper, rng)
    return LawfulnessClassifier(
        LinearPairScorer(weights, bias, hyper.hash_seed, hyper.epochs, history)
    )


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def save_scorer(scorer: LinearPairScorer, path: Path) -> None:
    """Write an ``LPSC1`` file: magic, dim, hash_seed, trained_epochs, bias, weights."""
    header = _HEADER.pack(scorer.dim, scorer.hash_seed, scorer.trained_epochs, scorer.bias)
    payload = scorer.weights.astype("<f8").tobytes()
    write_atomic_bytes(Path(path), SCORER_MAGIC + header + payload)


def load_scorer(path: Path) -> LinearPairScorer:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(SCORER_MAGIC):
        raise FormatError(f"{path}: not an LPSC1 scorer file")
    offset = len(SCORER_MAGIC)
    if len(raw) < offset + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    dim, hash_seed, epochs, bias = _HEADER.unpack_from(raw, offset)
    offset += _HEADER.size
    if len(raw) != offset + 8 * dim:
        raise FormatError(f"{path}: expected {dim} weights, file size does not match")
    weights = np.frombuffer(raw, dtype="<f8", count=dim, offset=offset).astype(np.float64)
    try:
        return LinearPairScorer(weights, bias, hash_seed, epochs)
    except ArgumentError as e:
        raise FormatError(f"{path}: {e}") from e
