"""Run configuration for legalir.

Configuration priority (highest to lowest):
1. CLI flags
2. Environment variables (LEGALIR_SEED, LEGALIR_OUT)
3. Config file (flat ``key=value`` lines, or flat TOML when the name ends in
   ``.toml``; a ``manifest.json`` of an earlier run is accepted too)
4. Defaults

Every effective value, defaults included, is echoed into the run manifest.
"""

from __future__ import annotations

import logging
import os
import sys
from collections.abc import Callable, Mapping
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import platformdirs

from .exceptions import ArgumentError, ConfigurationError, FormatError
from .lexical import ENGLISH_STOPWORDS, Bm25Params, TokenizerConfig
from .manifest import RunManifest
from .pairscore import TrainingHyper
from .pipelines import FusionConfig, Selection

logger = logging.getLogger(__name__)

APP_NAME = "legalir"

TASKS = (
    "task1",
    "task2",
    "task3",
    "task4-entail",
    "task4-lawful",
    "stats",
    "sweep-k",
    "eval",
)

PATH_KEYS = (
    "cases",
    "articles",
    "questions",
    "civil_code",
    "task1_queries",
    "task2_queries",
    "model",
    "model_b",
    "external_scores",
    "lexical_scores",
    "predictions",
    "gold",
)

# Tasks that read the Civil Code from articles.jsonl or civil_code.txt
STATUTE_TASKS = ("task3", "task4-entail", "task4-lawful", "sweep-k")

FORMATS = ("json", "md", "table")

REQUIRED_KEYS: dict[str, tuple[str, ...]] = {
    "task1": ("cases", "task1_queries"),
    "task2": ("task2_queries",),
    "task3": ("questions",),
    "task4-entail": ("questions",),
    "task4-lawful": ("questions",),
    "stats": (),
    "sweep-k": ("questions",),
    "eval": ("predictions", "gold"),
}

LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def get_data_dir() -> Path:
    """Get the platform-appropriate data directory."""
    return Path(platformdirs.user_data_dir(APP_NAME))


def default_output_dir() -> Path:
    return get_data_dir() / "runs"


def log_level_from_env(default: int = logging.WARNING) -> int:
    """Level named by LEGALIR_LOG, or ``default`` when unset."""
    value = os.environ.get("LEGALIR_LOG")
    if not value:
        return default
    level = LOG_LEVELS.get(value.strip().upper())
    if level is None:
        raise ConfigurationError(
            f"Invalid LEGALIR_LOG value: {value} (choose from {', '.join(LOG_LEVELS)})",
            key="LEGALIR_LOG",
        )
    return level


# --------------------------------------------------------------------------
# Value coercion
# --------------------------------------------------------------------------


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "yes", "on", "1"):
        return True
    if text in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _to_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("booleans are not integers")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        return int(value)
    return int(str(value).strip())


def _to_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    return float(str(value).strip()) if isinstance(value, str) else float(value)


def _to_str(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value.strip()


def _items(value: Any) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    return [part.strip() for part in str(value).split(",") if part.strip()]


def _to_int_tuple(value: Any) -> tuple[int, ...]:
    return tuple(_to_int(v) for v in _items(value))


def _to_stopwords(value: Any) -> frozenset[str] | None:
    items = _items(value)
    if not items or items == ["none"]:
        return None
    if items == ["english"]:
        return ENGLISH_STOPWORDS
    return frozenset(items)


def _to_path(value: Any) -> Path:
    return Path(str(value).strip()).expanduser()


_COERCE: dict[str, Callable[[Any], Any]] = {
    "task": _to_str,
    **{key: _to_path for key in PATH_KEYS},
    "alpha": _to_float,
    "top_n": _to_int,
    "normalization": _to_str,
    "selection": _to_str,
    "threshold": _to_float,
    "fixed_k": _to_int,
    "aggregation": _to_str,
    "top_m": _to_int,
    "k": _to_int,
    "k_values": _to_int_tuple,
    "bm25_k1": _to_float,
    "bm25_b": _to_float,
    "lowercase": _to_bool,
    "min_token_len": _to_int,
    "stopwords": _to_stopwords,
    "task2_setting": _to_int,
    "approach": _to_str,
    "metric_aggregation": _to_str,
    "dev_prefix": _to_str,
    "entail_train_source": _to_str,
    "seed": _to_int,
    "output_dir": _to_path,
    "epochs": _to_int,
    "lr": _to_float,
    "l2": _to_float,
    "format": _to_str,
}


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------


def _parse_flat(text: str, path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"{path}:{line_no}: expected key=value, got {line!r}")
        if key in values:
            raise ConfigurationError(f"{path}:{line_no}: duplicate key {key!r}", key=key)
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key] = value
    return values


def _parse_toml(path: Path) -> dict[str, Any]:
    # Use tomllib on Python 3.11+, tomli otherwise
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib

    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Failed to parse config file {path}: {e}") from e
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigurationError(f"{path}: nested table [{key}] is not allowed", key=key)
    return data


def read_config_file(path: Path) -> dict[str, Any]:
    """Raw key/value pairs of a config file, before coercion."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}", key="config")
    if path.suffix == ".toml":
        return _parse_toml(path)
    if path.suffix == ".json":
        try:
            config = RunManifest.load(path).config
        except FormatError as e:
            raise ConfigurationError(str(e), key="config") from e
        return {key: value for key, value in config.items() if value is not None}
    return _parse_flat(path.read_text(encoding="utf-8"), path)


# --------------------------------------------------------------------------
# RunConfig
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Effective settings of one run."""

    task: str | None = None

    # Inputs
    cases: Path | None = None
    articles: Path | None = None
    questions: Path | None = None
    civil_code: Path | None = None
    task1_queries: Path | None = None
    task2_queries: Path | None = None
    model: Path | None = None
    model_b: Path | None = None
    external_scores: Path | None = None
    lexical_scores: Path | None = None
    predictions: Path | None = None
    gold: Path | None = None

    # Fusion and selection
    alpha: float = 0.85
    top_n: int = 25
    normalization: str = "minmax_per_query"
    selection: str = "threshold"
    threshold: float = 0.5
    fixed_k: int | None = None
    aggregation: str = "max"
    top_m: int = 3

    # Lexical
    k: int = 150
    k_values: tuple[int, ...] = (10, 50, 100, 150)
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    lowercase: bool = True
    min_token_len: int = 1
    stopwords: frozenset[str] | None = None

    # Tasks
    task2_setting: int = 1
    approach: str = "entailment"
    metric_aggregation: str = "macro"
    dev_prefix: str = "H29"
    entail_train_source: str = "gold"

    # Training and output
    seed: int = 0
    output_dir: Path | None = None
    epochs: int = 5
    lr: float = 0.1
    l2: float = 1e-6
    format: str = "json"

    @classmethod
    def load(
        cls,
        path: Path | None = None,
        overrides: Mapping[str, Any] | None = None,
        *,
        strict: bool = True,
    ) -> RunConfig:
        """Load configuration from all sources, respecting priority.

        Args:
            path: Config file (lowest priority of the dynamic sources)
            overrides: CLI-provided values; None entries are ignored
            strict: Reject unknown keys instead of warning about them

        Returns:
            Merged and range-checked configuration
        """
        config = cls()

        if path is not None:
            config._apply(read_config_file(path), str(path), strict)

        config._load_from_env()

        if overrides:
            config._apply(
                {k: v for k, v in overrides.items() if v is not None}, "command line", True
            )

        config.check_ranges()
        config.check_inputs(require_task=False)
        return config

    def _apply(self, values: Mapping[str, Any], source: str, strict: bool) -> None:
        for raw_key, raw_value in values.items():
            key = raw_key.replace("-", "_")
            if key not in _COERCE:
                if strict:
                    raise ConfigurationError(f"Unknown config key {raw_key!r} in {source}", key=key)
                logger.warning("Ignoring unknown config key %r in %s", raw_key, source)
                continue
            if raw_value is None:
                continue
            try:
                value = _COERCE[key](raw_value)
            except (TypeError, ValueError) as e:
                raise ConfigurationError(
                    f"Invalid value for {key} in {source}: {raw_value!r}", key=key
                ) from e
            setattr(self, key, value)

    def _load_from_env(self) -> None:
        """Load configuration from environment variables."""
        if seed := os.environ.get("LEGALIR_SEED"):
            try:
                self.seed = _to_int(seed)
            except ValueError:
                raise ConfigurationError(f"Invalid LEGALIR_SEED value: {seed}", key="seed")
        if out := os.environ.get("LEGALIR_OUT"):
            self.output_dir = _to_path(out)

    # -- validation -------------------------------------------------------

    def check_ranges(self) -> None:
        """Reject out-of-range or unknown values, naming the offending key."""

        def require(ok: bool, key: str, message: str) -> None:
            if not ok:
                raise ConfigurationError(f"{key}: {message}", key=key)

        require(
            self.task is None or self.task in TASKS, "task", f"must be one of {', '.join(TASKS)}"
        )
        require(0.0 <= self.alpha <= 1.0, "alpha", f"must lie in [0, 1], got {self.alpha}")
        require(self.top_n >= 1, "top_n", f"must be >= 1, got {self.top_n}")
        require(
            self.normalization in ("minmax_per_query", "none"),
            "normalization",
            "must be minmax_per_query or none",
        )
        require(
            self.selection in ("threshold", "fixed_k"), "selection", "must be threshold or fixed_k"
        )
        require(
            0.0 <= self.threshold <= 1.0, "threshold", f"must lie in [0, 1], got {self.threshold}"
        )
        if self.selection == "fixed_k":
            require(self.fixed_k is not None, "fixed_k", "required when selection=fixed_k")
        require(self.fixed_k is None or self.fixed_k >= 1, "fixed_k", "must be >= 1")
        require(
            self.aggregation in ("max", "mean_top_m"), "aggregation", "must be max or mean_top_m"
        )
        require(self.top_m >= 1, "top_m", f"must be >= 1, got {self.top_m}")
        require(self.k >= 1, "k", f"must be >= 1, got {self.k}")
        require(
            bool(self.k_values) and all(k >= 1 for k in self.k_values),
            "k_values",
            "must be a non-empty list of integers >= 1",
        )
        require(self.bm25_k1 >= 0, "bm25_k1", f"must be >= 0, got {self.bm25_k1}")
        require(0.0 <= self.bm25_b <= 1.0, "bm25_b", f"must lie in [0, 1], got {self.bm25_b}")
        require(self.min_token_len >= 1, "min_token_len", "must be >= 1")
        require(self.task2_setting in (1, 2, 3), "task2_setting", "must be 1, 2 or 3")
        require(
            self.approach in ("entailment", "lawfulness"),
            "approach",
            "must be entailment or lawfulness",
        )
        require(
            self.metric_aggregation in ("macro", "micro"),
            "metric_aggregation",
            "must be macro or micro",
        )
        require(self.seed >= 0, "seed", f"must be >= 0, got {self.seed}")
        require(self.epochs >= 0, "epochs", f"must be >= 0, got {self.epochs}")
        require(self.lr > 0, "lr", f"must be > 0, got {self.lr}")
        require(self.l2 >= 0, "l2", f"must be >= 0, got {self.l2}")
        require(
            self.entail_train_source in ("gold", "tfidf"),
            "entail_train_source",
            "must be gold or tfidf",
        )
        require(bool(self.dev_prefix), "dev_prefix", "must be non-empty")
        require(self.format in FORMATS, "format", f"must be one of {', '.join(FORMATS)}")

    def check_inputs(self, require_task: bool = True) -> None:
        """Required keys of the task are set and every referenced path exists."""
        if self.task is None:
            if require_task:
                raise ConfigurationError("Missing required config key 'task'", key="task")
        else:
            if self.task in STATUTE_TASKS and self.articles is None and self.civil_code is None:
                raise ConfigurationError(
                    "Missing required config key 'articles' (or 'civil_code') "
                    f"for task {self.task}",
                    key="articles",
                )
            for key in REQUIRED_KEYS[self.task]:
                if getattr(self, key) is None:
                    raise ConfigurationError(
                        f"Missing required config key {key!r} for task {self.task}", key=key
                    )
            if self.task == "stats" and not (self.cases or self.articles or self.civil_code):
                raise ConfigurationError(
                    "task stats needs 'cases', 'articles' or 'civil_code'", key="cases"
                )
            bm25_slot = self.task == "task1" or (self.task == "task2" and self.task2_setting != 3)
            if bm25_slot and self.normalization == "none":
                raise ConfigurationError(
                    "normalization=none is only valid with lexical_scores (task2_setting=3); "
                    "BM25 scores are unbounded",
                    key="normalization",
                )
            if self.task == "task2":
                if self.external_scores is not None:
                    raise ConfigurationError(
                        "external_scores cannot fill the supporting slot of task2; "
                        "use lexical_scores with task2_setting=3",
                        key="external_scores",
                    )
                if self.task2_setting == 3 and self.lexical_scores is None:
                    raise ConfigurationError(
                        "task2_setting=3 needs 'lexical_scores'", key="lexical_scores"
                    )

        for key in PATH_KEYS:
            path = getattr(self, key)
            if path is not None and not path.exists():
                raise ConfigurationError(f"{key}: file not found: {path}", key=key)

    # -- derived settings --------------------------------------------------

    @property
    def output_path(self) -> Path:
        return self.output_dir if self.output_dir is not None else default_output_dir()

    def fusion_config(self) -> FusionConfig:
        try:
            selection = (
                Selection.fixed_k(self.fixed_k)
                if self.selection == "fixed_k"
                else Selection.threshold(self.threshold)
            )
            return FusionConfig(
                alpha=self.alpha,
                top_n=self.top_n,
                normalization=self.normalization,
                selection=selection,
                aggregation=self.aggregation,
                top_m=self.top_m,
            )
        except ArgumentError as e:
            raise ConfigurationError(str(e)) from e

    def bm25_params(self) -> Bm25Params:
        return Bm25Params(self.bm25_k1, self.bm25_b)

    def tokenizer_config(self) -> TokenizerConfig:
        return TokenizerConfig(self.lowercase, self.stopwords, self.min_token_len)

    def training_hyper(self) -> TrainingHyper:
        return TrainingHyper(lr=self.lr, epochs=self.epochs, l2=self.l2, seed=self.seed)

    def input_paths(self) -> dict[str, Path | None]:
        return {key: getattr(self, key) for key in PATH_KEYS}

    def as_dict(self) -> dict[str, Any]:
        """Every effective value as JSON-ready data."""
        result: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, frozenset):
                value = sorted(value)
            elif isinstance(value, tuple):
                value = list(value)
            result[f.name] = value
        result["output_dir"] = str(self.output_path)
        return result


def load_config(
    path: Path | None = None,
    *,
    strict: bool = True,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Parse a config file into a range-checked :class:`RunConfig`."""
    return RunConfig.load(path, overrides, strict=strict)
