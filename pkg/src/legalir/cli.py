"""Command-line interface for legalir."""

from __future__ import annotations

import logging
import sys
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .config import RunConfig, load_config, log_level_from_env
from .corpus import (
    dump_articles,
    dump_cases,
    load_articles,
    load_fragment_queries,
    parse_case_corpus,
    parse_civil_code,
)
from .exceptions import ArgumentError, LegalIRError
from .formatters import get_formatter
from .lexical import build_index, save_index, save_tfidf, tfidf_fit
from .pairscore import (
    PairLabel,
    WeakLabelConfig,
    continue_training,
    dump_external_scores,
    dump_pairs,
    extract_weak_pairs,
    load_pairs,
    load_scorer,
    save_scorer,
    train,
)
from .runner import execute
from .synthetic import SyntheticSpec, generate_synthetic, write_dataset

console = Console(stderr=True)

PathOption = click.Path(dir_okay=True, path_type=Path)
FileOption = click.Path(dir_okay=False, path_type=Path)


def _fail(error: BaseException) -> None:
    # One plain line on stderr; rich would wrap it at the console width
    click.echo(f"error: {type(error).__name__}: {error}", err=True)
    sys.exit(1)


@contextmanager
def _handled() -> Iterator[None]:
    try:
        yield
    except LegalIRError as e:
        _fail(e)
    except OSError as e:
        _fail(e)
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        sys.exit(130)


def setup_logging(verbose: bool) -> None:
    """Configure logging based on verbosity and LEGALIR_LOG."""
    level = logging.DEBUG if verbose else log_level_from_env(logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_time=False, show_path=False)],
    )


def common_options(command: Callable) -> Callable:
    """Flags shared by every configurable command."""
    options = [
        click.option(
            "--config",
            "-c",
            "config_path",
            type=FileOption,
            help="Flat key=value (or .toml) config file",
        ),
        click.option("--seed", type=int, help="Random seed (or LEGALIR_SEED)"),
        click.option(
            "--out", "output_dir", type=PathOption, help="Output directory (or LEGALIR_OUT)"
        ),
        click.option(
            "--lax", is_flag=True, help="Warn about unknown config keys instead of failing"
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def fusion_options(command: Callable) -> Callable:
    options = [
        click.option("--alpha", type=float, help="Fusion weight of the supporting score"),
        click.option("--top-n", type=int, help="BM25 survivors re-ranked per query"),
        click.option("--threshold", type=float, help="Selection threshold on fused scores"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def format_option(command: Callable) -> Callable:
    return click.option(
        "--format",
        "-f",
        "output_format",
        type=click.Choice(["json", "md", "table"]),
        help="Report format on stdout (default: json)",
    )(command)


def _config(config_path: Path | None, lax: bool, **overrides: Any) -> RunConfig:
    return load_config(config_path, strict=not lax, overrides=overrides)


def _run(task: str, config_path: Path | None, lax: bool, **overrides: Any) -> None:
    """Load config, execute one task and print its report."""
    with _handled():
        config = _config(config_path, lax, task=task, **overrides)
        result = execute(config, console)
        if config.format == "md":
            click.echo(result.markdown, nl=False)
        elif config.format == "table":
            formatter = get_formatter("table", title=f"legalir {result.task}")
            formatter.format_stream(result.rows, sys.stdout)
        else:
            click.echo(get_formatter("json", indent=2).format(result.report), nl=False)
        console.print(f"[dim]Artifacts written to {result.output_dir}[/dim]")


@click.group(invoke_without_command=True)
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose output")
@click.option("--version", is_flag=True, help="Show version and exit")
@click.pass_context
def main(ctx: click.Context, verbose: bool, version: bool) -> None:
    """legalir - two-stage legal case and statute retrieval with entailment.

    Stage one ranks candidates with BM25 or Tf-idf; stage two re-ranks the
    survivors with a learned pair scorer and fuses both scores.

    \b
    Examples:
        legalir gen-synth --out data/
        legalir run-task1 --cases data/cases.jsonl --queries data/task1_queries.jsonl
        legalir eval --predictions runs/predictions.jsonl --gold data/gold_task1.jsonl
    """
    with _handled():
        setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose

    if version:
        click.echo(f"legalir {__version__}")
        ctx.exit(0)

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


# --------------------------------------------------------------------------
# Data preparation
# --------------------------------------------------------------------------


@main.command()
@click.option(
    "--cases-dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Directory of <case_id>.txt files, paragraphs separated by blank lines",
)
@click.option("--civil-code", type=FileOption, help="Civil Code plain text")
@click.option("--out", "output_dir", type=PathOption, required=True, help="Output directory")
def ingest(cases_dir: Path | None, civil_code: Path | None, output_dir: Path) -> None:
    """Convert raw corpora into canonical JSON Lines.

    Writes cases.jsonl and/or articles.jsonl into --out.
    """
    with _handled():
        if cases_dir is None and civil_code is None:
            raise ArgumentError("give --cases-dir, --civil-code or both")
        output_dir.mkdir(parents=True, exist_ok=True)
        if cases_dir is not None:
            cases = parse_case_corpus(cases_dir, "plaintext-dir")
            dump_cases(cases, output_dir / "cases.jsonl")
            console.print(f"Wrote {len(cases)} case(s) to {output_dir / 'cases.jsonl'}")
        if civil_code is not None:
            articles = parse_civil_code(civil_code.read_text(encoding="utf-8"))
            dump_articles(articles, output_dir / "articles.jsonl")
            console.print(f"Wrote {len(articles)} article(s) to {output_dir / 'articles.jsonl'}")


@main.command()
@click.option("--cases", type=PathOption, help="Case corpus (JSONL or plaintext directory)")
@click.option("--articles", type=FileOption, help="articles.jsonl")
@click.option(
    "--kind",
    type=click.Choice(["bm25", "tfidf"]),
    default="bm25",
    help="Index type (default: bm25)",
)
@click.option("--output", "-o", "output_file", type=FileOption, required=True)
@common_options
def index(
    cases: Path | None,
    articles: Path | None,
    kind: str,
    output_file: Path,
    config_path: Path | None,
    seed: int | None,
    output_dir: Path | None,
    lax: bool,
) -> None:
    """Build a BM25 (LIRX1) or Tf-idf (LTFV1) index file.

    Case corpora are indexed per paragraph (<case_id>#<ordinal>), articles
    per article.
    """
    with _handled():
        if (cases is None) == (articles is None):
            raise ArgumentError("give exactly one of --cases or --articles")
        config = _config(config_path, lax, seed=seed, output_dir=output_dir)
        if cases is not None:
            docs = parse_case_corpus(cases, "plaintext-dir" if cases.is_dir() else "jsonl")
            units = [(f"{d.id}#{p.ordinal}", p.text) for d in docs for p in d.paragraphs]
        else:
            units = [(a.id, a.content) for a in load_articles(articles)]
        tokenizer = config.tokenizer_config()
        if kind == "bm25":
            save_index(build_index(units, tokenizer), output_file)
        else:
            save_tfidf(tfidf_fit(units, tokenizer), output_file)
        console.print(f"Indexed {len(units)} unit(s) into {output_file}")


@main.command("extract-weak")
@click.option("--cases", type=PathOption, required=True, help="Case corpus")
@click.option(
    "--marker",
    "markers",
    multiple=True,
    help="Sentence-initial marker (repeatable; default: Therefore, Accordingly, ...)",
)
@click.option("--output", "-o", "output_file", type=FileOption, required=True)
@common_options
def extract_weak(
    cases: Path,
    markers: tuple[str, ...],
    output_file: Path,
    config_path: Path | None,
    seed: int | None,
    output_dir: Path | None,
    lax: bool,
) -> None:
    """Mine weakly labeled supporting pairs from marker sentences into pairs.jsonl."""
    with _handled():
        config = _config(config_path, lax, seed=seed, output_dir=output_dir)
        docs = parse_case_corpus(cases, "plaintext-dir" if cases.is_dir() else "jsonl")
        weak = WeakLabelConfig(seed=config.seed)
        if markers:
            weak = WeakLabelConfig(marker_list=markers, seed=config.seed)
        pairs = extract_weak_pairs(docs, weak)
        dump_pairs(pairs, output_file)
        positives = sum(1 for p in pairs if p.label is PairLabel.POSITIVE)
        console.print(f"Wrote {len(pairs)} pair(s), {positives} positive, to {output_file}")


@main.command("train-pair")
@click.option("--pairs", type=FileOption, required=True, help="pairs.jsonl")
@click.option("--resume", type=FileOption, help="Continue training this LPSC1 model")
@click.option("--epochs", type=int, help="SGD epochs (default: 5)")
@click.option("--lr", type=float, help="Learning rate (default: 0.1)")
@click.option("--output", "-o", "output_file", type=FileOption, required=True)
@common_options
def train_pair(
    pairs: Path,
    resume: Path | None,
    epochs: int | None,
    lr: float | None,
    output_file: Path,
    config_path: Path | None,
    seed: int | None,
    output_dir: Path | None,
    lax: bool,
) -> None:
    """Train the pair scorer on labeled pairs and save it as LPSC1."""
    with _handled():
        config = _config(config_path, lax, seed=seed, output_dir=output_dir, epochs=epochs, lr=lr)
        labeled = load_pairs(pairs)
        hyper = config.training_hyper()
        if resume is not None:
            scorer = continue_training(load_scorer(resume), labeled, hyper)
        else:
            scorer = train(labeled, hyper)
        save_scorer(scorer, output_file)
        console.print(f"Trained on {len(labeled)} pair(s); model saved to {output_file}")


@main.command()
@click.option("--model", type=FileOption, required=True, help="LPSC1 model")
@click.option("--pairs", type=FileOption, help="pairs.jsonl to score")
@click.option("--queries", type=FileOption, help="task2_queries.jsonl to score")
@click.option("--output", "-o", "output_file", type=FileOption, required=True)
def score(model: Path, pairs: Path | None, queries: Path | None, output_file: Path) -> None:
    """Write supporting scores as query_id<TAB>candidate_id<TAB>score.

    With --queries every fragment is scored against its candidate
    paragraphs. With --pairs the rows are keyed "pairs" and the 1-based
    pair number.
    """
    with _handled():
        if (pairs is None) == (queries is None):
            raise ArgumentError("give exactly one of --pairs or --queries")
        scorer = load_scorer(model)
        rows: list[tuple[str, str, float]] = []
        if pairs is not None:
            for n, pair in enumerate(load_pairs(pairs), start=1):
                rows.append(("pairs", str(n), scorer.score(pair)))
        else:
            for query in load_fragment_queries(queries):
                values = scorer.score_candidates(query.query_id, query.fragment, query.candidates)
                rows.extend(
                    (query.query_id, cid, float(v))
                    for (cid, _), v in zip(query.candidates, values)
                )
        dump_external_scores(rows, output_file)
        console.print(f"Wrote {len(rows)} score(s) to {output_file}")


@main.command("gen-synth")
@click.option("--n-cases", type=int, default=100, show_default=True)
@click.option("--min-paragraphs", type=int, default=6, show_default=True)
@click.option("--max-paragraphs", type=int, default=10, show_default=True)
@click.option("--rate", "planted_support_rate", type=float, default=0.05, show_default=True)
@click.option("--vocab-size", type=int, default=2000, show_default=True)
@click.option("--n-articles", type=int, default=200, show_default=True)
@click.option("--n-questions", type=int, default=50, show_default=True)
@click.option("--distractors", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "output_dir", type=PathOption, required=True, help="Output directory")
def gen_synth(
    n_cases: int,
    min_paragraphs: int,
    max_paragraphs: int,
    planted_support_rate: float,
    vocab_size: int,
    n_articles: int,
    n_questions: int,
    distractors: int,
    seed: int,
    output_dir: Path,
) -> None:
    """Generate a synthetic dataset with planted supports and gold labels."""
    with _handled():
        spec = SyntheticSpec(
            n_cases=n_cases,
            paragraphs_per_case=(min_paragraphs, max_paragraphs),
            planted_support_rate=planted_support_rate,
            vocab_size=vocab_size,
            seed=seed,
            n_articles=n_articles,
            n_questions=n_questions,
            distractors_per_query=distractors,
        )
        dataset = generate_synthetic(spec)
        written = write_dataset(dataset, output_dir)
        rows = [{"artifact": name, "path": str(path)} for name, path in written.items()]
        get_formatter("table", title="Synthetic dataset").format_stream(rows, sys.stderr)
        console.print(f"{dataset.gold_pair_count} planted gold pair(s)")


# --------------------------------------------------------------------------
# Runs
# --------------------------------------------------------------------------


@main.command()
@click.option("--cases", type=PathOption, help="Case corpus")
@click.option("--articles", type=FileOption, help="articles.jsonl")
@click.option("--civil-code", type=FileOption, help="Civil Code plain text instead of --articles")
@click.option("--questions", type=FileOption, help="questions.jsonl")
@click.option("--queries", "task1_queries", type=FileOption, help="task1_queries.jsonl")
@common_options
@format_option
def stats(config_path: Path | None, lax: bool, output_format: str | None, **values: Any) -> None:
    """Corpus statistics: lengths, paragraph counts, gold per query."""
    _run("stats", config_path, lax, format=output_format, **values)


@main.command("run-task1")
@click.option("--cases", type=PathOption, help="Case corpus")
@click.option("--queries", "task1_queries", type=FileOption, help="task1_queries.jsonl")
@click.option("--model", type=FileOption, help="LPSC1 pair scorer (default: train on weak pairs)")
@click.option("--external-scores", type=FileOption, help="TSV of precomputed supporting scores")
@common_options
@fusion_options
@format_option
def run_task1(
    config_path: Path | None, lax: bool, output_format: str | None, **values: Any
) -> None:
    """Task 1: retrieve the cases that support each query case."""
    _run("task1", config_path, lax, format=output_format, **values)


@main.command("run-task2")
@click.option("--queries", "task2_queries", type=FileOption, help="task2_queries.jsonl")
@click.option("--model", type=FileOption, help="LPSC1 base scorer")
@click.option("--cases", type=PathOption, help="Case corpus for weak training without --model")
@click.option("--setting", "task2_setting", type=click.IntRange(1, 3), help="1, 2 or 3")
@click.option("--lexical-scores", type=FileOption, help="TSV for the lexical slot (setting 3)")
@common_options
@fusion_options
@format_option
def run_task2(
    config_path: Path | None, lax: bool, output_format: str | None, **values: Any
) -> None:
    """Task 2: find the paragraphs that entail each fragment."""
    _run("task2", config_path, lax, format=output_format, **values)


@main.command("run-task3")
@click.option("--articles", type=FileOption, help="articles.jsonl")
@click.option("--civil-code", type=FileOption, help="Civil Code plain text instead of --articles")
@click.option("--questions", type=FileOption, help="questions.jsonl")
@click.option("--model", type=FileOption, help="First ensemble member")
@click.option("--model-b", type=FileOption, help="Second ensemble member")
@click.option("--k", type=int, help="Tf-idf candidates per question (default: 150)")
@click.option("--threshold", type=float, help="Member decision threshold")
@click.option("--dev-prefix", help="Question id prefix of the evaluation split (default: H29)")
@common_options
@format_option
def run_task3(
    config_path: Path | None, lax: bool, output_format: str | None, **values: Any
) -> None:
    """Task 3: retrieve the Civil Code articles relevant to each question."""
    _run("task3", config_path, lax, format=output_format, **values)


@main.command("run-task4")
@click.option(
    "--approach",
    type=click.Choice(["entailment", "lawfulness"]),
    default="entailment",
    show_default=True,
)
@click.option("--articles", type=FileOption, help="articles.jsonl")
@click.option("--civil-code", type=FileOption, help="Civil Code plain text instead of --articles")
@click.option("--questions", type=FileOption, help="questions.jsonl")
@click.option("--model", type=FileOption, help="LPSC1 model for the chosen approach")
@click.option("--threshold", type=float, help="Entailment decision threshold")
@click.option("--dev-prefix", help="Question id prefix of the evaluation split (default: H29)")
@click.option(
    "--train-source",
    "entail_train_source",
    type=click.Choice(["gold", "tfidf"]),
    help="Entailment training pairs: gold articles only, or with Tf-idf extras (default: gold)",
)
@common_options
@format_option
def run_task4(
    approach: str, config_path: Path | None, lax: bool, output_format: str | None, **values: Any
) -> None:
    """Task 4: answer each bar exam question Yes or No."""
    task = "task4-entail" if approach == "entailment" else "task4-lawful"
    _run(task, config_path, lax, format=output_format, approach=approach, **values)


@main.command("sweep-k")
@click.option("--articles", type=FileOption, help="articles.jsonl")
@click.option("--civil-code", type=FileOption, help="Civil Code plain text instead of --articles")
@click.option("--questions", type=FileOption, help="questions.jsonl")
@click.option("--k-values", help="Comma-separated cutoffs, e.g. 10,50,150")
@common_options
@format_option
def sweep_k(config_path: Path | None, lax: bool, output_format: str | None, **values: Any) -> None:
    """Recall of gold articles within the Tf-idf top-k, for each k."""
    _run("sweep-k", config_path, lax, format=output_format, **values)


@main.command("eval")
@click.option(
    "--predictions",
    type=PathOption,
    help="predictions.jsonl, answers.jsonl, or a run directory holding one",
)
@click.option("--gold", type=FileOption, help="gold.jsonl")
@click.option(
    "--aggregation",
    "metric_aggregation",
    type=click.Choice(["macro", "micro"]),
    help="Metric aggregation (default: macro)",
)
@common_options
@format_option
def evaluate(
    config_path: Path | None, lax: bool, output_format: str | None, **values: Any
) -> None:
    """Score predictions against gold: P/R/F1/F2, MAP and R@k, or accuracy."""
    _run("eval", config_path, lax, format=output_format, **values)


if __name__ == "__main__":
    main()
