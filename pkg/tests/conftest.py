"""Shared test fixtures for the legalir test suite."""

from __future__ import annotations

import os
from collections.abc import Generator
from pathlib import Path
from unittest.mock import patch

import pytest

from legalir.corpus import Answer, BarQuestion, CaseDocument, StatuteArticle
from legalir.synthetic import SyntheticSpec, generate_synthetic, write_dataset

ARTICLE_303_TEXT = """\
Part II Real Rights
Chapter VIII Statutory Liens
Section 1 General Provisions
(Content of Statutory Liens)
Article 303 The holder of a statutory lien has the rights to have that holder's own claim \
satisfied prior to other obligees out of the assets of the relevant obligor in accordance \
with the provisions of laws including this Act.
"""


@pytest.fixture
def temp_data_dir(tmp_path: Path) -> Generator[Path, None, None]:
    """Create a temporary data directory for default run outputs."""
    data_dir = tmp_path / "data"
    data_dir.mkdir()

    with patch("legalir.config.get_data_dir", return_value=data_dir):
        yield data_dir


@pytest.fixture
def clean_env() -> Generator[None, None, None]:
    """Temporarily remove legalir-related environment variables."""
    env_vars = ["LEGALIR_LOG", "LEGALIR_SEED", "LEGALIR_OUT"]
    old_values = {var: os.environ.pop(var, None) for var in env_vars}

    try:
        yield
    finally:
        for var, value in old_values.items():
            if value is not None:
                os.environ[var] = value


@pytest.fixture
def article_303_text() -> str:
    """Return the Civil Code fixture containing Article 303."""
    return ARTICLE_303_TEXT


@pytest.fixture
def two_cases() -> list[CaseDocument]:
    """Return a two-document case corpus with known sizes."""
    return [
        CaseDocument.from_texts("d1", ["one two three", "four five"]),
        CaseDocument.from_texts("d2", ["six seven"]),
    ]


@pytest.fixture
def marker_case() -> CaseDocument:
    """Return a case with one conclusion sentence after a holding."""
    return CaseDocument.from_texts(
        "m1",
        [
            "Held the lease was terminated lawfully.",
            "Therefore, the lease was terminated lawfully. Thus the appeal fails.",
            "The tenant paid rent monthly.",
            "The landlord served notice in writing.",
            "Costs follow the event.",
        ],
    )


@pytest.fixture
def sample_articles() -> list[StatuteArticle]:
    """Return a small Civil Code."""
    texts = {
        "1": "The possessor of a thing may claim damages from the wrongdoer.",
        "2": "A contract for sale shall be void if the price is not fixed.",
        "3": "The lessee may claim reimbursement of necessary expenses from the lessor.",
        "4": "A guarantor shall perform the obligation if the principal obligor fails.",
    }
    return [
        StatuteArticle(aid, "Part I", "Chapter I", "Section 1", f"(Article {aid})", text)
        for aid, text in texts.items()
    ]


@pytest.fixture
def sample_questions() -> list[BarQuestion]:
    """Return labeled bar questions over ``sample_articles``."""
    rows = [
        ("H29-1-A", "The lessee may claim necessary expenses.", "3", Answer.YES),
        ("H29-2-B", "A guarantor shall not perform the obligation.", "4", Answer.NO),
        ("H28-1-A", "A contract for sale shall be void without a price.", "2", Answer.YES),
        ("H28-2-B", "The possessor may not claim damages.", "1", Answer.NO),
    ]
    return [
        BarQuestion(qid, text, frozenset({article_id}), label)
        for qid, text, article_id, label in rows
    ]


@pytest.fixture(scope="session")
def small_synthetic():
    """Return a small generated dataset (30 cases, 40 articles, 12 questions)."""
    return generate_synthetic(
        SyntheticSpec(n_cases=30, n_articles=40, n_questions=12, seed=3)
    )


@pytest.fixture
def synthetic_dir(tmp_path: Path, small_synthetic) -> dict[str, Path]:
    """Write ``small_synthetic`` to disk and return its file map."""
    return write_dataset(small_synthetic, tmp_path / "synthetic")
