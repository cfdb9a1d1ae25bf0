from __future__ import annotations

import json
from pathlib import Path

import pytest

from skimlight.ingest import parse_plain_text
from skimlight.model import (
    PaperDocument,
    SectionDraft,
    SentenceDraft,
    SourceFormat,
    assemble_document,
)
from skimlight.pipeline import PipelineConfig, run_pipeline

FIXTURES = Path(__file__).parent / "fixtures"


def make_document(
    sections: list[tuple[str, int, list[list[str]]]],
    abstract: list[str] | None = None,
    paper_id: str = "test-paper",
) -> PaperDocument:
    """Build a document from (heading, depth, paragraphs-of-sentence-texts)."""
    counter = 0

    def draft(text: str) -> SentenceDraft:
        nonlocal counter
        counter += 1
        return SentenceDraft(sentence_id=f"s{counter:03d}", text=text)

    abstract_drafts = tuple(draft(t) for t in (abstract or []))
    section_drafts = tuple(
        SectionDraft(
            heading=heading,
            depth=depth,
            paragraphs=tuple(tuple(draft(t) for t in para) for para in paragraphs),
        )
        for heading, depth, paragraphs in sections
    )
    return assemble_document(
        paper_id=paper_id,
        title="Test",
        abstract=abstract_drafts,
        sections=section_drafts,
        source_format=SourceFormat.CANONICAL,
    )


@pytest.fixture(scope="session")
def fixture_paper_text() -> str:
    return (FIXTURES / "fixture_paper.txt").read_text()


@pytest.fixture(scope="session")
def fixture_paper_doc(fixture_paper_text):
    return parse_plain_text(fixture_paper_text)


@pytest.fixture(scope="session")
def fixture_paper_result(fixture_paper_doc):
    return run_pipeline(fixture_paper_doc, PipelineConfig())


@pytest.fixture(scope="session")
def segmentation_gold() -> dict:
    return json.loads((FIXTURES / "segmentation_gold.json").read_text())


@pytest.fixture(scope="session")
def segmentation_text() -> str:
    return (FIXTURES / "segmentation_fixture.txt").read_text()


@pytest.fixture()
def minimal_bytes() -> bytes:
    return (FIXTURES / "minimal.json").read_bytes()
