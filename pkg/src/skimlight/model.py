"""Immutable paper document model: sections, paragraphs, sentences, facets.

Documents are frozen after construction and safe to share across threads.
Structural bookkeeping (ordinals, offsets) is always computed by
``assemble_document``; loaders never trust those values from input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Sequence

SCHEMA_VERSION = "skimlight/1"


class Facet(str, Enum):
    OBJECTIVE = "objective"
    NOVELTY = "novelty"
    METHOD = "method"
    RESULT = "result"


# Canonical order, used for every deterministic tie-break.
FACETS: tuple[Facet, ...] = (Facet.OBJECTIVE, Facet.NOVELTY, Facet.METHOD, Facet.RESULT)
FACET_RANK: dict[Facet, int] = {f: i for i, f in enumerate(FACETS)}


class SourceFormat(str, Enum):
    CANONICAL = "canonical"
    PLAIN_TEXT = "plain_text"


@dataclass(frozen=True)
class BoundingBox:
    """Normalized page-fraction box. Pass-through only, never computed here."""

    page: int
    left: float
    top: float
    width: float
    height: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "page": self.page,
            "left": self.left,
            "top": self.top,
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    text: str
    global_ordinal: int
    paragraph_ordinal: int
    index_in_paragraph: int
    relative_offset: float
    boxes: tuple[BoundingBox, ...] | None = None


@dataclass(frozen=True)
class Paragraph:
    ordinal: int  # global paragraph index, contiguous in document order
    index_in_section: int
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Section:
    heading: str
    depth: int
    section_path: tuple[str, ...]
    paragraphs: tuple[Paragraph, ...]


ABSTRACT_PATH: tuple[str, ...] = ("abstract",)


@dataclass(frozen=True)
class PaperDocument:
    paper_id: str
    title: str
    abstract: tuple[Sentence, ...]
    sections: tuple[Section, ...]
    source_format: SourceFormat

    @cached_property
    def all_sentences(self) -> tuple[Sentence, ...]:
        out: list[Sentence] = list(self.abstract)
        for section in self.sections:
            for paragraph in section.paragraphs:
                out.extend(paragraph.sentences)
        return tuple(out)

    @cached_property
    def body_sentences(self) -> tuple[Sentence, ...]:
        return self.all_sentences[len(self.abstract):]

    @cached_property
    def total_sentences(self) -> int:
        return len(self.all_sentences)

    @cached_property
    def paragraph_count(self) -> int:
        n = 1 if self.abstract else 0
        return n + sum(len(s.paragraphs) for s in self.sections)

    @cached_property
    def body_paragraph_ordinals(self) -> tuple[int, ...]:
        return tuple(
            p.ordinal for section in self.sections for p in section.paragraphs
        )

    @cached_property
    def _sentence_index(self) -> dict[str, Sentence]:
        return {s.sentence_id: s for s in self.all_sentences}

    @cached_property
    def _section_paths(self) -> dict[str, tuple[str, ...]]:
        paths: dict[str, tuple[str, ...]] = {}
        for s in self.abstract:
            paths[s.sentence_id] = ABSTRACT_PATH
        for section in self.sections:
            for paragraph in section.paragraphs:
                for s in paragraph.sentences:
                    paths[s.sentence_id] = section.section_path
        return paths

    def sentence(self, sentence_id: str) -> Sentence:
        return self._sentence_index[sentence_id]

    def section_path_of(self, sentence_id: str) -> tuple[str, ...]:
        return self._section_paths[sentence_id]

    def paragraph_sentences(self, ordinal: int) -> tuple[Sentence, ...]:
        return self._paragraphs_by_ordinal[ordinal]

    @cached_property
    def _paragraphs_by_ordinal(self) -> dict[int, tuple[Sentence, ...]]:
        out: dict[int, tuple[Sentence, ...]] = {}
        if self.abstract:
            out[self.abstract[0].paragraph_ordinal] = self.abstract
        for section in self.sections:
            for paragraph in section.paragraphs:
                out[paragraph.ordinal] = paragraph.sentences
        return out


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str

    def as_dict(self) -> dict[str, str]:
        return {"code": self.code, "location": self.location, "message": self.message}


@dataclass(frozen=True)
class SentenceDraft:
    """Loader-facing sentence before ordinals are assigned."""

    sentence_id: str
    text: str
    boxes: tuple[BoundingBox, ...] | None = None


@dataclass(frozen=True)
class SectionDraft:
    heading: str
    depth: int
    paragraphs: tuple[tuple[SentenceDraft, ...], ...]


def section_paths(drafts: Sequence[SectionDraft]) -> list[tuple[str, ...]]:
    """Compute each section's heading path from the flat heading sequence.

    A heading of depth k closes every open heading of depth >= k. Missing
    ancestors (a depth-2 heading with no preceding depth-1) are padded with
    empty strings so that len(path) == depth always holds.
    """
    stack: list[str] = []
    paths: list[tuple[str, ...]] = []
    for draft in drafts:
        depth = max(1, draft.depth)
        del stack[depth - 1 :]
        while len(stack) < depth - 1:
            stack.append("")
        stack.append(draft.heading)
        paths.append(tuple(stack))
    return paths


def assemble_document(
    paper_id: str,
    title: str,
    abstract: Sequence[SentenceDraft],
    sections: Sequence[SectionDraft],
    source_format: SourceFormat,
) -> PaperDocument:
    """Build a document with freshly computed ordinals and offsets."""
    total = len(abstract) + sum(
        len(p) for s in sections for p in s.paragraphs
    )
    denom = max(1, total - 1)

    next_sentence = 0
    next_paragraph = 0

    def make(draft: SentenceDraft, paragraph_ordinal: int, index: int) -> Sentence:
        nonlocal next_sentence
        sentence = Sentence(
            sentence_id=draft.sentence_id,
            text=draft.text,
            global_ordinal=next_sentence,
            paragraph_ordinal=paragraph_ordinal,
            index_in_paragraph=index,
            relative_offset=next_sentence / denom,
            boxes=draft.boxes,
        )
        next_sentence += 1
        return sentence

    abstract_sentences: tuple[Sentence, ...] = ()
    if abstract:
        ordinal = next_paragraph
        next_paragraph += 1
        abstract_sentences = tuple(
            make(d, ordinal, i) for i, d in enumerate(abstract)
        )

    paths = section_paths(sections)
    built_sections: list[Section] = []
    for draft, path in zip(sections, paths):
        paragraphs: list[Paragraph] = []
        for idx, para in enumerate(draft.paragraphs):
            ordinal = next_paragraph
            next_paragraph += 1
            paragraphs.append(
                Paragraph(
                    ordinal=ordinal,
                    index_in_section=idx,
                    sentences=tuple(
                        make(d, ordinal, i) for i, d in enumerate(para)
                    ),
                )
            )
        built_sections.append(
            Section(
                heading=draft.heading,
                depth=draft.depth,
                section_path=path,
                paragraphs=tuple(paragraphs),
            )
        )

    return PaperDocument(
        paper_id=paper_id,
        title=title,
        abstract=abstract_sentences,
        sections=tuple(built_sections),
        source_format=source_format,
    )


_OFFSET_TOL = 1e-12


def validate(document: PaperDocument) -> list[Violation]:
    """Check every structural invariant; violations are data, not failures."""
    violations: list[Violation] = []

    seen: set[str] = set()
    for sentence in document.all_sentences:
        if sentence.sentence_id in seen:
            violations.append(
                Violation(
                    "DUPLICATE_SENTENCE_ID",
                    sentence.sentence_id,
                    f"sentence_id {sentence.sentence_id!r} appears more than once",
                )
            )
        seen.add(sentence.sentence_id)
        if not sentence.text.strip():
            violations.append(
                Violation(
                    "EMPTY_SENTENCE_TEXT",
                    sentence.sentence_id,
                    "sentence text is empty after whitespace normalization",
                )
            )
        for box in sentence.boxes or ():
            ok = (
                box.page >= 0
                and 0.0 <= box.left <= 1.0
                and 0.0 <= box.top <= 1.0
                and box.width >= 0.0
                and box.height >= 0.0
                and box.left + box.width <= 1.0 + _OFFSET_TOL
                and box.top + box.height <= 1.0 + _OFFSET_TOL
            )
            if not ok:
                violations.append(
                    Violation(
                        "BAD_BOUNDING_BOX",
                        sentence.sentence_id,
                        "bounding box outside normalized page bounds",
                    )
                )

    denom = max(1, document.total_sentences - 1)
    for expected, sentence in enumerate(document.all_sentences):
        if sentence.global_ordinal != expected:
            violations.append(
                Violation(
                    "BAD_GLOBAL_ORDINAL",
                    sentence.sentence_id,
                    f"global_ordinal {sentence.global_ordinal} != {expected}",
                )
            )
        if abs(sentence.relative_offset - sentence.global_ordinal / denom) > _OFFSET_TOL:
            violations.append(
                Violation(
                    "BAD_RELATIVE_OFFSET",
                    sentence.sentence_id,
                    "relative_offset does not match global_ordinal / (total - 1)",
                )
            )

    next_paragraph = 1 if document.abstract else 0
    if document.abstract:
        for i, sentence in enumerate(document.abstract):
            if sentence.paragraph_ordinal != 0 or sentence.index_in_paragraph != i:
                violations.append(
                    Violation(
                        "BAD_ABSTRACT_INDEX",
                        sentence.sentence_id,
                        "abstract sentence indices must be contiguous in paragraph 0",
                    )
                )

    for si, section in enumerate(document.sections):
        if section.depth != len(section.section_path):
            violations.append(
                Violation(
                    "BAD_SECTION_DEPTH",
                    f"sections[{si}]",
                    f"depth {section.depth} != len(section_path) {len(section.section_path)}",
                )
            )
        for pi, paragraph in enumerate(section.paragraphs):
            if paragraph.index_in_section != pi:
                violations.append(
                    Violation(
                        "NONCONTIGUOUS_PARAGRAPH",
                        f"sections[{si}].paragraphs[{pi}]",
                        f"index_in_section {paragraph.index_in_section} != {pi}",
                    )
                )
            if paragraph.ordinal != next_paragraph:
                violations.append(
                    Violation(
                        "NONCONTIGUOUS_PARAGRAPH_ORDINAL",
                        f"sections[{si}].paragraphs[{pi}]",
                        f"global paragraph ordinal {paragraph.ordinal} != {next_paragraph}",
                    )
                )
            next_paragraph += 1
            for i, sentence in enumerate(paragraph.sentences):
                if (
                    sentence.paragraph_ordinal != paragraph.ordinal
                    or sentence.index_in_paragraph != i
                ):
                    violations.append(
                        Violation(
                            "BAD_SENTENCE_INDEX",
                            sentence.sentence_id,
                            "sentence paragraph bookkeeping inconsistent",
                        )
                    )

    return violations


def _sentence_to_dict(sentence: Sentence) -> dict[str, Any]:
    out: dict[str, Any] = {
        "sentence_id": sentence.sentence_id,
        "text": sentence.text,
    }
    if sentence.boxes is not None:
        out["boxes"] = [b.as_dict() for b in sentence.boxes]
    return out


def encode_canonical(document: PaperDocument) -> bytes:
    """Serialize to the canonical byte form (sorted keys, compact, UTF-8).

    Derived fields (ordinals, offsets, section paths) are omitted; loaders
    recompute them, which is what makes decode/encode round-trips byte-stable.
    """
    payload = {
        "schema": SCHEMA_VERSION,
        "paper_id": document.paper_id,
        "title": document.title,
        "abstract": [_sentence_to_dict(s) for s in document.abstract],
        "sections": [
            {
                "heading": section.heading,
                "depth": section.depth,
                "paragraphs": [
                    [_sentence_to_dict(s) for s in paragraph.sentences]
                    for paragraph in section.paragraphs
                ],
            }
            for section in document.sections
        ],
    }
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
