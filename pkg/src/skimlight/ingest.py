"""Document ingestion: canonical JSON loading and plain-text parsing.

The sentence splitter is rule-based on purpose: deterministic, auditable,
and adequate for scholarly prose. Splits happen only between whitespace-
separated tokens, so joining the output with single spaces always
reproduces the whitespace-normalized input.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Any

from skimlight.errors import EmptyDocument, InvalidDocument, MalformedInput
from skimlight.model import (
    SCHEMA_VERSION,
    BoundingBox,
    PaperDocument,
    SectionDraft,
    SentenceDraft,
    SourceFormat,
    assemble_document,
    validate,
)

# Scholarly abbreviations whose trailing period never ends a sentence.
# Matching is case-sensitive so that "No." protects while "no." still
# terminates a sentence.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "e.g.",
        "i.e.",
        "et al.",
        "al.",
        "cf.",
        "Fig.",
        "Figs.",
        "Eq.",
        "Eqs.",
        "Sec.",
        "Tab.",
        "vs.",
        "approx.",
        "No.",
        "etc.",
        "resp.",
        "ca.",
        "w.r.t.",
    }
)


@dataclass(frozen=True)
class SegmenterConfig:
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
    min_sentence_chars: int = 2
    citation_bracket_protection: bool = True

    def __post_init__(self):
        if self.min_sentence_chars < 1:
            raise ValueError("min_sentence_chars must be >= 1")
        for entry in self.abbreviations:
            if not entry.endswith("."):
                raise ValueError(f"abbreviation {entry!r} must end with a period")


_TERMINALS = ".!?"
_CLOSERS = ")]\"'’”"
_OPENERS = "([\"'‘“"


def _strip_closers(token: str) -> str:
    return token.rstrip(_CLOSERS)


def _strip_openers(token: str) -> str:
    return token.lstrip(_OPENERS)


def _ends_with_abbreviation(tokens: list[str], i: int, abbreviations: frozenset[str]) -> bool:
    # The candidate token may carry leading punctuation, e.g. "(e.g.".
    tail = _strip_openers(tokens[i])
    for abbr in abbreviations:
        parts = abbr.split(" ")
        if len(parts) == 1:
            if tail == abbr or tail.endswith(" " + abbr):
                return True
            # Token glued to preceding punctuation is already handled by
            # stripping; also accept "word-final" matches such as "e.g."
            # inside "(e.g." handled above.
            continue
        # Multi-word abbreviation: compare the trailing token run.
        k = len(parts)
        if i + 1 < k:
            continue
        window = tokens[i - k + 1 : i + 1]
        window = [_strip_openers(window[0])] + window[1:]
        if window == parts:
            return True
    return False


def _alpha_count(text: str) -> int:
    return sum(1 for c in text if c.isalpha())


def split_sentences(paragraph_text: str, config: SegmenterConfig | None = None) -> list[str]:
    """Split one paragraph into sentences.

    Boundaries are only placed between whitespace-separated tokens, after a
    token ending in sentence-terminal punctuation, unless vetoed by the
    abbreviation list, an open citation bracket, or a lowercase follow-up
    token. Fragments below ``min_sentence_chars`` or with fewer than two
    alphabetic characters are merged into the following sentence.
    """
    config = config or SegmenterConfig()
    tokens = paragraph_text.split()
    if not tokens:
        return []

    boundaries: list[int] = []  # boundary after tokens[i]
    depth = 0
    for i, token in enumerate(tokens):
        if config.citation_bracket_protection:
            depth += token.count("(") + token.count("[")
            depth -= token.count(")") + token.count("]")
            if depth < 0:
                depth = 0
        if i == len(tokens) - 1:
            break
        stripped = _strip_closers(token)
        if not stripped or stripped[-1] not in _TERMINALS:
            continue
        if config.citation_bracket_protection and depth > 0:
            continue
        if stripped[-1] == "." and _ends_with_abbreviation(
            [*tokens[:i], stripped], i, config.abbreviations
        ):
            continue
        nxt = _strip_openers(tokens[i + 1])
        if nxt[:1].islower():
            continue
        boundaries.append(i)

    pieces: list[str] = []
    start = 0
    for b in boundaries:
        pieces.append(" ".join(tokens[start : b + 1]))
        start = b + 1
    pieces.append(" ".join(tokens[start:]))

    # Merge fragments forward (math placeholders, stray markers) so every
    # surviving sentence has at least min_sentence_chars and two letters.
    merged: list[str] = []
    pending = ""
    for piece in pieces:
        candidate = f"{pending} {piece}".strip() if pending else piece
        if len(candidate) < config.min_sentence_chars or _alpha_count(candidate) < 2:
            pending = candidate
            continue
        merged.append(candidate)
        pending = ""
    if pending:
        if merged:
            merged[-1] = f"{merged[-1]} {pending}"
        else:
            # Degenerate input (no mergeable neighbor): text conservation
            # wins over the minimum-length rule.
            merged.append(pending)
    return merged


def _content_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


_HEADING_RE = re.compile(r"^(#+)\s*(.*)$")
_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*)$")


def parse_plain_text(
    text: str,
    config: SegmenterConfig | None = None,
    paper_id: str | None = None,
) -> PaperDocument:
    """Parse the Markdown-like plain-text format into a document.

    ``#``-prefixed lines open sections (depth = number of hashes), blank
    lines separate paragraphs, and each bullet item becomes its own
    paragraph. The first section titled "Abstract" (case-insensitive)
    populates the document abstract instead of the body.
    """
    config = config or SegmenterConfig()
    if paper_id is None:
        paper_id = "t" + _content_id(text.encode("utf-8"))

    # (heading, depth, paragraphs as text blocks)
    sections: list[tuple[str, int, list[str]]] = []

    def current() -> tuple[str, int, list[str]]:
        if not sections:
            sections.append(("", 1, []))
        return sections[-1]

    block: list[str] = []

    def flush_block():
        nonlocal block
        if block:
            current()[2].append(" ".join(block))
            block = []

    for raw_line in text.splitlines():
        line = raw_line.strip()
        heading = _HEADING_RE.match(line)
        if heading:
            flush_block()
            sections.append((heading.group(2).strip(), len(heading.group(1)), []))
            continue
        if not line:
            flush_block()
            continue
        bullet = _BULLET_RE.match(line)
        if bullet:
            flush_block()
            current()[2].append(bullet.group(1).strip())
            continue
        block.append(line)
    flush_block()

    counter = 0

    def drafts(paragraph_text: str) -> tuple[SentenceDraft, ...]:
        nonlocal counter
        out = []
        for sentence in split_sentences(paragraph_text, config):
            out.append(SentenceDraft(sentence_id=f"s{counter:04d}", text=sentence))
            counter += 1
        return tuple(out)

    abstract: list[SentenceDraft] = []
    section_drafts: list[SectionDraft] = []
    abstract_taken = False
    for heading, depth, blocks in sections:
        if not abstract_taken and heading.strip().lower() == "abstract":
            for b in blocks:
                abstract.extend(drafts(b))
            abstract_taken = True
            continue
        paragraphs = tuple(p for p in (drafts(b) for b in blocks) if p)
        if not heading and not paragraphs:
            continue
        section_drafts.append(SectionDraft(heading=heading, depth=depth, paragraphs=paragraphs))

    document = assemble_document(
        paper_id=paper_id,
        title="",
        abstract=tuple(abstract),
        sections=tuple(section_drafts),
        source_format=SourceFormat.PLAIN_TEXT,
    )
    if document.total_sentences == 0:
        raise EmptyDocument("no sentences found in input")
    return document


def _expect(condition: bool, message: str):
    if not condition:
        raise MalformedInput(message)


def _parse_sentence(obj: Any, where: str) -> SentenceDraft:
    _expect(isinstance(obj, dict), f"{where}: sentence must be an object")
    _expect(isinstance(obj.get("sentence_id"), str), f"{where}: sentence_id must be a string")
    _expect(isinstance(obj.get("text"), str), f"{where}: text must be a string")
    boxes = None
    if "boxes" in obj:
        raw_boxes = obj["boxes"]
        _expect(isinstance(raw_boxes, list), f"{where}: boxes must be a list")
        parsed = []
        for i, b in enumerate(raw_boxes):
            _expect(isinstance(b, dict), f"{where}.boxes[{i}]: must be an object")
            try:
                parsed.append(
                    BoundingBox(
                        page=int(b["page"]),
                        left=float(b["left"]),
                        top=float(b["top"]),
                        width=float(b["width"]),
                        height=float(b["height"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedInput(f"{where}.boxes[{i}]: {exc}") from exc
        boxes = tuple(parsed)
    return SentenceDraft(sentence_id=obj["sentence_id"], text=obj["text"], boxes=boxes)


def load_canonical(data: bytes) -> PaperDocument:
    """Decode canonical JSON bytes into a validated document."""
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"input is not UTF-8 JSON: {exc}") from exc

    _expect(isinstance(payload, dict), "top-level value must be an object")
    _expect(
        payload.get("schema") == SCHEMA_VERSION,
        f"unsupported schema {payload.get('schema')!r}, expected {SCHEMA_VERSION!r}",
    )
    _expect(isinstance(payload.get("paper_id"), str), "paper_id must be a string")
    _expect(isinstance(payload.get("title"), str), "title must be a string")
    _expect(isinstance(payload.get("abstract"), list), "abstract must be a list")
    _expect(isinstance(payload.get("sections"), list), "sections must be a list")

    abstract = tuple(
        _parse_sentence(s, f"abstract[{i}]") for i, s in enumerate(payload["abstract"])
    )
    section_drafts = []
    for si, sec in enumerate(payload["sections"]):
        where = f"sections[{si}]"
        _expect(isinstance(sec, dict), f"{where}: must be an object")
        _expect(isinstance(sec.get("heading"), str), f"{where}: heading must be a string")
        _expect(
            isinstance(sec.get("depth"), int) and sec["depth"] >= 1,
            f"{where}: depth must be an integer >= 1",
        )
        _expect(isinstance(sec.get("paragraphs"), list), f"{where}: paragraphs must be a list")
        paragraphs = []
        for pi, para in enumerate(sec["paragraphs"]):
            _expect(isinstance(para, list), f"{where}.paragraphs[{pi}]: must be a list")
            paragraphs.append(
                tuple(
                    _parse_sentence(s, f"{where}.paragraphs[{pi}][{i}]")
                    for i, s in enumerate(para)
                )
            )
        section_drafts.append(
            SectionDraft(heading=sec["heading"], depth=sec["depth"], paragraphs=tuple(paragraphs))
        )

    document = assemble_document(
        paper_id=payload["paper_id"],
        title=payload["title"],
        abstract=abstract,
        sections=tuple(section_drafts),
        source_format=SourceFormat.CANONICAL,
    )
    violations = validate(document)
    if violations:
        raise InvalidDocument(violations)
    return document
