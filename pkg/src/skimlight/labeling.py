"""Weak-supervision labeling functions: keyword voters over sentences.

Each labeling function (LF) votes one facet, the explicit not-salient label,
or a facet-free "salient" signal, and abstains everywhere else. Matching is
case-insensitive on exact word boundaries; "novelty" does not match the
keyword "novel" unless a keyword group lists it explicitly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator, Mapping

from skimlight.errors import DuplicateLfId, MalformedInput
from skimlight.model import FACET_RANK, FACETS, Facet, PaperDocument

# Vote codes. Facets use their canonical rank; -1 abstains and is never stored.
VOTE_NONE = 4
VOTE_SALIENT = 5
VOTE_ABSTAIN = -1

_VOTE_NAMES = {
    **{FACET_RANK[f]: f.value for f in FACETS},
    VOTE_NONE: "none",
    VOTE_SALIENT: "salient",
}

# Tokens scanned before a keyword match for polarity vetoes.
NEGATION_WINDOW = 3


@dataclass(frozen=True)
class LabelingFunctionSpec:
    """Declarative LF: all matching behavior is data, not code.

    ``target`` is a facet, or None for a salience-only LF whose vote says
    "this sentence matters" without naming a facet.
    """

    lf_id: str
    target: Facet | None
    keyword_groups: tuple[tuple[str, ...], ...] = ()
    section_scope: tuple[str, ...] | None = None
    negations: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.keyword_groups and self.section_scope is None:
            raise ValueError(
                f"LF {self.lf_id!r} needs a keyword group or a section scope"
            )

    @property
    def vote(self) -> int:
        return VOTE_SALIENT if self.target is None else FACET_RANK[self.target]


@dataclass(frozen=True)
class LabelVote:
    lf_id: str
    sentence_id: str
    vote: int

    @property
    def vote_name(self) -> str:
        return _VOTE_NAMES.get(self.vote, "abstain")


@dataclass(frozen=True)
class LabelMatrix:
    """Sparse LF votes; abstentions are implicit."""

    lf_ids: tuple[str, ...]
    sentence_ids: tuple[str, ...]
    votes: Mapping[tuple[str, str], int]

    def vote(self, lf_id: str, sentence_id: str) -> int:
        return self.votes.get((lf_id, sentence_id), VOTE_ABSTAIN)

    def iter_votes(self) -> Iterator[LabelVote]:
        for (lf_id, sentence_id), vote in self.votes.items():
            yield LabelVote(lf_id, sentence_id, vote)

    def coverage(self, lf_id: str) -> float:
        if not self.sentence_ids:
            return 0.0
        fired = sum(1 for (lf, _s) in self.votes if lf == lf_id)
        return fired / len(self.sentence_ids)

    def sentence_votes(self, sentence_id: str) -> dict[str, int]:
        return {
            lf_id: self.votes[(lf_id, sentence_id)]
            for lf_id in self.lf_ids
            if (lf_id, sentence_id) in self.votes
        }


def _keyword_pattern(keywords: tuple[str, ...]) -> re.Pattern[str]:
    alternatives = sorted(keywords, key=len, reverse=True)
    parts = [r"\s+".join(re.escape(w) for w in kw.split()) for kw in alternatives]
    return re.compile(r"(?<!\w)(?:" + "|".join(parts) + r")(?!\w)", re.IGNORECASE)


@lru_cache(maxsize=256)
def _compiled(keywords: tuple[str, ...]) -> re.Pattern[str]:
    return _keyword_pattern(keywords)


def _negated(text: str, match_start: int, negations: tuple[str, ...]) -> bool:
    if not negations:
        return False
    window = text[:match_start].split()[-NEGATION_WINDOW:]
    window_text = " ".join(w.strip(".,;:()[]\"'").casefold() for w in window)
    pattern = _compiled(tuple(n.casefold() for n in negations))
    return bool(pattern.search(window_text))


def _in_scope(spec: LabelingFunctionSpec, section_path: tuple[str, ...]) -> bool:
    if spec.section_scope is None:
        return True
    headings = " ".join(section_path).casefold()
    return any(scope.casefold() in headings for scope in spec.section_scope)


def lf_fires(spec: LabelingFunctionSpec, text: str, section_path: tuple[str, ...]) -> bool:
    """True when any keyword in any group matches without a negation veto."""
    if not _in_scope(spec, section_path):
        return False
    if not spec.keyword_groups:
        return True
    for group in spec.keyword_groups:
        pattern = _compiled(group)
        for match in pattern.finditer(text):
            if not _negated(text, match.start(), spec.negations):
                return True
    return False


def apply_lfs(
    document: PaperDocument, lfs: list[LabelingFunctionSpec]
) -> LabelMatrix:
    """Vote every LF over every sentence (abstract included, for diagnostics)."""
    seen: set[str] = set()
    for spec in lfs:
        if spec.lf_id in seen:
            raise DuplicateLfId(f"duplicate lf_id {spec.lf_id!r}")
        seen.add(spec.lf_id)

    votes: dict[tuple[str, str], int] = {}
    sentence_ids = tuple(s.sentence_id for s in document.all_sentences)
    for spec in lfs:
        for sentence in document.all_sentences:
            path = document.section_path_of(sentence.sentence_id)
            if lf_fires(spec, sentence.text, path):
                votes[(spec.lf_id, sentence.sentence_id)] = spec.vote
    return LabelMatrix(
        lf_ids=tuple(spec.lf_id for spec in lfs),
        sentence_ids=sentence_ids,
        votes=votes,
    )


def parse_lf_bank(data: bytes) -> list[LabelingFunctionSpec]:
    """Load an LF bank from its JSON wire form."""
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"LF bank is not UTF-8 JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise MalformedInput("LF bank must be a JSON list")

    specs: list[LabelingFunctionSpec] = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise MalformedInput(f"LF bank entry {i} must be an object")
        target_raw = entry.get("target")
        if target_raw == "salience":
            target = None
        else:
            try:
                target = Facet(target_raw)
            except ValueError:
                raise MalformedInput(
                    f"LF bank entry {i}: unknown target {target_raw!r}"
                ) from None
        try:
            specs.append(
                LabelingFunctionSpec(
                    lf_id=entry["lf_id"],
                    target=target,
                    keyword_groups=tuple(
                        tuple(group) for group in entry.get("keyword_groups", [])
                    ),
                    section_scope=(
                        tuple(entry["section_scope"])
                        if "section_scope" in entry
                        else None
                    ),
                    negations=tuple(entry.get("negations", [])),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"LF bank entry {i}: {exc}") from exc
    return specs


def builtin_lfs() -> list[LabelingFunctionSpec]:
    """The default bank shipped as package data."""
    data = resources.files("skimlight.data").joinpath("default_lfs.json").read_bytes()
    return parse_lf_bank(data)
