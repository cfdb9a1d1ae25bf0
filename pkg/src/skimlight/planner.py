"""Highlight planning and view resolution.

A plan fixes, per facet, a deterministic selection order over candidates:
the greedy rule always prefers paragraphs that hold fewer highlights of
that facet, then higher priority, then earlier position. Any density
setting simply takes a prefix of that order, which is what makes slider
changes nest (lower density is always a subset of higher density).

Paragraph deltas are stored state, not incremental edits: resolution is a
pure function of (plan, settings), so applying +1 then -1 trivially
returns the prior view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from skimlight.errors import (
    DELTA_OUT_OF_RANGE,
    INVALID_DENSITY,
    UNKNOWN_PARAGRAPH,
    InvalidSettings,
    MalformedInput,
)
from skimlight.model import FACET_RANK, FACETS, Facet, PaperDocument
from skimlight.scoring import Candidate

PLAN_VERSION = "skimlight-plan/1"
HIGHLIGHTS_VERSION = "skimlight-highlights/1"

DELTA_BOUND = 10


@dataclass(frozen=True)
class SectionRule:
    keywords: tuple[str, ...]
    facet: Facet | None  # None marks the section unconstrained


DEFAULT_SECTION_RULES: tuple[SectionRule, ...] = (
    SectionRule(("method", "approach", "model", "implementation"), Facet.METHOD),
    SectionRule(("result", "evaluation", "finding", "experiment"), Facet.RESULT),
    SectionRule(("introduction", "abstract", "conclusion"), None),
    SectionRule(("related work", "background"), None),
)


@dataclass(frozen=True)
class SectionFacetMap:
    """First matching rule wins; headings are checked deepest-first."""

    rules: tuple[SectionRule, ...] = DEFAULT_SECTION_RULES
    objective_exempt: tuple[str, ...] = ("introduction",)

    def required_facet(self, section_path: Sequence[str]) -> Facet | None:
        for heading in reversed(section_path):
            lowered = heading.casefold()
            for rule in self.rules:
                if any(kw in lowered for kw in rule.keywords):
                    return rule.facet
        return None

    def is_objective_exempt(self, section_path: Sequence[str]) -> bool:
        joined = " ".join(section_path).casefold()
        return any(kw in joined for kw in self.objective_exempt)


def resolve_facets(candidates: Iterable[Candidate]) -> list[Candidate]:
    """Keep one facet per sentence: highest priority, canonical order on ties."""
    best: dict[str, Candidate] = {}
    for c in candidates:
        incumbent = best.get(c.sentence_id)
        if incumbent is None or (-c.priority, FACET_RANK[c.facet]) < (
            -incumbent.priority,
            FACET_RANK[incumbent.facet],
        ):
            best[c.sentence_id] = c
    return list(best.values())


def enforce_section_consistency(
    candidates: Iterable[Candidate], section_map: SectionFacetMap | None = None
) -> list[Candidate]:
    """Drop candidates whose facet conflicts with their section's facet.

    A confident wrong color is worse than no highlight, so conflicting
    candidates are dropped rather than relabeled. Objective candidates
    survive inside introduction sections regardless of mapping.
    """
    section_map = section_map or SectionFacetMap()
    kept: list[Candidate] = []
    for c in candidates:
        required = section_map.required_facet(c.section_path)
        if required is None or c.facet == required:
            kept.append(c)
        elif c.facet == Facet.OBJECTIVE and section_map.is_objective_exempt(
            c.section_path
        ):
            kept.append(c)
    return kept


@dataclass(frozen=True)
class PlanEntry:
    sentence_id: str
    facet: Facet
    priority: float
    paragraph_ordinal: int
    relative_offset: float
    section_path: tuple[str, ...]


@dataclass(frozen=True)
class HighlightPlan:
    paper_id: str
    sequences: Mapping[Facet, tuple[str, ...]]
    entries: Mapping[str, PlanEntry]
    facet_totals: Mapping[Facet, int]
    paragraph_count: int
    body_paragraphs: tuple[int, ...]


def build_plan(candidates: Sequence[Candidate], document: PaperDocument) -> HighlightPlan:
    """Order each facet's candidates by the load-first greedy rule.

    At every step the next pick minimizes (same-facet highlights already
    chosen in its paragraph, -priority, position). The full ordering is the
    plan; density settings take prefixes of it.
    """
    ids = [c.sentence_id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("candidates must be facet-resolved (one per sentence)")

    entries: dict[str, PlanEntry] = {}
    for c in candidates:
        sentence = document.sentence(c.sentence_id)
        entries[c.sentence_id] = PlanEntry(
            sentence_id=c.sentence_id,
            facet=c.facet,
            priority=c.priority,
            paragraph_ordinal=sentence.paragraph_ordinal,
            relative_offset=sentence.relative_offset,
            section_path=c.section_path,
        )

    sequences: dict[Facet, tuple[str, ...]] = {}
    for facet in FACETS:
        pool = [entries[c.sentence_id] for c in candidates if c.facet == facet]
        load: dict[int, int] = {}
        order: list[str] = []
        remaining = list(pool)
        while remaining:
            pick = min(
                remaining,
                key=lambda e: (
                    load.get(e.paragraph_ordinal, 0),
                    -e.priority,
                    e.relative_offset,
                ),
            )
            remaining.remove(pick)
            load[pick.paragraph_ordinal] = load.get(pick.paragraph_ordinal, 0) + 1
            order.append(pick.sentence_id)
        sequences[facet] = tuple(order)

    return HighlightPlan(
        paper_id=document.paper_id,
        sequences=sequences,
        entries=entries,
        facet_totals={f: len(sequences[f]) for f in FACETS},
        paragraph_count=document.paragraph_count,
        body_paragraphs=document.body_paragraph_ordinals,
    )


@dataclass(frozen=True)
class ViewSettings:
    density: Mapping[Facet, float]
    enabled: Mapping[Facet, bool]
    paragraph_delta: Mapping[int, int] = field(default_factory=dict)


def validate_settings(settings: ViewSettings, plan: HighlightPlan) -> None:
    for facet in FACETS:
        d = settings.density.get(facet)
        if d is None or not 0.0 <= d <= 1.0:
            raise InvalidSettings(
                INVALID_DENSITY, f"density for {facet.value} must be in [0, 1]"
            )
        if facet not in settings.enabled:
            raise InvalidSettings(
                INVALID_DENSITY, f"enabled flag for {facet.value} missing"
            )
    for ordinal, delta in settings.paragraph_delta.items():
        if not 0 <= ordinal < plan.paragraph_count:
            raise InvalidSettings(
                UNKNOWN_PARAGRAPH,
                f"paragraph {ordinal} does not exist",
                details={"paragraph": ordinal},
            )
        if not -DELTA_BOUND <= delta <= DELTA_BOUND:
            raise InvalidSettings(
                DELTA_OUT_OF_RANGE,
                f"paragraph delta {delta} outside [-{DELTA_BOUND}, {DELTA_BOUND}]",
                details={"paragraph": ordinal, "delta": delta},
            )


def visible_count(density: float, length: int) -> int:
    """Prefix length a density selects; mirrored exactly by the web client."""
    if length <= 0 or density <= 0.0:
        return 0
    return min(length, math.ceil(density * length))


def _reveal_order(entries: Iterable[PlanEntry]) -> list[PlanEntry]:
    return sorted(
        entries,
        key=lambda e: (-e.priority, FACET_RANK[e.facet], e.relative_offset),
    )


@dataclass(frozen=True)
class SidebarSection:
    heading: str
    section_path: tuple[str, ...]
    passages: tuple[tuple[str, Facet], ...]


@dataclass(frozen=True)
class HighlightSet:
    visible: tuple[tuple[str, Facet], ...]
    markers: tuple[tuple[float, Facet], ...]
    sidebar: tuple[SidebarSection, ...]


def resolve_view(plan: HighlightPlan, settings: ViewSettings) -> HighlightSet:
    """Resolve settings to the concrete highlight set.

    Per enabled facet the density picks a prefix of the plan sequence;
    paragraph deltas then reveal extra entries (any enabled facet, best
    priority first) or hide the lowest-priority visible ones. Deltas on
    paragraphs without enough candidates clamp to what exists.
    """
    validate_settings(settings, plan)

    visible: set[str] = set()
    for facet in FACETS:
        if not settings.enabled[facet]:
            continue
        seq = plan.sequences[facet]
        visible.update(seq[: visible_count(settings.density[facet], len(seq))])

    if settings.paragraph_delta:
        by_paragraph: dict[int, list[PlanEntry]] = {}
        for entry in plan.entries.values():
            if settings.enabled[entry.facet]:
                by_paragraph.setdefault(entry.paragraph_ordinal, []).append(entry)
        for ordinal in sorted(settings.paragraph_delta):
            delta = settings.paragraph_delta[ordinal]
            if delta == 0:
                continue
            ordered = _reveal_order(by_paragraph.get(ordinal, []))
            if delta > 0:
                hidden = [e for e in ordered if e.sentence_id not in visible]
                for entry in hidden[:delta]:
                    visible.add(entry.sentence_id)
            else:
                shown = [e for e in ordered if e.sentence_id in visible]
                for entry in shown[max(0, len(shown) + delta) :]:
                    visible.discard(entry.sentence_id)

    in_order = sorted(
        (plan.entries[sid] for sid in visible), key=lambda e: e.relative_offset
    )
    visible_pairs = tuple((e.sentence_id, e.facet) for e in in_order)
    markers = tuple((e.relative_offset, e.facet) for e in in_order)

    sidebar: list[SidebarSection] = []
    index: dict[tuple[str, ...], int] = {}
    for entry in in_order:
        if entry.section_path not in index:
            index[entry.section_path] = len(sidebar)
            heading = entry.section_path[-1] if entry.section_path else ""
            sidebar.append(SidebarSection(heading, entry.section_path, ()))
        i = index[entry.section_path]
        sidebar[i] = SidebarSection(
            sidebar[i].heading,
            sidebar[i].section_path,
            sidebar[i].passages + ((entry.sentence_id, entry.facet),),
        )

    return HighlightSet(
        visible=visible_pairs, markers=markers, sidebar=tuple(sidebar)
    )


def default_settings(
    plan: HighlightPlan, document: PaperDocument | None = None
) -> ViewSettings:
    """Densities scaled jointly so the total lands near one per paragraph.

    The search walks the shared scale's breakpoints and stops at the first
    one whose total visible count reaches the body paragraph count; if the
    plan cannot supply that many, everything is shown.
    """
    lengths = {f: len(plan.sequences[f]) for f in FACETS}
    target = len(plan.body_paragraphs)
    if sum(lengths.values()) == 0:
        density = {f: 0.0 for f in FACETS}
    else:
        breakpoints = sorted(
            {k / n for n in lengths.values() if n > 0 for k in range(1, n + 1)}
        )
        chosen = 1.0
        for t in breakpoints:
            total = sum(visible_count(t, n) for n in lengths.values())
            if total >= target:
                chosen = t
                break
        density = {f: chosen for f in FACETS}
    return ViewSettings(
        density=density,
        enabled={f: True for f in FACETS},
        paragraph_delta={},
    )


def _facet_map_to_json(m: Mapping[Facet, object]) -> dict[str, object]:
    return {f.value: m[f] for f in FACETS}


def plan_to_json(plan: HighlightPlan) -> bytes:
    payload = {
        "schema": PLAN_VERSION,
        "paper_id": plan.paper_id,
        "sequences": {f.value: list(plan.sequences[f]) for f in FACETS},
        "entries": {
            sid: {
                "facet": e.facet.value,
                "priority": e.priority,
                "paragraph_ordinal": e.paragraph_ordinal,
                "relative_offset": e.relative_offset,
                "section_path": list(e.section_path),
            }
            for sid, e in plan.entries.items()
        },
        "facet_totals": _facet_map_to_json(plan.facet_totals),
        "paragraph_count": plan.paragraph_count,
        "body_paragraphs": list(plan.body_paragraphs),
    }
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def plan_from_json(data: bytes) -> HighlightPlan:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"plan is not UTF-8 JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("schema") != PLAN_VERSION:
        raise MalformedInput(f"expected plan schema {PLAN_VERSION!r}")
    try:
        entries = {
            sid: PlanEntry(
                sentence_id=sid,
                facet=Facet(e["facet"]),
                priority=float(e["priority"]),
                paragraph_ordinal=int(e["paragraph_ordinal"]),
                relative_offset=float(e["relative_offset"]),
                section_path=tuple(e["section_path"]),
            )
            for sid, e in payload["entries"].items()
        }
        return HighlightPlan(
            paper_id=payload["paper_id"],
            sequences={
                f: tuple(payload["sequences"][f.value]) for f in FACETS
            },
            entries=entries,
            facet_totals={
                f: int(payload["facet_totals"][f.value]) for f in FACETS
            },
            paragraph_count=int(payload["paragraph_count"]),
            body_paragraphs=tuple(payload["body_paragraphs"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad plan payload: {exc}") from exc


def settings_to_json(settings: ViewSettings) -> bytes:
    payload = {
        "density": {f.value: settings.density[f] for f in FACETS},
        "enabled": {f.value: settings.enabled[f] for f in FACETS},
        "paragraph_delta": {
            str(k): v for k, v in sorted(settings.paragraph_delta.items())
        },
    }
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def settings_from_json(data: bytes) -> ViewSettings:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"settings are not UTF-8 JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedInput("settings must be a JSON object")
    try:
        return ViewSettings(
            density={f: float(payload["density"][f.value]) for f in FACETS},
            enabled={f: bool(payload["enabled"][f.value]) for f in FACETS},
            paragraph_delta={
                int(k): int(v)
                for k, v in payload.get("paragraph_delta", {}).items()
            },
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad settings payload: {exc}") from exc


def highlight_set_to_json(view: HighlightSet) -> bytes:
    payload = {
        "schema": HIGHLIGHTS_VERSION,
        "visible": [
            {"sentence_id": sid, "facet": facet.value} for sid, facet in view.visible
        ],
        "markers": [
            {"relative_offset": off, "facet": facet.value}
            for off, facet in view.markers
        ],
        "sidebar": [
            {
                "heading": s.heading,
                "section_path": list(s.section_path),
                "passages": [
                    {"sentence_id": sid, "facet": facet.value}
                    for sid, facet in s.passages
                ],
            }
            for s in view.sidebar
        ],
    }
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
