"""Command-line front door: ingest, highlights, eval, stats, serve.

Exit codes: 2 malformed input, 3 empty document, 4 unknown paper,
5 gold/paper mismatch.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from skimlight.errors import (
    EmptyDocument,
    InvalidDocument,
    InvalidSettings,
    MalformedInput,
)
from skimlight.evaluate import evaluate, parse_gold
from skimlight.model import FACETS, Facet, PaperDocument, SourceFormat
from skimlight.planner import (
    HighlightPlan,
    ViewSettings,
    default_settings,
    resolve_view,
    validate_settings,
)
from skimlight.store import PaperStore, UnknownPaper, default_store_path

EXIT_MALFORMED = 2
EXIT_EMPTY = 3
EXIT_UNKNOWN_PAPER = 4
EXIT_GOLD_MISMATCH = 5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_density_flags(plan: HighlightPlan, density: str | None, facet_flags: str | None) -> ViewSettings:
    settings = default_settings(plan)
    densities = dict(settings.density)
    enabled = dict(settings.enabled)
    if density:
        for part in density.split(","):
            name, _, value = part.partition("=")
            name = name.strip().lower()
            try:
                v = float(value)
            except ValueError:
                _fail(EXIT_MALFORMED, f"bad density value {value!r}")
            if name == "all":
                for f in FACETS:
                    densities[f] = v
            else:
                try:
                    densities[Facet(name)] = v
                except ValueError:
                    _fail(EXIT_MALFORMED, f"unknown facet {name!r}")
    if facet_flags:
        for part in facet_flags.split(","):
            name, _, value = part.partition("=")
            state = value.strip().lower()
            if state not in ("on", "off"):
                _fail(EXIT_MALFORMED, f"facet flag must be on or off, got {value!r}")
            try:
                enabled[Facet(name.strip().lower())] = state == "on"
            except ValueError:
                _fail(EXIT_MALFORMED, f"unknown facet {name.strip()!r}")
    updated = ViewSettings(
        density=densities, enabled=enabled, paragraph_delta=settings.paragraph_delta
    )
    try:
        validate_settings(updated, plan)
    except InvalidSettings as exc:
        _fail(EXIT_MALFORMED, exc.message)
    return updated


def _load_paper(store: PaperStore, paper_id: str) -> tuple[PaperDocument, HighlightPlan]:
    try:
        return store.document(paper_id), store.plan(paper_id)
    except UnknownPaper:
        _fail(EXIT_UNKNOWN_PAPER, f"unknown paper {paper_id!r}")
        raise AssertionError  # unreachable


store_option = click.option(
    "--store",
    "store_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Store directory (default: $SKIMLIGHT_STORE or ./skimlight_store).",
)
output_option = click.option(
    "--output",
    type=click.Choice(["text", "json"]),
    default="text",
    show_default=True,
)


@click.group()
def main():
    """Faceted highlighting for scientific papers."""


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--format",
    "source_format",
    type=click.Choice(["json", "text"]),
    default="json",
    show_default=True,
)
@store_option
@output_option
def ingest(path: Path, source_format: str, store_path: Path | None, output: str):
    """Process a paper file and persist its artifacts."""
    store = PaperStore(store_path or default_store_path())
    fmt = SourceFormat.CANONICAL if source_format == "json" else SourceFormat.PLAIN_TEXT
    try:
        paper_id, created = store.ingest(path.read_bytes(), fmt)
    except (MalformedInput, InvalidDocument) as exc:
        _fail(EXIT_MALFORMED, exc.message)
    except EmptyDocument as exc:
        _fail(EXIT_EMPTY, exc.message)
    if output == "json":
        click.echo(json.dumps({"paper_id": paper_id, "created": created}))
    else:
        click.echo(paper_id)


@main.command()
@click.argument("paper_id")
@click.option("--density", default=None, help="FACET=VAL,... or all=VAL.")
@click.option("--facet", "facet_flags", default=None, help="FACET=on|off,...")
@store_option
@output_option
def highlights(
    paper_id: str,
    density: str | None,
    facet_flags: str | None,
    store_path: Path | None,
    output: str,
):
    """List visible highlights grouped by section."""
    store = PaperStore(store_path or default_store_path())
    document, plan = _load_paper(store, paper_id)
    settings = _parse_density_flags(plan, density, facet_flags)
    view = resolve_view(plan, settings)

    rows = []
    for section in view.sidebar:
        for sentence_id, facet in section.passages:
            sentence = document.sentence(sentence_id)
            rows.append(
                {
                    "facet": facet.value,
                    "section": " > ".join(section.section_path),
                    "paragraph": sentence.paragraph_ordinal,
                    "sentence_id": sentence_id,
                    "text": sentence.text,
                }
            )
    if output == "json":
        click.echo(json.dumps({"paper_id": paper_id, "highlights": rows}, indent=2))
    else:
        for row in rows:
            click.echo(
                f"{row['facet']}\t{row['section']}\t{row['paragraph']}\t{row['text']}"
            )


@main.command()
@click.argument("paper_id")
@click.option("--gold", "gold_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--density", default=None)
@click.option("--facet", "facet_flags", default=None)
@store_option
@output_option
def eval(
    paper_id: str,
    gold_path: Path,
    density: str | None,
    facet_flags: str | None,
    store_path: Path | None,
    output: str,
):
    """Score visible highlights against gold annotations."""
    store = PaperStore(store_path or default_store_path())
    document, plan = _load_paper(store, paper_id)
    try:
        gold_entries = parse_gold(gold_path.read_bytes())
    except MalformedInput as exc:
        _fail(EXIT_MALFORMED, exc.message)
    matching = [g for g in gold_entries if g.paper_id == paper_id]
    if not matching:
        _fail(EXIT_GOLD_MISMATCH, f"gold file has no entry for paper {paper_id!r}")
    gold = matching[0]
    known = {s.sentence_id for s in document.all_sentences}
    strays = sorted(gold.salient - known)
    if strays:
        _fail(
            EXIT_GOLD_MISMATCH,
            f"gold sentence ids not present in paper: {', '.join(strays[:5])}",
        )

    settings = _parse_density_flags(plan, density, facet_flags)
    view = resolve_view(plan, settings)
    report = evaluate(view.visible, gold)

    if output == "json":
        click.echo(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        return
    s = report.salience
    click.echo(
        f"salience  P={s.precision:.3f} R={s.recall:.3f} F1={s.f1:.3f} "
        f"(tp={s.tp} fp={s.fp} fn={s.fn})"
    )
    for facet, m in report.per_facet.items():
        click.echo(
            f"{facet.value:<9} P={m.precision:.3f} R={m.recall:.3f} F1={m.f1:.3f}"
        )
    if report.facet_micro is not None:
        m = report.facet_micro
        click.echo(f"micro     P={m.precision:.3f} R={m.recall:.3f} F1={m.f1:.3f}")
        click.echo(f"macro     F1={report.facet_macro_f1:.3f}")


@main.command()
@click.argument("paper_id")
@click.option("--density", default=None)
@click.option("--facet", "facet_flags", default=None)
@store_option
@output_option
def stats(
    paper_id: str,
    density: str | None,
    facet_flags: str | None,
    store_path: Path | None,
    output: str,
):
    """Report highlight distribution for the current settings."""
    store = PaperStore(store_path or default_store_path())
    _document, plan = _load_paper(store, paper_id)
    settings = _parse_density_flags(plan, density, facet_flags)
    view = resolve_view(plan, settings)

    per_paragraph: dict[int, int] = {}
    per_facet = {f: 0 for f in FACETS}
    for sentence_id, facet in view.visible:
        entry = plan.entries[sentence_id]
        per_paragraph[entry.paragraph_ordinal] = (
            per_paragraph.get(entry.paragraph_ordinal, 0) + 1
        )
        per_facet[facet] += 1

    body = set(plan.body_paragraphs)
    covered = sum(1 for p in per_paragraph if p in body)
    payload = {
        "paper_id": paper_id,
        "paragraphs_total": len(plan.body_paragraphs),
        "paragraphs_with_highlight": covered,
        "coverage": covered / len(plan.body_paragraphs) if plan.body_paragraphs else 0.0,
        "highlights_total": len(view.visible),
        "highlights_per_facet": {f.value: per_facet[f] for f in FACETS},
        "max_per_paragraph": max(per_paragraph.values(), default=0),
    }
    if output == "json":
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in payload.items():
            click.echo(f"{key}: {value}")


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@store_option
def serve(port: int, host: str, store_path: Path | None):
    """Run the HTTP service."""
    from skimlight.service import run_server

    run_server(host=host, port=port, store_path=store_path or default_store_path())


if __name__ == "__main__":
    main()
