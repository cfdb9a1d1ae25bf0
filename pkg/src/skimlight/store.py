"""File-backed paper store: one directory per paper, atomic writes.

Layout under the store root:

    papers/<paper_id>/document.json    canonical document
    papers/<paper_id>/plan.json        highlight plan
    papers/<paper_id>/pipeline.json    pipeline metadata
    papers/<paper_id>/settings/<user>.json

Every write goes to a temp file in the target directory, is flushed and
fsynced, then atomically renamed over the destination, so a crash between
any two requests never loses a committed write or exposes a torn file.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import time
from pathlib import Path

from skimlight.errors import MalformedInput
from skimlight.ingest import load_canonical
from skimlight.model import PaperDocument, SourceFormat, encode_canonical
from skimlight.pipeline import (
    PIPELINE_VERSION,
    PipelineConfig,
    content_paper_id,
    ingest_bytes,
    run_pipeline,
)
from skimlight.planner import (
    HighlightPlan,
    ViewSettings,
    plan_from_json,
    plan_to_json,
    settings_from_json,
    settings_to_json,
)

ENV_STORE = "SKIMLIGHT_STORE"


def default_store_path() -> Path:
    return Path(os.environ.get(ENV_STORE, "skimlight_store"))


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


class UnknownPaper(KeyError):
    pass


class PaperStore:
    """Desk-scale persistence. Settings writes for one (paper, user) are
    serialized; reads never block."""

    def __init__(self, root: Path | str | None = None, config: PipelineConfig | None = None):
        self.root = Path(root) if root is not None else default_store_path()
        self.config = config or PipelineConfig()
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._locks_guard = threading.Lock()
        (self.root / "papers").mkdir(parents=True, exist_ok=True)

    def _paper_dir(self, paper_id: str) -> Path:
        return self.root / "papers" / paper_id

    def _settings_path(self, paper_id: str, user_id: str) -> Path:
        return self._paper_dir(paper_id) / "settings" / f"{user_id}.json"

    def _lock(self, paper_id: str, user_id: str) -> threading.Lock:
        key = (paper_id, user_id)
        with self._locks_guard:
            if key not in self._locks:
                self._locks[key] = threading.Lock()
            return self._locks[key]

    # -- papers -----------------------------------------------------------

    def ingest(self, data: bytes, source_format: SourceFormat) -> tuple[str, bool]:
        """Run the pipeline and persist artifacts; returns (paper_id, created).

        Identical bytes map to the same paper and are not reprocessed.
        """
        paper_id = content_paper_id(data)
        paper_dir = self._paper_dir(paper_id)
        if (paper_dir / "plan.json").exists():
            return paper_id, False

        document = ingest_bytes(data, source_format, self.config)
        result = run_pipeline(document, self.config)

        meta = {
            "pipeline_version": PIPELINE_VERSION,
            "paper_id": paper_id,
            "source_format": source_format.value,
            "sentences": document.total_sentences,
            "paragraphs": document.paragraph_count,
            "candidates": len(result.candidates),
            "lf_coverage": {
                lf_id: result.matrix.coverage(lf_id) for lf_id in result.matrix.lf_ids
            },
            "ingested_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        atomic_write(paper_dir / "document.json", encode_canonical(document))
        atomic_write(
            paper_dir / "pipeline.json",
            json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8"),
        )
        # The plan is written last: its presence marks a completed ingest.
        atomic_write(paper_dir / "plan.json", plan_to_json(result.plan))
        return paper_id, True

    def has_paper(self, paper_id: str) -> bool:
        return (self._paper_dir(paper_id) / "plan.json").exists()

    def paper_ids(self) -> list[str]:
        papers = self.root / "papers"
        return sorted(
            p.name for p in papers.iterdir() if (p / "plan.json").exists()
        )

    def paper_count(self) -> int:
        return len(self.paper_ids())

    def document_bytes(self, paper_id: str) -> bytes:
        path = self._paper_dir(paper_id) / "document.json"
        if not path.exists():
            raise UnknownPaper(paper_id)
        return path.read_bytes()

    def document(self, paper_id: str) -> PaperDocument:
        return load_canonical(self.document_bytes(paper_id))

    def plan_bytes(self, paper_id: str) -> bytes:
        path = self._paper_dir(paper_id) / "plan.json"
        if not path.exists():
            raise UnknownPaper(paper_id)
        return path.read_bytes()

    def plan(self, paper_id: str) -> HighlightPlan:
        return plan_from_json(self.plan_bytes(paper_id))

    # -- settings ---------------------------------------------------------

    def settings(self, paper_id: str, user_id: str) -> ViewSettings | None:
        path = self._settings_path(paper_id, user_id)
        if not path.exists():
            return None
        try:
            return settings_from_json(path.read_bytes())
        except MalformedInput:
            return None

    def put_settings(self, paper_id: str, user_id: str, settings: ViewSettings) -> None:
        if not self.has_paper(paper_id):
            raise UnknownPaper(paper_id)
        with self._lock(paper_id, user_id):
            atomic_write(
                self._settings_path(paper_id, user_id), settings_to_json(settings)
            )

    def update_settings(self, paper_id: str, user_id: str, fn) -> ViewSettings:
        """Read-modify-write under the per-(paper, user) lock."""
        if not self.has_paper(paper_id):
            raise UnknownPaper(paper_id)
        with self._lock(paper_id, user_id):
            current = self.settings(paper_id, user_id)
            updated = fn(current)
            atomic_write(
                self._settings_path(paper_id, user_id), settings_to_json(updated)
            )
            return updated
