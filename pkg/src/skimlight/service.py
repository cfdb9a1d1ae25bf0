"""HTTP service exposing ingestion, plans, highlight sets, and settings.

Errors use a uniform envelope {code, message, details}. Paper identity is
the content hash of the uploaded bytes, which makes ingestion idempotent.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from skimlight.errors import (
    EmptyDocument,
    InvalidDocument,
    InvalidSettings,
    MalformedInput,
    SkimlightError,
)
from skimlight.model import SourceFormat
from skimlight.pipeline import PIPELINE_VERSION, PipelineConfig
from skimlight.planner import (
    DELTA_BOUND,
    ViewSettings,
    default_settings,
    highlight_set_to_json,
    resolve_view,
    settings_from_json,
    validate_settings,
)
from skimlight.store import PaperStore, UnknownPaper

DEFAULT_MAX_BODY_BYTES = 10 * 1024 * 1024


def _error(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details},
    )


def _json_response(data: bytes, status: int = 200) -> Response:
    return Response(content=data, status_code=status, media_type="application/json")


def create_app(
    store_path: Path | str | None = None,
    config: PipelineConfig | None = None,
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
) -> FastAPI:
    store = PaperStore(store_path, config)
    app = FastAPI(title="skimlight", version=PIPELINE_VERSION)
    app.state.store = store

    @app.exception_handler(SkimlightError)
    async def skimlight_error(_request: Request, exc: SkimlightError):
        status = 400
        if isinstance(exc, EmptyDocument):
            status = 422
        elif isinstance(exc, InvalidSettings):
            status = 422
        return _error(status, exc.code, exc.message, exc.details)

    @app.exception_handler(UnknownPaper)
    async def unknown_paper(_request: Request, exc: UnknownPaper):
        return _error(404, "UNKNOWN_PAPER", f"paper {exc.args[0]!r} not found")

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request: Request, exc: RequestValidationError):
        return _error(400, "MALFORMED_INPUT", "request failed validation", exc.errors())

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "pipeline_version": PIPELINE_VERSION,
            "paper_count": store.paper_count(),
        }

    @app.post("/papers")
    async def post_paper(request: Request):
        declared = request.headers.get("content-length")
        if declared is not None and int(declared) > max_body_bytes:
            return _error(413, "TOO_LARGE", f"body exceeds {max_body_bytes} bytes")
        body = await request.body()
        if len(body) > max_body_bytes:
            return _error(413, "TOO_LARGE", f"body exceeds {max_body_bytes} bytes")
        content_type = request.headers.get("content-type", "application/json")
        if content_type.startswith("text/plain"):
            source_format = SourceFormat.PLAIN_TEXT
        else:
            source_format = SourceFormat.CANONICAL
        try:
            paper_id, created = store.ingest(body, source_format)
        except (MalformedInput, InvalidDocument) as exc:
            return _error(400, exc.code, exc.message, exc.details)
        except EmptyDocument as exc:
            return _error(422, exc.code, exc.message, exc.details)
        return JSONResponse(
            status_code=201 if created else 200, content={"paper_id": paper_id}
        )

    @app.get("/papers/{paper_id}/document")
    async def get_document(paper_id: str):
        return _json_response(store.document_bytes(paper_id))

    @app.get("/papers/{paper_id}/plan")
    async def get_plan(paper_id: str):
        return _json_response(store.plan_bytes(paper_id))

    def _effective_settings(paper_id: str, user_id: str) -> ViewSettings:
        stored = store.settings(paper_id, user_id)
        if stored is not None:
            return stored
        return default_settings(store.plan(paper_id))

    @app.get("/papers/{paper_id}/highlights")
    async def get_highlights(paper_id: str, user: str = Query(default="anonymous")):
        plan = store.plan(paper_id)
        settings = _effective_settings(paper_id, user)
        return _json_response(highlight_set_to_json(resolve_view(plan, settings)))

    @app.put("/papers/{paper_id}/settings")
    async def put_settings(request: Request, paper_id: str, user: str = Query(default="anonymous")):
        plan = store.plan(paper_id)
        body = await request.body()
        try:
            settings = settings_from_json(body)
            validate_settings(settings, plan)
        except (MalformedInput, InvalidSettings) as exc:
            return _error(422, exc.code, exc.message, exc.details)
        store.put_settings(paper_id, user, settings)
        return Response(status_code=204)

    @app.post("/papers/{paper_id}/paragraphs/{paragraph}/delta")
    async def post_delta(
        request: Request,
        paper_id: str,
        paragraph: int,
        user: str = Query(default="anonymous"),
    ):
        plan = store.plan(paper_id)
        if not 0 <= paragraph < plan.paragraph_count:
            return _error(
                404, "UNKNOWN_PARAGRAPH", f"paragraph {paragraph} does not exist"
            )
        try:
            body = json.loads((await request.body()).decode("utf-8"))
            step = int(body["step"])
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError):
            return _error(400, "MALFORMED_INPUT", "body must be {\"step\": +1|-1}")
        if step not in (1, -1):
            return _error(400, "MALFORMED_INPUT", "step must be +1 or -1")

        resolved: list = []

        class _Conflict(Exception):
            def __init__(self, code: str, message: str):
                self.code = code
                self.message = message

        def apply(current: ViewSettings | None) -> ViewSettings:
            settings = current if current is not None else default_settings(plan)
            new_delta = settings.paragraph_delta.get(paragraph, 0) + step
            if not -DELTA_BOUND <= new_delta <= DELTA_BOUND:
                raise _Conflict(
                    "DELTA_OUT_OF_RANGE",
                    f"delta would leave [-{DELTA_BOUND}, {DELTA_BOUND}]",
                )
            # Reject steps that cannot change the paragraph: nothing left
            # to reveal, or nothing visible to hide.
            before = resolve_view(plan, settings)
            deltas = dict(settings.paragraph_delta)
            deltas[paragraph] = new_delta
            updated = replace(settings, paragraph_delta=deltas)
            after = resolve_view(plan, updated)
            if len(after.visible) == len(before.visible):
                raise _Conflict(
                    "STEP_OUT_OF_BOUNDS",
                    "step exceeds the paragraph's candidate bounds",
                )
            resolved.append(after)
            return updated

        try:
            store.update_settings(paper_id, user, apply)
        except _Conflict as exc:
            return _error(
                409, exc.code, exc.message, {"paragraph": paragraph, "step": step}
            )
        return _json_response(highlight_set_to_json(resolved[0]))

    return app


def run_server(
    host: str = "127.0.0.1",
    port: int = 8000,
    store_path: Path | str | None = None,
    config: PipelineConfig | None = None,
):
    import uvicorn

    uvicorn.run(create_app(store_path, config), host=host, port=port)
