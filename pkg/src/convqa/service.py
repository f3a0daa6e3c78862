"""HTTP session service: a thin adapter over the pipeline.

Endpoints:
  POST /v1/sessions                 -> {"session_id"}
  POST /v1/sessions/{id}/turns      {"question"} -> serialized turn result
  GET  /v1/sessions/{id}            -> conversation history
  GET  /v1/health                   -> {"status", "config_digest"}

Every response body is exactly a serialized pipeline result; no answering
logic lives here. ``?trace=false`` on the ask endpoint strips the trace for
lean clients. When a built chat UI directory is provided it is served under
/ui. Sessions live in memory; with a ``snapshot_path`` the transcripts are
written out on shutdown and restored on the next start.
"""
from __future__ import annotations

from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import SessionBusyError, SessionNotFoundError, StageError
from .pipeline import Pipeline


class AskRequest(BaseModel):
    question: str


def create_app(
    pipeline: Pipeline,
    config_digest: str = "unconfigured",
    ui_dir: str | Path | None = None,
    snapshot_path: str | Path | None = None,
) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if snapshot_path is not None:
            pipeline.restore_sessions(snapshot_path)
        yield
        if snapshot_path is not None:
            pipeline.snapshot_sessions(snapshot_path)

    app = FastAPI(title="convqa", docs_url=None, redoc_url=None, lifespan=lifespan)

    @app.exception_handler(SessionNotFoundError)
    async def _not_found(request: Request, exc: SessionNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(SessionBusyError)
    async def _busy(request: Request, exc: SessionBusyError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(StageError)
    async def _stage_error(request: Request, exc: StageError):
        return JSONResponse(
            status_code=502, content={"detail": str(exc), "stage": exc.stage}
        )

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/v1/sessions")
    def create_session():
        session = pipeline.create_session()
        return {"session_id": session.id}

    @app.post("/v1/sessions/{session_id}/turns")
    def ask(session_id: str, body: AskRequest, trace: bool = True):
        result = pipeline.answer_turn(session_id, body.question)
        payload = result.to_dict(include_timings=True)
        if not trace:
            payload.pop("trace")
        return payload

    @app.get("/v1/sessions/{session_id}")
    def history(session_id: str):
        return pipeline.get_session(session_id).conversation.to_dict()

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "config_digest": config_digest}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app
