"""HTTP + event-stream API for live sessions.

The drama loop is server-driven, so the wire model is deliberately one-way:
clients submit turns with plain requests and receive everything else on a
per-viewer server-sent event stream.  Visibility is enforced server-side; a
viewer's stream is exactly the transcript filtered to what that viewer may
see, resumable by sequence number with no gaps or duplicates.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import PlainTextResponse, StreamingResponse

from .blueprint import NarrativeBlueprint, parse_document, serialize, validate
from .errors import (
    BlueprintSchemaError,
    ContractViolation,
    InputQueueFull,
    StageError,
)
from .events import visible_to
from .gateway import Backend, HttpChatBackend, ScriptedBackend
from .runtime import (
    STATUS_PERFORMING,
    Session,
    StageConfig,
    run_loop,
)

STATUS_PLANNING = "planning"


@dataclass
class SessionRecord:
    session_id: str
    blueprint: NarrativeBlueprint
    roster: dict[str, str]
    config: StageConfig
    backend_spec: dict[str, Any]
    created_at: float
    status: str = STATUS_PLANNING
    session: Session | None = None
    thread: threading.Thread | None = None

    def descriptor(self) -> dict[str, Any]:
        if self.session is not None:
            self.status = self.session.status
        return {
            "session_id": self.session_id,
            "status": self.status,
            "created_at": self.created_at,
            "roster": dict(self.roster),
            "turn_budget": self.config.turn_budget,
            "clock": self.config.clock,
            "blueprint_hash": hashlib.sha256(serialize(self.blueprint).encode()).hexdigest(),
        }


def _build_config(overrides: Mapping[str, Any]) -> StageConfig:
    known = {f for f in StageConfig.__dataclass_fields__}
    unknown = [k for k in overrides if k not in known]
    if unknown:
        raise ContractViolation(f"unknown config keys: {unknown}")
    return StageConfig(**overrides)


def _build_backend(spec: Mapping[str, Any]) -> Backend:
    if "scripted" in spec:
        return ScriptedBackend.from_jsonl(spec["scripted"])
    return HttpChatBackend(
        url=spec.get("url"), api_key=spec.get("api_key"), model=spec.get("model")
    )


class SessionRegistry:
    """All sessions of one service process."""

    def __init__(self) -> None:
        self._records: dict[str, SessionRecord] = {}
        self._lock = threading.Lock()

    def create(
        self,
        blueprint: NarrativeBlueprint,
        roster: Mapping[str, str] | None,
        config: StageConfig,
        backend_spec: Mapping[str, Any],
    ) -> SessionRecord:
        violations = validate(blueprint)
        if violations:
            raise ContractViolation(
                "blueprint failed validation: " + "; ".join(str(v) for v in violations)
            )
        record = SessionRecord(
            session_id=uuid.uuid4().hex,
            blueprint=blueprint,
            roster=dict(roster or {a.name: a.controller for a in blueprint.actors}),
            config=config,
            backend_spec=dict(backend_spec),
            created_at=time.time(),
        )
        with self._lock:
            self._records[record.session_id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        record = self._records.get(session_id)
        if record is None:
            raise KeyError(session_id)
        return record

    def start(self, session_id: str) -> SessionRecord:
        record = self.get(session_id)
        with self._lock:
            if record.session is not None:
                raise StageError("session already started")
            backend = _build_backend(record.backend_spec)
            record.session = Session(
                record.blueprint,
                record.roster,
                backend,
                record.config,
                session_id=record.session_id,
            )
            record.session.start()
            record.status = STATUS_PERFORMING
            record.thread = threading.Thread(
                target=run_loop, args=(record.session,), daemon=True
            )
            record.thread.start()
        return record


def _sse(event: Any) -> str:
    return f"id: {event.seq}\nevent: transcript\ndata: {event.to_json()}\n\n"


def _stream(session: Session, viewer: str | None, since: int) -> Iterator[str]:
    index = 0
    while True:
        batch = []
        done = False
        with session.new_event:
            while index < len(session.transcript):
                batch.append(session.transcript[index])
                index += 1
            if not batch:
                if session.status != STATUS_PERFORMING:
                    done = True
                else:
                    session.new_event.wait(timeout=0.25)
        for event in batch:
            if event.seq > since and visible_to(event, viewer):
                yield _sse(event)
        if done:
            yield "event: end\ndata: {}\n\n"
            return


def create_app(registry: SessionRegistry | None = None) -> FastAPI:
    registry = registry or SessionRegistry()
    app = FastAPI(title="stagecraft", version="0.1.0")
    app.state.registry = registry

    def _record_or_404(session_id: str) -> SessionRecord:
        try:
            return registry.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> dict[str, Any]:
        body = await request.json()
        try:
            blueprint = parse_document(body["blueprint"])
        except KeyError:
            raise HTTPException(status_code=400, detail="body needs a 'blueprint'")
        except BlueprintSchemaError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            config = _build_config(body.get("config", {}))
            record = registry.create(
                blueprint, body.get("roster"), config, body.get("backend", {})
            )
        except (ContractViolation, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return record.descriptor()

    @app.post("/sessions/{session_id}/start")
    def start_session_endpoint(session_id: str) -> dict[str, Any]:
        record = _record_or_404(session_id)
        try:
            return registry.start(session_id).descriptor()
        except StageError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return _record_or_404(session_id).descriptor()

    @app.post("/sessions/{session_id}/input")
    def submit_input(session_id: str, body: dict[str, Any]) -> dict[str, Any]:
        record = _record_or_404(session_id)
        if record.session is None:
            raise HTTPException(status_code=409, detail="session not started")
        for key in ("actor", "text", "client_seq"):
            if key not in body:
                raise HTTPException(status_code=400, detail=f"body needs {key!r}")
        try:
            return record.session.queue_player_input(
                str(body["actor"]), str(body["text"]), int(body["client_seq"])
            )
        except InputQueueFull as exc:
            raise HTTPException(status_code=409, detail=f"not your turn: {exc}")
        except (ContractViolation, StageError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/sessions/{session_id}/events")
    def stream_events(
        session_id: str,
        viewer: str = Query(default="spectator"),
        since: int = Query(default=-1),
    ) -> StreamingResponse:
        record = _record_or_404(session_id)
        if record.session is None:
            raise HTTPException(status_code=409, detail="session not started")
        viewer_name = None if viewer in ("", "spectator") else viewer
        return StreamingResponse(
            _stream(record.session, viewer_name, since), media_type="text/event-stream"
        )

    @app.get("/sessions/{session_id}/transcript")
    def download_transcript(session_id: str) -> PlainTextResponse:
        record = _record_or_404(session_id)
        if record.session is None:
            raise HTTPException(status_code=409, detail="session not started")
        with record.session.lock:
            text = "".join(e.to_json() + "\n" for e in record.session.transcript)
        return PlainTextResponse(text, media_type="application/x-ndjson")

    return app
