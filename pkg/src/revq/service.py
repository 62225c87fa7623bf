"""HTTP API for playing sessions, plus the outbound entailment-scorer client.

Sessions live in memory. The secret entity never appears in a response while
a session is open; debug evidence is spoiler-gated and, by default, has the
entity name redacted out of passage text as well.
"""

from __future__ import annotations

import datetime
import re
import threading
from dataclasses import dataclass, field

import httpx
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .game import GameEngine, GameError, GameSession, SessionState, TurnRecord, turn_record_json
from .question import AnswerLabel, BoolVerdict, ScorerUnavailable

REDACTION = "[hidden]"


class HttpScorer:
    """Client for the external classify service; failures raise ScorerUnavailable."""

    def __init__(self, base_url: str, timeout_ms: int = 2000, transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(
            timeout=timeout_ms / 1000.0, transport=transport
        )

    def __call__(self, question: str, passage: str) -> BoolVerdict:
        try:
            response = self._client.post(
                f"{self.base_url}/v1/classify",
                json={"question": question, "passage": passage},
            )
            response.raise_for_status()
            body = response.json()
            label = AnswerLabel(body["label"])
            confidence = float(body["confidence"])
            if label not in (AnswerLabel.YES, AnswerLabel.NO) or not 0.0 <= confidence <= 1.0:
                raise ValueError(body)
            return BoolVerdict(label, confidence)
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
            raise ScorerUnavailable(f"scorer at {self.base_url}: {exc}") from exc


@dataclass
class SessionHandle:
    session: GameSession
    created_at: str
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    def __init__(self) -> None:
        self._handles: dict[str, SessionHandle] = {}
        self._lock = threading.Lock()

    def add(self, session: GameSession) -> SessionHandle:
        handle = SessionHandle(
            session, datetime.datetime.now(datetime.timezone.utc).isoformat()
        )
        with self._lock:
            self._handles[session.id] = handle
        return handle

    def get(self, session_id: str) -> SessionHandle:
        with self._lock:
            handle = self._handles.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return handle


class CreateSessionRequest(BaseModel):
    entity: str = "random"
    config: dict | None = None


class QuestionRequest(BaseModel):
    text: str
    debug: bool = False


class GuessRequest(BaseModel):
    entity: str


def _redact(text: str, entity: str) -> str:
    return re.sub(rf"\b{re.escape(entity)}\b", REDACTION, text, flags=re.IGNORECASE)


def _debug_payload(record: TurnRecord, session: GameSession, redact_text: bool) -> dict:
    """Spoiler-gated diagnostics; metadata never names the target while open."""
    hidden = session.state is SessionState.OPEN
    target = session.target

    def scrub(text: str) -> str:
        return _redact(text, target) if (hidden and redact_text) else text

    return {
        # resolved text embeds the target by construction; metadata fields are
        # always scrubbed while the session is open, passage text per config
        "resolved": _redact(record.question.resolved, target) if hidden else record.question.resolved,
        "rule": record.rule_fired,
        "evidence": [
            {
                "entity": REDACTION if hidden and rp.passage.entity == target else rp.passage.entity,
                "text": scrub(rp.passage.text),
                "sparse": rp.sparse_score,
                "rerank": rp.rerank_score,
            }
            for rp in record.evidence
        ],
        "stats": {
            "per_entity_top": dict(record.stats.per_entity_top),
            "mean": record.stats.mean,
            "std": record.stats.std,
            "best": record.stats.best,
            "s_full": record.target_scores.full,
            "s_simple": record.target_scores.simple,
        },
    }


def create_app(engine: GameEngine, redact_debug_evidence: bool = True) -> FastAPI:
    app = FastAPI(title="reverse twenty questions")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    registry = SessionRegistry()
    app.state.engine = engine
    app.state.registry = registry

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/v1/sessions")
    def create_session(req: CreateSessionRequest) -> dict:
        config = engine.config
        if req.config:
            from dataclasses import replace as dc_replace

            from .game import CONFIG_FIELDS

            for key, value in req.config.items():
                if key not in CONFIG_FIELDS:
                    raise HTTPException(status_code=400, detail=f"unknown config field {key!r}")
                try:
                    config = dc_replace(config, **{key: CONFIG_FIELDS[key](value)})
                except (TypeError, ValueError) as exc:
                    raise HTTPException(
                        status_code=400, detail=f"bad config field {key!r}: {exc}"
                    ) from exc
        try:
            session = engine.new_session(target=req.entity.strip().lower(), config=config)
        except GameError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        registry.add(session)
        return {"session_id": session.id, "vocabulary_size": len(engine.taxonomy)}

    @app.post("/v1/sessions/{session_id}/question")
    def post_question(session_id: str, req: QuestionRequest) -> dict:
        handle = registry.get(session_id)
        with handle.lock:
            try:
                record = engine.answer_question(handle.session, req.text)
            except GameError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            body = {"answer": record.answer.value, "turn": record.turn}
            if req.debug:
                body["debug"] = _debug_payload(record, handle.session, redact_debug_evidence)
            return body

    @app.post("/v1/sessions/{session_id}/guess")
    def post_guess(session_id: str, req: GuessRequest) -> dict:
        handle = registry.get(session_id)
        with handle.lock:
            try:
                correct = engine.guess(handle.session, req.entity)
            except GameError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            return {"correct": correct, "target_revealed": handle.session.target}

    @app.get("/v1/sessions/{session_id}/transcript")
    def get_transcript(session_id: str) -> dict:
        handle = registry.get(session_id)
        with handle.lock:
            session = handle.session
            body = {
                "session_id": session.id,
                "state": session.state.value,
                "turns": [
                    {
                        "turn": r.turn,
                        "question": r.question.original,
                        "answer": r.answer.value,
                        "rule": r.rule_fired,
                        "detour": r.detour_reported,
                        "recovery": r.recovery_applied,
                    }
                    for r in session.transcript
                ],
            }
            if session.state is not SessionState.OPEN:
                body["target"] = session.target
                body["full_turns"] = [turn_record_json(r) for r in session.transcript]
            return body

    return app
