"""HTTP session API serving the chat frontend.

A thin adapter over chat sessions: every action available here equals what
direct ``run_turn`` calls produce with the same extractor. Sessions are
serialized per id, expire after idle time, and share only the read-only
database and rule data.
"""

from __future__ import annotations

import dataclasses
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .concierge import (
    Ask,
    ChatSession,
    Recommend,
    RestaurantRecord,
    action_kind,
    run_turn,
)
from .llm import ExtractorConfig, GREETING, Transport, make_extractor, make_responder

DEFAULT_SESSION_TTL = 30 * 60.0  # seconds idle before a session expires


class MessageIn(BaseModel):
    text: str


@dataclass
class SessionEntry:
    session: ChatSession
    session_id: str
    created_at: float
    last_active: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, ttl: float = DEFAULT_SESSION_TTL) -> None:
        self.ttl = ttl
        self._entries: dict[str, SessionEntry] = {}
        self._lock = threading.Lock()

    def create(self, session: ChatSession) -> SessionEntry:
        now = time.monotonic()
        entry = SessionEntry(session, secrets.token_hex(16), now, now)
        with self._lock:
            self._entries[entry.session_id] = entry
        return entry

    def get(self, session_id: str) -> SessionEntry:
        now = time.monotonic()
        with self._lock:
            entry = self._entries.get(session_id)
            if entry is not None and now - entry.last_active > self.ttl:
                del self._entries[session_id]
                entry = None
            if entry is None:
                raise HTTPException(status_code=404, detail="unknown session")
            entry.last_active = now
            return entry

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._entries:
                raise HTTPException(status_code=404, detail="unknown session")
            del self._entries[session_id]


def _record_payload(record: RestaurantRecord) -> dict[str, str]:
    return dataclasses.asdict(record)


def create_app(
    db: Sequence[RestaurantRecord],
    extractor_cfg: ExtractorConfig | None = None,
    preference_rules: Mapping[str, Sequence[str]] | None = None,
    transport: Transport | None = None,
    cors_origins: Sequence[str] = (),
    session_ttl: float = DEFAULT_SESSION_TTL,
) -> FastAPI:
    cfg = extractor_cfg or ExtractorConfig(mode="stub")
    app = FastAPI(title="concierge session api")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    store = SessionStore(ttl=session_ttl)
    app.state.sessions = store

    def new_session() -> ChatSession:
        return ChatSession(
            db=tuple(db),
            extract=make_extractor(cfg, "concierge-extract", transport),
            respond=make_responder(cfg, transport),
            preference_rules=preference_rules,
        )

    @app.post("/session")
    def create_session() -> dict[str, str]:
        entry = store.create(new_session())
        return {"id": entry.session_id, "greeting": GREETING}

    @app.post("/session/{session_id}/message")
    def post_message(session_id: str, message: MessageIn) -> dict[str, object]:
        entry = store.get(session_id)
        with entry.lock:
            bot_text, action, _state = run_turn(entry.session, message.text)
            if action is None:
                raise HTTPException(status_code=422, detail=bot_text)
            payload: dict[str, object] = {
                "bot_text": bot_text,
                "action_kind": action_kind(action),
            }
            if isinstance(action, Ask):
                payload["asked_attribute"] = action.attribute
            if isinstance(action, Recommend):
                payload["recommendations"] = [_record_payload(r) for r in action.records]
            return payload

    @app.get("/session/{session_id}/state")
    def get_state(session_id: str) -> dict[str, object]:
        entry = store.get(session_id)
        with entry.lock:
            return {"predicates": entry.session.state.predicate_texts()}

    @app.get("/session/{session_id}/justification")
    def get_justification(session_id: str) -> dict[str, str]:
        entry = store.get(session_id)
        with entry.lock:
            return {"justification": entry.session.last_justification}

    @app.delete("/session/{session_id}")
    def delete_session(session_id: str) -> dict[str, bool]:
        store.delete(session_id)
        return {"deleted": True}

    return app
