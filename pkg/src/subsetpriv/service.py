"""Live collection service for subset-released categorical answers.

The server never sees a respondent's value. Per session it draws a
candidate subset independently of everything respondent-specific, asks
whether the true value is inside, and persists only the final subset
(candidate on "yes", complement on "no"). The wire protocol has no
field that could carry the raw value; the only respondent input is a
boolean.
"""

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass

import numpy as np

from .design import IndependentDesign
from .errors import (
    NoPendingQuestion,
    QuestionPending,
    SessionExpired,
    UnknownVariable,
)
from .io import atomic_write_text, design_from_dict, observations_to_csv
from .schema import CategorySchema, Observations, Subset

DEFAULT_SESSION_TTL = 30 * 60.0


@dataclass(frozen=True)
class StoredRecord:
    record_id: int
    variable_id: str
    subset: tuple[int, ...]
    timestamp: float

    def as_dict(self) -> dict:
        return {"record_id": self.record_id, "variable_id": self.variable_id,
                "subset": list(self.subset), "timestamp": self.timestamp}


class CollectionStore:
    """Append-only record log, optionally persisted as JSON lines.

    Appends are serialized through a single lock; reads take a snapshot
    under the same lock. ``compact_every`` controls how often the log
    file is rewritten in one atomic pass.
    """

    def __init__(self, path=None, compact_every: int = 1000):
        self._path = os.fspath(path) if path is not None else None
        self._lock = threading.Lock()
        self._records: list[StoredRecord] = []
        self._since_compact = 0
        self._compact_every = int(compact_every)
        if self._path and os.path.exists(self._path):
            with open(self._path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    raw = json.loads(line)
                    self._records.append(StoredRecord(
                        int(raw["record_id"]), str(raw["variable_id"]),
                        tuple(int(j) for j in raw["subset"]), float(raw["timestamp"])))

    def next_record_id(self) -> int:
        with self._lock:
            return self._records[-1].record_id + 1 if self._records else 0

    def append(self, record: StoredRecord):
        with self._lock:
            self._records.append(record)
            if self._path:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.as_dict(), sort_keys=True) + "\n")
                self._since_compact += 1
                if self._since_compact >= self._compact_every:
                    self._compact_locked()

    def compact(self):
        with self._lock:
            self._compact_locked()

    def _compact_locked(self):
        if self._path:
            text = "".join(json.dumps(r.as_dict(), sort_keys=True) + "\n"
                           for r in self._records)
            atomic_write_text(self._path, text)
        self._since_compact = 0

    def records(self, variable_id: str | None = None) -> list[StoredRecord]:
        with self._lock:
            snapshot = list(self._records)
        if variable_id is None:
            return snapshot
        return [r for r in snapshot if r.variable_id == variable_id]


@dataclass
class Variable:
    variable_id: str
    schema: CategorySchema
    design: IndependentDesign


@dataclass
class Session:
    session_id: str
    variable_id: str
    created_at: float
    pending_mask: int | None = None
    status: str = "open"          # open | answered | expired


class CollectionEngine:
    """Session and question bookkeeping behind the HTTP surface."""

    def __init__(self, seed=None, session_ttl: float = DEFAULT_SESSION_TTL,
                 store: CollectionStore | None = None, clock=time.time):
        self._rng = np.random.default_rng(seed)
        self._ttl = float(session_ttl)
        self._clock = clock
        self.store = store if store is not None else CollectionStore()
        self._variables: dict[str, Variable] = {}
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    # -- registry ----------------------------------------------------------

    def register_variable(self, labels, design: IndependentDesign,
                          variable_id: str | None = None) -> str:
        labels = tuple(str(x) for x in labels)
        if len(labels) != design.p:
            raise ValueError(f"{len(labels)} labels for a design over {design.p} categories")
        schema = CategorySchema(design.p, labels)
        vid = variable_id or f"var-{len(self._variables)}"
        with self._lock:
            self._variables[vid] = Variable(vid, schema, design)
        return vid

    def variable(self, variable_id: str) -> Variable:
        try:
            return self._variables[variable_id]
        except KeyError:
            raise UnknownVariable(f"no variable registered as {variable_id!r}") from None

    # -- sessions ----------------------------------------------------------

    def create_session(self, variable_id: str) -> Session:
        var = self.variable(variable_id)
        session = Session(session_id=secrets.token_hex(16),
                          variable_id=var.variable_id,
                          created_at=self._clock())
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def _session(self, session_id: str) -> Session:
        try:
            session = self._sessions[session_id]
        except KeyError:
            raise UnknownVariable(f"no session {session_id!r}") from None
        if session.status == "open" and self._clock() - session.created_at > self._ttl:
            # expired questions are discarded, never stored
            session.status = "expired"
            session.pending_mask = None
        if session.status == "expired":
            raise SessionExpired(f"session {session_id!r} expired")
        return session

    def next_question(self, session_id: str) -> list[str]:
        session = self._session(session_id)
        if session.status != "open":
            raise NoPendingQuestion("session already answered")
        if session.pending_mask is not None:
            raise QuestionPending("answer the outstanding question first")
        var = self.variable(session.variable_id)
        with self._lock:
            mask = int(var.design.draw_candidates(1, self._rng)[0])
        session.pending_mask = mask
        return list(Subset(mask, var.schema.p).labels(var.schema))

    def submit_answer(self, session_id: str, in_subset: bool) -> StoredRecord:
        session = self._session(session_id)
        if session.pending_mask is None:
            raise NoPendingQuestion("no question outstanding")
        var = self.variable(session.variable_id)
        candidate = Subset(session.pending_mask, var.schema.p)
        stored = candidate if in_subset else candidate.complement()
        record = StoredRecord(record_id=self.store.next_record_id(),
                              variable_id=var.variable_id,
                              subset=stored.indices,
                              timestamp=self._clock())
        self.store.append(record)
        session.pending_mask = None
        session.status = "answered"
        return record

    # -- export ------------------------------------------------------------

    def export_observations(self, variable_id: str) -> Observations:
        var = self.variable(variable_id)
        records = self.store.records(variable_id)
        masks = np.array([Subset.from_indices(r.subset, var.schema.p).mask
                          for r in records], dtype=np.uint64)
        return Observations(masks, var.schema.p)

    def export_csv(self, variable_id: str) -> str:
        return observations_to_csv(self.export_observations(variable_id))


# ---------------------------------------------------------------------------
# HTTP surface


def create_app(engine: CollectionEngine | None = None, *, seed=None,
               store_path=None, session_ttl: float = DEFAULT_SESSION_TTL):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, PlainTextResponse
    from pydantic import BaseModel

    if engine is None:
        store = CollectionStore(store_path) if store_path else CollectionStore()
        engine = CollectionEngine(seed=seed, session_ttl=session_ttl, store=store)

    app = FastAPI(title="subsetpriv collection service")
    app.state.engine = engine

    class VariableBody(BaseModel):
        labels: list[str]
        design: dict | None = None
        variable_id: str | None = None

    class SessionBody(BaseModel):
        variable_id: str

    class AnswerBody(BaseModel):
        in_subset: bool

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"code": code, "message": message})

    @app.exception_handler(UnknownVariable)
    async def _unknown(request: Request, exc: UnknownVariable):
        return error(404, "unknown", str(exc))

    @app.exception_handler(QuestionPending)
    async def _pending(request: Request, exc: QuestionPending):
        return error(409, "question_pending", str(exc))

    @app.exception_handler(NoPendingQuestion)
    async def _no_pending(request: Request, exc: NoPendingQuestion):
        return error(409, "no_pending_question", str(exc))

    @app.exception_handler(SessionExpired)
    async def _expired(request: Request, exc: SessionExpired):
        return error(410, "session_expired", str(exc))

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return error(400, "invalid", str(exc))

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.post("/variables")
    async def register_variable(body: VariableBody):
        if body.design is None:
            design_dict = {"p": len(body.labels), "kind": "uniform"}
        else:
            design_dict = body.design
        design = design_from_dict(design_dict)
        vid = engine.register_variable(body.labels, design, body.variable_id)
        return {"variable_id": vid}

    @app.post("/sessions")
    async def create_session(body: SessionBody):
        session = engine.create_session(body.variable_id)
        return {"session_id": session.session_id, "status": session.status}

    @app.get("/sessions/{session_id}/question")
    async def next_question(session_id: str):
        return {"subset_labels": engine.next_question(session_id)}

    @app.post("/sessions/{session_id}/answer")
    async def submit_answer(session_id: str, body: AnswerBody):
        record = engine.submit_answer(session_id, body.in_subset)
        var = engine.variable(record.variable_id)
        return {"stored_subset": [var.schema.label(j) for j in record.subset]}

    @app.get("/variables/{variable_id}/export")
    async def export(variable_id: str, format: str = "csv"):
        if format != "csv":
            return error(400, "invalid", f"unsupported export format {format!r}")
        return PlainTextResponse(engine.export_csv(variable_id), media_type="text/csv")

    return app
