"""HTTP/JSON gateway around the gatekeeper.

Agents submit subgoals, the operator console decides, and both sides follow
one monotone event stream.  Durability comes from a single append-only
journal (events.jsonl): every mutation is appended and fsynced inside the
gatekeeper's critical section before the response is sent, so an
acknowledged decision can never be lost and the stream can never disagree
with the queryable state.  The lexicon has its own journal (initial
document + edit log) owned by the lexicon store.

Recovery replays the snapshot (if any) plus the journal tail.  A torn final
line (no trailing newline) is the signature of a crash mid-append and is
dropped; any other unreadable record means real corruption and the service
refuses to start.
"""

from __future__ import annotations

import json
import os
import shutil
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Query, Request
from fastapi.responses import JSONResponse, StreamingResponse
from filelock import FileLock, Timeout
from pydantic import BaseModel

from . import bundled
from .corpus import LabeledCorpus, PermissionEntry, ingest
from .engine import EngineConfig
from .errors import (
    CorruptJournalError,
    CritgateError,
    EditsNotEffectiveError,
    EmptyCommandError,
    EmptyLessonError,
    EmptyWordError,
    InvalidAttributionError,
    InvalidScoreError,
    NoPositivesError,
    NoVerbError,
    SchemaError,
    TaskBusyError,
    ThresholdNotEffectiveError,
    UnknownCaseError,
    UnknownFlagError,
    WrongStateError,
)
from .lexicon import SCORE_TABLES, LexiconEdit, LexiconStore, load as load_lexicon
from .protocol import (
    CaseState,
    Dismissed,
    Gatekeeper,
    ModelImproved,
    ThresholdDecreased,
    replay_records,
    utc_clock,
    validate_transitions,
)
from .tuner import ThresholdConfig, tune

EVENT_KINDS = (
    "case_opened", "case_gated", "case_decided", "alternative_proposed",
    "flag_opened", "flag_resolved", "lexicon_changed", "threshold_changed",
    "lesson_recorded", "task_created",
)

_CONFLICTS = (TaskBusyError, WrongStateError)
_NOT_FOUND = (UnknownCaseError, UnknownFlagError)
_UNPROCESSABLE = (
    EmptyCommandError, NoVerbError, InvalidScoreError, EmptyWordError,
    SchemaError, EmptyLessonError, InvalidAttributionError,
    ThresholdNotEffectiveError, EditsNotEffectiveError, NoPositivesError,
)


class HttpError(Exception):
    """Transport-level rejection carrying its HTTP status."""

    def __init__(self, status: int, error: str, detail: str):
        super().__init__(detail)
        self.status, self.error, self.detail = status, error, detail


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8787"
    data_dir: str = "gateway-data"
    lexicon: str = "seed"
    threshold: float = 0.7
    engine: dict = field(default_factory=dict)
    agent_retry_cap: int = 10
    agent_token: str = ""
    operator_token: str = ""
    heartbeat_interval: float = 5.0
    snapshot_interval: int = 1000
    console_dir: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 1]")
        if not self.agent_token or not self.operator_token:
            raise ValueError("both role tokens must be set")
        if self.agent_token == self.operator_token:
            raise ValueError("role tokens must differ")
        EngineConfig(**self.engine)  # validate eagerly

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "CRITGATE_LISTEN" in os.environ:
            doc["listen"] = os.environ["CRITGATE_LISTEN"]
        if "CRITGATE_AGENT_TOKEN" in os.environ:
            doc["agent_token"] = os.environ["CRITGATE_AGENT_TOKEN"]
        if "CRITGATE_OPERATOR_TOKEN" in os.environ:
            doc["operator_token"] = os.environ["CRITGATE_OPERATOR_TOKEN"]
        return cls(**doc)


class EventLog:
    """Append-only fsynced journal with in-memory fan-out."""

    def __init__(self, path: Path, events: list[dict]):
        self.path = path
        self.events = events
        self._cond = threading.Condition()
        self._fh = open(path, "a", encoding="utf-8")

    @property
    def seq(self) -> int:
        return self.events[-1]["seq"] if self.events else 0

    def append(self, kind: str, payload: dict, ts: str | None = None) -> dict:
        with self._cond:
            event = {
                "seq": self.seq + 1,
                "kind": kind,
                "payload": payload,
                "ts": ts or utc_clock(),
            }
            self._fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self.events.append(event)
            self._cond.notify_all()
            return event

    def since(self, seq: int) -> list[dict]:
        with self._cond:
            return [e for e in self.events if e["seq"] > seq]

    def wait_since(self, seq: int, timeout: float) -> list[dict]:
        with self._cond:
            fresh = [e for e in self.events if e["seq"] > seq]
            if fresh:
                return fresh
            self._cond.wait(timeout=timeout)
            return [e for e in self.events if e["seq"] > seq]

    def close(self):
        self._fh.close()

    @staticmethod
    def read_journal(path: Path) -> list[dict]:
        """Read all complete records, dropping only a torn final line."""
        if not path.exists():
            return []
        raw = path.read_bytes()
        if not raw:
            return []
        lines = raw.split(b"\n")
        torn = lines[-1] != b""  # crash mid-append leaves no trailing newline
        body = lines[:-1]
        events = []
        for i, line in enumerate(body):
            if not line.strip():
                continue
            try:
                event = json.loads(line.decode("utf-8"))
                seq = event["seq"]
            except (ValueError, KeyError, UnicodeDecodeError) as exc:
                raise CorruptJournalError(
                    f"{path}: unreadable record at line {i + 1}: {exc}") from exc
            if events and seq != events[-1]["seq"] + 1:
                raise CorruptJournalError(
                    f"{path}: sequence jump {events[-1]['seq']} -> {seq}")
            events.append(event)
        if torn:
            # heal the file so later appends start on a clean line
            with open(path, "wb") as fh:
                fh.write(b"\n".join(body) + (b"\n" if body else b""))
        return events


class GatewayState:
    """Everything the endpoints share: config, stores, gatekeeper, journal."""

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.data_dir = Path(cfg.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.lock = FileLock(str(self.data_dir / "gateway.lock"))
        try:
            self.lock.acquire(timeout=0)
        except Timeout:
            raise RuntimeError(
                f"another gateway already serves {self.data_dir} "
                "(single-writer lock)")
        try:
            self._recover()
        except Exception:
            self.lock.release()
            raise

    def _recover(self) -> None:
        cfg = self.cfg
        initial_path = self.data_dir / "lexicon.initial.json"
        if not initial_path.exists():
            source = (bundled.seed_lexicon_path() if cfg.lexicon == "seed"
                      else Path(cfg.lexicon))
            load_lexicon(source)  # validate before adopting
            shutil.copy(source, initial_path)
        self.store = LexiconStore.open(initial_path,
                                       self.data_dir / "lexicon.journal")

        events = EventLog.read_journal(self.data_dir / "events.jsonl")
        snapshot = self._read_snapshot()
        as_of = snapshot["as_of_seq"] if snapshot else 0

        self.tasks: dict[str, dict] = dict(snapshot["tasks"]) if snapshot else {}
        threshold = snapshot["threshold"] if snapshot else cfg.threshold
        base_records: list[dict] = []
        if snapshot:
            base_records = (
                [{"payload": {"case": c}} for c in snapshot["cases"]]
                + [{"payload": {"flag": f}} for f in snapshot["flags"]]
                + [{"payload": {"lesson": l}} for l in snapshot["lessons"]]
            )
        tail = [e for e in events if e["seq"] > as_of]
        for event in tail:
            if event["kind"] == "task_created":
                task = event["payload"]["task"]
                self.tasks[task["task_id"]] = task
            elif event["kind"] == "threshold_changed":
                threshold = event["payload"]["threshold"]
        cases, flags, lessons = replay_records(base_records + tail)
        for case in cases:
            validate_transitions(case)

        self.log = EventLog(self.data_dir / "events.jsonl", events)
        self.gatekeeper = Gatekeeper(
            self.store, threshold=threshold,
            engine_config=EngineConfig(**cfg.engine),
            agent_retry_cap=cfg.agent_retry_cap,
            sink=self._sink)
        self.gatekeeper.adopt(cases, flags, lessons)
        self._task_seq = max(
            (int(t.removeprefix("task-")) for t in self.tasks
             if t.startswith("task-") and t.removeprefix("task-").isdigit()),
            default=0)

    def _sink(self, record: dict) -> None:
        payload = {"case_id": record["case_id"], **record["payload"]}
        self.log.append(record["transition"], payload, ts=record["timestamp"])
        self._maybe_snapshot()

    def _snapshot_path(self) -> Path:
        return self.data_dir / "snapshot.json"

    def _read_snapshot(self) -> dict | None:
        path = self._snapshot_path()
        if not path.exists():
            return None
        try:
            snapshot = json.loads(path.read_text(encoding="utf-8"))
            snapshot["as_of_seq"]
            return snapshot
        except (ValueError, KeyError):
            # a torn snapshot write loses nothing: the journal has everything
            return None

    def _maybe_snapshot(self) -> None:
        interval = self.cfg.snapshot_interval
        if interval > 0 and self.log.seq % interval == 0:
            self.write_snapshot()

    def write_snapshot(self) -> None:
        gk = self.gatekeeper
        with gk.lock:
            snapshot = {
                "as_of_seq": self.log.seq,
                "threshold": gk.threshold,
                "tasks": self.tasks,
                "cases": [c.to_record() for c in gk.cases.values()],
                "flags": [f.to_record() for f in gk.flags.values()],
                "lessons": [l.to_record() for l in gk.lessons],
            }
        tmp = self._snapshot_path().with_suffix(".tmp")
        tmp.write_text(json.dumps(snapshot, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, self._snapshot_path())

    # -- service-level mutations (outside the case state machine) -------------

    def create_task(self, name: str) -> dict:
        with self.gatekeeper.lock:
            self._task_seq += 1
            task = {"task_id": f"task-{self._task_seq:04d}", "name": name,
                    "created": utc_clock()}
            self.tasks[task["task_id"]] = task
            self.log.append("task_created", {"task": task})
            self._maybe_snapshot()
            return task

    def apply_lexicon_edit(self, edit: LexiconEdit) -> dict:
        with self.gatekeeper.lock:
            updated = self.store.apply(edit)
            self.log.append("lexicon_changed",
                            {"edit": edit.to_record(), "version": updated.version})
            self._maybe_snapshot()
            return {"version": updated.version, "edit": edit.to_record()}

    def install_threshold(self, value: float, source: str) -> None:
        with self.gatekeeper.lock:
            previous = self.gatekeeper.threshold
            self.gatekeeper.threshold = value
            self.log.append("threshold_changed",
                            {"threshold": value, "previous": previous,
                             "source": source})
            self._maybe_snapshot()

    def close(self) -> None:
        self.write_snapshot()
        self.log.close()
        self.lock.release()


# -- request bodies ----------------------------------------------------------

class TaskBody(BaseModel):
    name: str


class SubgoalBody(BaseModel):
    command: str


class DecisionBody(BaseModel):
    verdict: str  # approve | reject | abandon


class AlternativeBody(BaseModel):
    command: str


class LessonBody(BaseModel):
    text: str


class ResolutionBody(BaseModel):
    kind: str
    new_value: float | None = None
    attribution: list[str] | None = None
    edits: list[dict] | None = None


class LexiconEntryBody(BaseModel):
    score: float | None = None
    member: bool | None = None
    author: str = ""


class TuneBody(BaseModel):
    conf: float
    corpus: str | None = None
    entries: list[dict] | None = None


def create_app(state: GatewayState) -> FastAPI:
    app = FastAPI(title="critgate gateway", version="0.1.0")
    app.state.gateway = state
    gk = state.gatekeeper

    def role_of(request: Request) -> str | None:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            return None
        token = header[7:].strip()
        if token == state.cfg.agent_token:
            return "agent"
        if token == state.cfg.operator_token:
            return "operator"
        return None

    def require(*roles: str):
        def dependency(request: Request) -> str:
            role = role_of(request)
            if role is None:
                raise HttpError(401, "unauthorized", "missing or unknown token")
            if role not in roles:
                raise HttpError(403, "forbidden", f"{role} may not call this")
            return role
        return Depends(dependency)

    @app.exception_handler(HttpError)
    async def handle_http_error(_request, exc: HttpError):
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.error, "detail": exc.detail})

    @app.exception_handler(CritgateError)
    async def handle_domain_error(_request, exc: CritgateError):
        if isinstance(exc, _CONFLICTS):
            status = 409
        elif isinstance(exc, _NOT_FOUND):
            status = 404
        else:
            status = 422
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def handle_value_error(_request, exc: ValueError):
        return JSONResponse(status_code=422,
                            content={"error": "ValueError", "detail": str(exc)})

    # -- tasks and subgoals ----------------------------------------------------

    @app.post("/tasks")
    def create_task(body: TaskBody, role: str = require("agent", "operator")):
        return state.create_task(body.name)

    @app.get("/tasks")
    def list_tasks(role: str = require("agent", "operator")):
        return {"tasks": sorted(state.tasks.values(), key=lambda t: t["task_id"])}

    @app.post("/tasks/{task_id}/subgoals")
    def submit_subgoal(task_id: str, body: SubgoalBody,
                       role: str = require("agent")):
        if task_id not in state.tasks:
            raise HttpError(404, "unknown_task", f"no task {task_id!r}")
        case = gk.submit(task_id, body.command)
        verdict = {
            CaseState.AUTO_APPROVED: "auto_approved",
            CaseState.PENDING_PERMISSION: "pending",
            CaseState.ABANDONED: "abandoned",
        }[case.state]
        return {"verdict": verdict, "case": gk.case_record(case.case_id)}

    # -- cases -------------------------------------------------------------------

    @app.get("/cases")
    def list_cases(wanted: str | None = Query(default=None, alias="state"),
                   role: str = require("agent", "operator")):
        case_state = None
        if wanted is not None:
            try:
                case_state = CaseState(wanted)
            except ValueError:
                raise HttpError(422, "bad_state", f"unknown state {wanted!r}")
        return {"cases": gk.case_records(case_state)}

    @app.get("/cases/{case_id}")
    def get_case(case_id: str, role: str = require("agent", "operator")):
        return gk.case_record(case_id)

    @app.post("/cases/{case_id}/decision")
    def decide(case_id: str, body: DecisionBody,
               role: str = require("operator")):
        current = gk.get_case(case_id).state
        if body.verdict == "abandon":
            gk.abandon(case_id, "operator")
        elif current is CaseState.AWAITING_ALTERNATIVE:
            gk.decide_alternative(case_id, body.verdict, "operator")
        else:
            gk.decide(case_id, body.verdict, "operator")
        return gk.case_record(case_id)

    @app.post("/cases/{case_id}/alternatives")
    def propose_alternative(case_id: str, body: AlternativeBody,
                            role: str = require("agent", "operator")):
        gk.propose_alternative(case_id, role, body.command)
        return gk.case_record(case_id)

    @app.post("/cases/{case_id}/lesson")
    def record_lesson(case_id: str, body: LessonBody,
                      role: str = require("operator")):
        return gk.record_lesson(case_id, body.text).to_record()

    @app.get("/cases/{case_id}/lessons")
    def case_lessons(case_id: str, role: str = require("agent", "operator")):
        gk.get_case(case_id)
        return {"lessons": [l.to_record() for l in gk.lessons_for_case(case_id)]}

    # -- flags ---------------------------------------------------------------------

    @app.post("/cases/{case_id}/flag")
    def open_flag(case_id: str, role: str = require("operator")):
        flag = gk.flag_missed_critical(case_id, "operator")
        return gk.flag_record(flag.flag_id)

    @app.get("/flags")
    def list_flags(role: str = require("agent", "operator")):
        with gk.lock:
            return {"flags": [f.to_record() for f in gk.flags.values()]}

    @app.get("/flags/{flag_id}")
    def get_flag(flag_id: str, role: str = require("agent", "operator")):
        return gk.flag_record(flag_id)

    @app.post("/flags/{flag_id}/resolution")
    def resolve_flag(flag_id: str, body: ResolutionBody,
                     role: str = require("operator")):
        if body.kind == "threshold_decreased":
            if body.new_value is None:
                raise HttpError(422, "bad_resolution", "new_value required")
            resolution = ThresholdDecreased(new_value=body.new_value)
        elif body.kind == "model_improved":
            resolution = ModelImproved(
                attribution=frozenset(body.attribution or []),
                edits=tuple(LexiconEdit.from_record(e) for e in body.edits or []))
        elif body.kind == "dismissed":
            resolution = Dismissed()
        else:
            raise HttpError(422, "bad_resolution", f"unknown kind {body.kind!r}")
        flag = gk.resolve_flag(flag_id, resolution, "operator")
        return gk.flag_record(flag.flag_id)

    # -- events ------------------------------------------------------------------

    @app.get("/events")
    def events(since: int = 0, limit: int = 0,
               role: str = require("agent", "operator")):
        """Line-delimited event records after `since`, in seq order, then a
        live tail with heartbeats.  limit > 0 closes the stream after that
        many records (events plus heartbeats), for polling clients."""
        if since < 0:
            raise HttpError(422, "bad_since", "since must be >= 0")

        def stream():
            last = since
            sent = 0
            while True:
                fresh = state.log.wait_since(last, state.cfg.heartbeat_interval)
                if not fresh:
                    yield json.dumps({"kind": "heartbeat", "ts": utc_clock()}) + "\n"
                    sent += 1
                else:
                    for event in fresh:
                        last = event["seq"]
                        yield json.dumps(event, ensure_ascii=False) + "\n"
                        sent += 1
                        if limit and sent >= limit:
                            return
                if limit and sent >= limit:
                    return

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    # -- lexicon -----------------------------------------------------------------

    @app.get("/lexicon")
    def get_lexicon(role: str = require("agent", "operator")):
        return state.store.snapshot.to_document()

    @app.get("/lexicon/{table}/{word}")
    def get_entry(table: str, word: str,
                  role: str = require("agent", "operator")):
        snapshot = state.store.snapshot
        if table == "valuable_objects":
            return {"table": table, "word": word,
                    "member": word.lower() in snapshot.valuable_objects}
        if table not in SCORE_TABLES:
            raise HttpError(422, "bad_table", f"unknown table {table!r}")
        stored = snapshot.table(table)
        return {"table": table, "word": word,
                "score": stored.get(word.lower()),
                "stored": word.lower() in stored}

    @app.put("/lexicon/{table}/{word}")
    def put_entry(table: str, word: str, body: LexiconEntryBody,
                  role: str = require("operator")):
        if table == "valuable_objects":
            if body.member is None:
                raise HttpError(422, "bad_edit", "member required")
            kind = "add_valuable" if body.member else "remove_valuable"
            edit = LexiconEdit(kind=kind, word=word, author=body.author)
        elif table in SCORE_TABLES:
            if body.score is None:
                raise HttpError(422, "bad_edit", "score required")
            edit = LexiconEdit(kind=f"set_{table}", word=word,
                               score=body.score, author=body.author)
        else:
            raise HttpError(422, "bad_table", f"unknown table {table!r}")
        return state.apply_lexicon_edit(edit)

    # -- threshold ----------------------------------------------------------------

    @app.post("/threshold/tune")
    def retune(body: TuneBody, role: str = require("operator")):
        if body.entries is not None:
            corpus = LabeledCorpus(
                kind="permissions", domain_tag="",
                entries=tuple(PermissionEntry(action=e["action"],
                                              votes=tuple(e["votes"]))
                              for e in body.entries))
        else:
            ref = body.corpus or "permissions"
            path = Path(ref)
            if not path.exists():
                path = bundled.corpus_path(ref)
            corpus = ingest(path, "permissions")
        report = tune(corpus, state.store.snapshot,
                      gk.engine_config, ThresholdConfig(conf=body.conf))
        state.install_threshold(report.threshold, source="tune")
        return report.to_record()

    @app.get("/config")
    def get_config(role: str = require("agent", "operator")):
        engine = gk.engine_config
        return {
            "listen": state.cfg.listen,
            "threshold": gk.threshold,
            "engine": {
                "combinator": engine.combinator,
                "weights": list(engine.weights) if engine.weights else None,
                "strict_mode": engine.strict_mode,
            },
            "agent_retry_cap": gk.agent_retry_cap,
            "lexicon_version": state.store.snapshot.version,
            "domain_tag": state.store.snapshot.domain_tag,
            "seq": state.log.seq,
            "heartbeat_interval": state.cfg.heartbeat_interval,
        }

    console = Path(state.cfg.console_dir) if state.cfg.console_dir else None
    if console and console.is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/console", StaticFiles(directory=str(console), html=True),
                  name="console")

    return app


def serve(cfg: ServiceConfig) -> None:
    """Run the gateway until interrupted."""
    import uvicorn

    state = GatewayState(cfg)
    try:
        app = create_app(state)
        host, _, port = cfg.listen.rpartition(":")
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port),
                    log_level="warning")
    finally:
        state.close()
