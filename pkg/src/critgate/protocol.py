"""Permission state machine.

Every submitted subgoal becomes a GateCase and moves along this graph:

    (birth) -> Scored -> AutoApproved                  combined < threshold
                      -> PendingPermission             combined >= threshold
    (birth) -> Abandoned                               command failed to parse
    PendingPermission -> Approved | Rejected
    Rejected -> AwaitingAlternative                    always, immediately
    AwaitingAlternative -> AwaitingAlternative         agent proposal rejected
                        -> Resolved                    proposal approved, or
                                                       operator proposed one
                        -> Abandoned

AutoApproved, Approved, Resolved and Abandoned are terminal.  At most one
non-terminal case may be open per task; concurrent transitions are
compare-and-set on the case state, so racers lose with WrongStateError.

Flags: an operator may flag an AutoApproved case as missed-critical and
resolve the flag by decreasing the threshold (to a value that would have
gated the case), by improving the lexicon (edits that push the re-scored
criticality to at least the threshold), or by dismissing it.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from .engine import CriticalityBreakdown, EngineConfig, score, score_command
from .errors import (
    AgentRetriesExhaustedError,
    CritgateError,
    EmptyLessonError,
    InvalidAttributionError,
    EditsNotEffectiveError,
    TaskBusyError,
    ThresholdNotEffectiveError,
    UnknownCaseError,
    UnknownFlagError,
    WrongStateError,
)
from .lexicon import LexiconEdit, LexiconStore, replay
from .parsing import parse_command


class CaseState(str, Enum):
    SCORED = "scored"
    AUTO_APPROVED = "auto_approved"
    PENDING_PERMISSION = "pending_permission"
    APPROVED = "approved"
    REJECTED = "rejected"
    AWAITING_ALTERNATIVE = "awaiting_alternative"
    RESOLVED = "resolved"
    ABANDONED = "abandoned"


TERMINAL_STATES = frozenset({
    CaseState.AUTO_APPROVED, CaseState.APPROVED,
    CaseState.RESOLVED, CaseState.ABANDONED,
})

# Legal moves; birth transitions (from None) may enter SCORED or ABANDONED.
TRANSITIONS: dict[CaseState | None, frozenset[CaseState]] = {
    None: frozenset({CaseState.SCORED, CaseState.ABANDONED}),
    CaseState.SCORED: frozenset({CaseState.AUTO_APPROVED, CaseState.PENDING_PERMISSION}),
    CaseState.PENDING_PERMISSION: frozenset({CaseState.APPROVED, CaseState.REJECTED}),
    CaseState.REJECTED: frozenset({CaseState.AWAITING_ALTERNATIVE}),
    CaseState.AWAITING_ALTERNATIVE: frozenset({
        CaseState.AWAITING_ALTERNATIVE, CaseState.RESOLVED, CaseState.ABANDONED,
    }),
}

PROPOSERS = ("agent", "operator")
VERDICTS = ("approve", "reject")

RESOLUTION_THRESHOLD = "threshold_decreased"
RESOLUTION_MODEL = "model_improved"
RESOLUTION_DISMISSED = "dismissed"


def utc_clock() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class TransitionRecord:
    frm: str | None
    to: str
    timestamp: str
    detail: str = ""

    def to_record(self) -> dict:
        return {"from": self.frm, "to": self.to,
                "timestamp": self.timestamp, "detail": self.detail}

    @classmethod
    def from_record(cls, r: dict) -> "TransitionRecord":
        return cls(frm=r.get("from"), to=r["to"],
                   timestamp=r.get("timestamp", ""), detail=r.get("detail", ""))


@dataclass
class AlternativeProposal:
    proposer: str
    command: str
    breakdown: CriticalityBreakdown | None
    verdict: str | None  # "approved" | "rejected" | None while pending
    timestamp: str

    def to_record(self) -> dict:
        return {
            "proposer": self.proposer,
            "command": self.command,
            "breakdown": self.breakdown.to_record() if self.breakdown else None,
            "verdict": self.verdict,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, r: dict) -> "AlternativeProposal":
        bd = r.get("breakdown")
        return cls(proposer=r["proposer"], command=r["command"],
                   breakdown=CriticalityBreakdown.from_record(bd) if bd else None,
                   verdict=r.get("verdict"), timestamp=r.get("timestamp", ""))


@dataclass
class GateCase:
    case_id: str
    task_id: str
    command: str
    state: CaseState
    breakdown: CriticalityBreakdown | None = None
    threshold_at_scoring: float | None = None
    alternative_history: list[AlternativeProposal] = field(default_factory=list)
    lesson: str | None = None
    reason: str | None = None
    transitions: list[TransitionRecord] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def resolved_command(self) -> str | None:
        """The approved alternative the agent should resume with, if any."""
        for alt in reversed(self.alternative_history):
            if alt.verdict == "approved":
                return alt.command
        return None

    def passed_through(self, state: CaseState) -> bool:
        return any(t.to == state.value for t in self.transitions)

    def pending_proposal(self) -> AlternativeProposal | None:
        if self.alternative_history and self.alternative_history[-1].verdict is None:
            return self.alternative_history[-1]
        return None

    def to_record(self) -> dict:
        return {
            "case_id": self.case_id,
            "task_id": self.task_id,
            "command": self.command,
            "state": self.state.value,
            "breakdown": self.breakdown.to_record() if self.breakdown else None,
            "threshold_at_scoring": self.threshold_at_scoring,
            "alternative_history": [a.to_record() for a in self.alternative_history],
            "lesson": self.lesson,
            "reason": self.reason,
            "transitions": [t.to_record() for t in self.transitions],
        }

    @classmethod
    def from_record(cls, r: dict) -> "GateCase":
        bd = r.get("breakdown")
        return cls(
            case_id=r["case_id"],
            task_id=r["task_id"],
            command=r["command"],
            state=CaseState(r["state"]),
            breakdown=CriticalityBreakdown.from_record(bd) if bd else None,
            threshold_at_scoring=r.get("threshold_at_scoring"),
            alternative_history=[AlternativeProposal.from_record(a)
                                 for a in r.get("alternative_history", [])],
            lesson=r.get("lesson"),
            reason=r.get("reason"),
            transitions=[TransitionRecord.from_record(t)
                         for t in r.get("transitions", [])],
        )


@dataclass
class MissedCriticalFlag:
    flag_id: str
    case_id: str
    opened_by: str
    opened_at: str
    breakdown: CriticalityBreakdown
    threshold_at_scoring: float
    candidate_words: tuple[str, ...]
    resolution: dict | None = None  # set exactly once
    resolved_at: str | None = None

    @property
    def open(self) -> bool:
        return self.resolution is None

    def to_record(self) -> dict:
        return {
            "flag_id": self.flag_id,
            "case_id": self.case_id,
            "opened_by": self.opened_by,
            "opened_at": self.opened_at,
            "breakdown": self.breakdown.to_record(),
            "threshold_at_scoring": self.threshold_at_scoring,
            "candidate_words": list(self.candidate_words),
            "resolution": self.resolution,
            "resolved_at": self.resolved_at,
        }

    @classmethod
    def from_record(cls, r: dict) -> "MissedCriticalFlag":
        return cls(
            flag_id=r["flag_id"],
            case_id=r["case_id"],
            opened_by=r.get("opened_by", ""),
            opened_at=r.get("opened_at", ""),
            breakdown=CriticalityBreakdown.from_record(r["breakdown"]),
            threshold_at_scoring=r["threshold_at_scoring"],
            candidate_words=tuple(r.get("candidate_words", [])),
            resolution=r.get("resolution"),
            resolved_at=r.get("resolved_at"),
        )


@dataclass
class LessonRecord:
    lesson_id: str
    case_id: str
    task_id: str
    text: str
    created: str

    def to_record(self) -> dict:
        return {"lesson_id": self.lesson_id, "case_id": self.case_id,
                "task_id": self.task_id, "text": self.text, "created": self.created}

    @classmethod
    def from_record(cls, r: dict) -> "LessonRecord":
        return cls(lesson_id=r["lesson_id"], case_id=r["case_id"],
                   task_id=r.get("task_id", ""), text=r["text"],
                   created=r.get("created", ""))


# Flag resolutions, mirroring the operator's two fixes plus dismissal.

@dataclass(frozen=True)
class ThresholdDecreased:
    new_value: float


@dataclass(frozen=True)
class ModelImproved:
    attribution: frozenset[str]
    edits: tuple[LexiconEdit, ...]


@dataclass(frozen=True)
class Dismissed:
    pass


Resolution = ThresholdDecreased | ModelImproved | Dismissed


class Gatekeeper:
    """Drives the permission state machine over a lexicon store.

    All mutations run under one lock (desk scale); each mutation emits a
    sink record {case_id, transition, payload, timestamp} carrying the full
    updated snapshot, which is what the event log persists and what replay
    consumes.  When journal_path is set the same records are appended to a
    line-delimited file.
    """

    def __init__(self, store: LexiconStore, threshold: float,
                 engine_config: EngineConfig = EngineConfig(),
                 agent_retry_cap: int = 10,
                 clock: Callable[[], str] = utc_clock,
                 sink: Callable[[dict], None] | None = None,
                 journal_path: str | Path | None = None):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold {threshold} outside [0, 1]")
        self.store = store
        self.threshold = threshold
        self.engine_config = engine_config
        self.agent_retry_cap = agent_retry_cap
        self.clock = clock
        self.sink = sink
        self.journal_path = Path(journal_path) if journal_path else None
        self.cases: dict[str, GateCase] = {}
        self.flags: dict[str, MissedCriticalFlag] = {}
        self.lessons: list[LessonRecord] = []
        self._open_case_by_task: dict[str, str] = {}
        self._case_seq = 0
        self._flag_seq = 0
        self._lesson_seq = 0
        self._lock = threading.RLock()

    @property
    def lock(self) -> threading.RLock:
        """Mutation lock; transports may hold it to group compound updates."""
        return self._lock

    # -- event plumbing ------------------------------------------------------

    def _emit(self, transition: str, case_id: str | None, payload: dict) -> None:
        record = {
            "case_id": case_id,
            "transition": transition,
            "payload": payload,
            "timestamp": self.clock(),
        }
        if self.journal_path:
            with open(self.journal_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        if self.sink:
            self.sink(record)

    def _move(self, case: GateCase, to: CaseState, detail: str = "") -> None:
        frm = case.state if case.transitions else None
        if to not in TRANSITIONS.get(frm, frozenset()):
            raise WrongStateError(
                f"case {case.case_id}: no transition {frm} -> {to.value}")
        case.transitions.append(TransitionRecord(
            frm=frm.value if frm else None, to=to.value,
            timestamp=self.clock(), detail=detail))
        case.state = to
        if to in TERMINAL_STATES:
            open_id = self._open_case_by_task.get(case.task_id)
            if open_id == case.case_id:
                del self._open_case_by_task[case.task_id]

    def _get_case(self, case_id: str) -> GateCase:
        case = self.cases.get(case_id)
        if case is None:
            raise UnknownCaseError(f"no case {case_id!r}")
        return case

    # -- operations ----------------------------------------------------------

    def submit(self, task_id: str, command: str) -> GateCase:
        """Score a subgoal and gate it.

        Auto-approves when combined criticality is below the active
        threshold, otherwise queues it for the operator.  Commands that do
        not parse become Abandoned cases with the reason recorded.
        """
        with self._lock:
            open_id = self._open_case_by_task.get(task_id)
            if open_id is not None:
                raise TaskBusyError(
                    f"task {task_id!r} already has open case {open_id}")
            self._case_seq += 1
            case = GateCase(case_id=f"case-{self._case_seq:04d}", task_id=task_id,
                            command=command, state=CaseState.SCORED)
            self.cases[case.case_id] = case
            try:
                action = parse_command(command)
            except CritgateError as exc:
                case.reason = str(exc)
                self._move(case, CaseState.ABANDONED, detail=f"parse error: {exc}")
                self._emit("case_opened", case.case_id, {"case": case.to_record()})
                return case

            snapshot = self.store.snapshot
            case.breakdown = score(action, snapshot, self.engine_config)
            case.threshold_at_scoring = self.threshold
            self._move(case, CaseState.SCORED, detail="scored")
            if case.breakdown.combined < self.threshold:
                self._move(case, CaseState.AUTO_APPROVED)
            else:
                self._open_case_by_task[task_id] = case.case_id
                self._move(case, CaseState.PENDING_PERMISSION)
            self._emit("case_opened", case.case_id, {"case": case.to_record()})
            if case.state is CaseState.PENDING_PERMISSION:
                self._emit("case_gated", case.case_id, {"case": case.to_record()})
            return case

    def decide(self, case_id: str, verdict: str, operator_id: str) -> GateCase:
        """Operator verdict on a pending case; reject opens the alternative loop."""
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        with self._lock:
            case = self._get_case(case_id)
            if case.state is not CaseState.PENDING_PERMISSION:
                raise WrongStateError(
                    f"case {case_id} is {case.state.value}, not pending_permission")
            if verdict == "approve":
                self._move(case, CaseState.APPROVED, detail=f"by {operator_id}")
            else:
                self._move(case, CaseState.REJECTED, detail=f"by {operator_id}")
                self._open_case_by_task[case.task_id] = case.case_id
                self._move(case, CaseState.AWAITING_ALTERNATIVE)
            self._emit("case_decided", case.case_id, {
                "case": case.to_record(), "verdict": verdict,
                "operator_id": operator_id, "target": "case",
            })
            return case

    def propose_alternative(self, case_id: str, proposer: str, command: str) -> GateCase:
        """Record an alternative for a rejected subgoal.

        Operator proposals carry their own authority: they are approved on
        the spot and resolve the case.  Agent proposals wait for
        decide_alternative, up to the retry cap.
        """
        if proposer not in PROPOSERS:
            raise ValueError(f"proposer must be one of {PROPOSERS}")
        with self._lock:
            case = self._get_case(case_id)
            if case.state is not CaseState.AWAITING_ALTERNATIVE:
                raise WrongStateError(
                    f"case {case_id} is {case.state.value}, not awaiting_alternative")
            if case.pending_proposal() is not None:
                raise WrongStateError(
                    f"case {case_id} has a proposal awaiting a verdict")
            if proposer == "agent":
                agent_tries = sum(1 for a in case.alternative_history
                                  if a.proposer == "agent")
                if agent_tries >= self.agent_retry_cap:
                    raise AgentRetriesExhaustedError(
                        f"agent used all {self.agent_retry_cap} proposals; "
                        "operator must propose or abandon")
            try:
                breakdown = score_command(command, self.store.snapshot,
                                          self.engine_config)
            except CritgateError as exc:
                raise WrongStateError(f"alternative does not parse: {exc}") from exc

            proposal = AlternativeProposal(
                proposer=proposer, command=command, breakdown=breakdown,
                verdict="approved" if proposer == "operator" else None,
                timestamp=self.clock())
            case.alternative_history.append(proposal)
            if proposer == "operator":
                self._move(case, CaseState.RESOLVED, detail="operator alternative")
            else:
                self._move(case, CaseState.AWAITING_ALTERNATIVE,
                           detail="agent proposal")
            self._emit("alternative_proposed", case.case_id, {
                "case": case.to_record(), "proposer": proposer,
                "command": command, "verdict": proposal.verdict,
            })
            return case

    def decide_alternative(self, case_id: str, verdict: str, operator_id: str) -> GateCase:
        """Operator verdict on the agent's pending alternative proposal."""
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        with self._lock:
            case = self._get_case(case_id)
            if case.state is not CaseState.AWAITING_ALTERNATIVE:
                raise WrongStateError(
                    f"case {case_id} is {case.state.value}, not awaiting_alternative")
            proposal = case.pending_proposal()
            if proposal is None:
                raise WrongStateError(f"case {case_id} has no pending proposal")
            if verdict == "approve":
                proposal.verdict = "approved"
                self._move(case, CaseState.RESOLVED, detail=f"by {operator_id}")
            else:
                proposal.verdict = "rejected"
                self._move(case, CaseState.AWAITING_ALTERNATIVE,
                           detail=f"proposal rejected by {operator_id}")
            self._emit("case_decided", case.case_id, {
                "case": case.to_record(), "verdict": verdict,
                "operator_id": operator_id, "target": "alternative",
            })
            return case

    def abandon(self, case_id: str, operator_id: str, reason: str = "") -> GateCase:
        """Give up on finding an alternative."""
        with self._lock:
            case = self._get_case(case_id)
            if case.state is not CaseState.AWAITING_ALTERNATIVE:
                raise WrongStateError(
                    f"case {case_id} is {case.state.value}, not awaiting_alternative")
            pending = case.pending_proposal()
            if pending is not None:
                pending.verdict = "rejected"
            case.reason = reason or "abandoned by operator"
            self._move(case, CaseState.ABANDONED, detail=f"by {operator_id}")
            self._emit("case_decided", case.case_id, {
                "case": case.to_record(), "verdict": "abandon",
                "operator_id": operator_id, "target": "case",
            })
            return case

    def record_lesson(self, case_id: str, text: str) -> LessonRecord:
        """Store the operator's free-text lesson for a rejected subgoal."""
        if not text or not text.strip():
            raise EmptyLessonError("lesson text is blank")
        with self._lock:
            case = self._get_case(case_id)
            if not case.passed_through(CaseState.REJECTED):
                raise WrongStateError(
                    f"case {case_id} was never rejected; nothing to learn from")
            self._lesson_seq += 1
            lesson = LessonRecord(
                lesson_id=f"lesson-{self._lesson_seq:04d}", case_id=case_id,
                task_id=case.task_id, text=text, created=self.clock())
            self.lessons.append(lesson)
            case.lesson = text
            self._emit("lesson_recorded", case_id, {
                "lesson": lesson.to_record(), "case": case.to_record(),
            })
            return lesson

    def lessons_for_case(self, case_id: str) -> list[LessonRecord]:
        return [l for l in self.lessons if l.case_id == case_id]

    def lessons_for_task(self, task_id: str) -> list[LessonRecord]:
        return [l for l in self.lessons if l.task_id == task_id]

    def flag_missed_critical(self, case_id: str, operator_id: str) -> MissedCriticalFlag:
        """Open (or return the existing open) missed-critical flag on an
        auto-approved case."""
        with self._lock:
            case = self._get_case(case_id)
            if case.state is not CaseState.AUTO_APPROVED:
                raise WrongStateError(
                    f"case {case_id} is {case.state.value}; only auto-approved "
                    "cases can be flagged")
            for flag in self.flags.values():
                if flag.case_id == case_id and flag.open:
                    return flag
            action = parse_command(case.command)
            self._flag_seq += 1
            flag = MissedCriticalFlag(
                flag_id=f"flag-{self._flag_seq:04d}", case_id=case_id,
                opened_by=operator_id, opened_at=self.clock(),
                breakdown=case.breakdown,
                threshold_at_scoring=case.threshold_at_scoring,
                candidate_words=tuple(sorted(action.words())))
            self.flags[flag.flag_id] = flag
            self._emit("flag_opened", case_id, {"flag": flag.to_record()})
            return flag

    def resolve_flag(self, flag_id: str, resolution: Resolution,
                     operator_id: str = "") -> MissedCriticalFlag:
        """Close a flag by decreasing the threshold, improving the lexicon,
        or dismissing.  Non-dismissed resolutions must actually make the
        flagged command gate; ineffective ones are rejected with no side
        effects."""
        with self._lock:
            flag = self.flags.get(flag_id)
            if flag is None:
                raise UnknownFlagError(f"no flag {flag_id!r}")
            if not flag.open:
                raise WrongStateError(f"flag {flag_id} already resolved")
            case = self._get_case(flag.case_id)

            if isinstance(resolution, ThresholdDecreased):
                new_value = resolution.new_value
                if not 0.0 <= new_value <= 1.0:
                    raise ValueError(f"threshold {new_value} outside [0, 1]")
                if case.breakdown.combined < new_value:
                    raise ThresholdNotEffectiveError(
                        f"criticality {case.breakdown.combined} < {new_value}; "
                        "the flagged action would still pass")
                previous = self.threshold
                self.threshold = new_value
                flag.resolution = {"kind": RESOLUTION_THRESHOLD,
                                   "new_value": new_value}
                flag.resolved_at = self.clock()
                self._emit("threshold_changed", None, {
                    "threshold": new_value, "previous": previous,
                    "source": f"flag {flag_id}",
                })
            elif isinstance(resolution, ModelImproved):
                if not resolution.attribution:
                    raise InvalidAttributionError("attribution is empty")
                extra = set(resolution.attribution) - set(flag.candidate_words)
                if extra:
                    raise InvalidAttributionError(
                        f"words {sorted(extra)} are not in the flagged command "
                        f"(candidates: {list(flag.candidate_words)})")
                if not resolution.edits:
                    raise EditsNotEffectiveError("no edits given")
                # Dry-run on a scratch copy before committing anything.
                trial = replay(self.store.snapshot, resolution.edits)
                new_crit = score_command(case.command, trial,
                                         self.engine_config).combined
                if new_crit < self.threshold:
                    raise EditsNotEffectiveError(
                        f"re-scored criticality {new_crit} still below "
                        f"threshold {self.threshold}")
                for edit in resolution.edits:
                    updated = self.store.apply(edit)
                    self._emit("lexicon_changed", None, {
                        "edit": edit.to_record(), "version": updated.version,
                    })
                flag.resolution = {
                    "kind": RESOLUTION_MODEL,
                    "attribution": sorted(resolution.attribution),
                    "edits": [e.to_record() for e in resolution.edits],
                    "new_criticality": new_crit,
                }
                flag.resolved_at = self.clock()
            elif isinstance(resolution, Dismissed):
                flag.resolution = {"kind": RESOLUTION_DISMISSED}
                flag.resolved_at = self.clock()
            else:
                raise ValueError(f"unknown resolution {resolution!r}")

            self._emit("flag_resolved", flag.case_id, {
                "flag": flag.to_record(), "operator_id": operator_id,
            })
            return flag

    # -- queries ---------------------------------------------------------------

    def get_case(self, case_id: str) -> GateCase:
        with self._lock:
            return self._get_case(case_id)

    def get_flag(self, flag_id: str) -> MissedCriticalFlag:
        with self._lock:
            flag = self.flags.get(flag_id)
            if flag is None:
                raise UnknownFlagError(f"no flag {flag_id!r}")
            return flag

    def list_cases(self, state: CaseState | None = None) -> list[GateCase]:
        with self._lock:
            cases = sorted(self.cases.values(), key=lambda c: c.case_id)
        if state is not None:
            cases = [c for c in cases if c.state is state]
        return cases

    # Lock-held record snapshots for transport layers.

    def case_record(self, case_id: str) -> dict:
        with self._lock:
            return self._get_case(case_id).to_record()

    def flag_record(self, flag_id: str) -> dict:
        with self._lock:
            return self.get_flag(flag_id).to_record()

    def case_records(self, state: CaseState | None = None) -> list[dict]:
        with self._lock:
            cases = sorted(self.cases.values(), key=lambda c: c.case_id)
            if state is not None:
                cases = [c for c in cases if c.state is state]
            return [c.to_record() for c in cases]

    # -- recovery ----------------------------------------------------------------

    def adopt(self, cases: Iterable[GateCase], flags: Iterable[MissedCriticalFlag],
              lessons: Iterable[LessonRecord]) -> None:
        """Install replayed state (see replay_records) and rebuild indexes."""
        with self._lock:
            self.cases = {c.case_id: c for c in cases}
            self.flags = {f.flag_id: f for f in flags}
            self.lessons = sorted(lessons, key=lambda l: l.lesson_id)
            self._open_case_by_task = {
                c.task_id: c.case_id
                for c in self.cases.values() if not c.terminal
            }
            self._case_seq = _max_seq(self.cases, "case-")
            self._flag_seq = _max_seq(self.flags, "flag-")
            self._lesson_seq = max(
                (int(l.lesson_id.rsplit("-", 1)[1]) for l in self.lessons),
                default=0)


def _max_seq(items: dict[str, object], prefix: str) -> int:
    return max((int(k.removeprefix(prefix)) for k in items), default=0)


def validate_transitions(case: GateCase) -> None:
    """Audit a case's recorded transition chain against the graph."""
    prev: CaseState | None = None
    for step in case.transitions:
        to = CaseState(step.to)
        if to not in TRANSITIONS.get(prev, frozenset()):
            raise WrongStateError(
                f"case {case.case_id}: illegal recorded transition "
                f"{prev} -> {to.value}")
        prev = to
    if prev is not case.state:
        raise WrongStateError(
            f"case {case.case_id}: state {case.state.value} does not match "
            f"transition log tail {prev}")


def replay_records(records: Iterable[dict]) -> tuple[
        list[GateCase], list[MissedCriticalFlag], list[LessonRecord]]:
    """Rebuild cases, flags and lessons from sink/journal records.

    Records carry full snapshots, so replay is an upsert by id; the last
    record for an id wins.
    """
    cases: dict[str, GateCase] = {}
    flags: dict[str, MissedCriticalFlag] = {}
    lessons: dict[str, LessonRecord] = {}
    for record in records:
        payload = record.get("payload", {})
        if "case" in payload:
            case = GateCase.from_record(payload["case"])
            cases[case.case_id] = case
        if "flag" in payload:
            flag = MissedCriticalFlag.from_record(payload["flag"])
            flags[flag.flag_id] = flag
        if "lesson" in payload:
            lesson = LessonRecord.from_record(payload["lesson"])
            lessons[lesson.lesson_id] = lesson
    return (list(cases.values()), list(flags.values()), list(lessons.values()))


def read_case_journal(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
