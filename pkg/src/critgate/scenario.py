"""Scripted agent/operator sessions replayed against an in-process gatekeeper.

A scenario is a declarative step list (submit, decide, alternatives, flag,
resolution, lesson) plus ground-truth harm labels for every submitted
command.  Replay is strictly sequential and fully deterministic: ids come
from counters and timestamps from a logical clock, so the same scenario and
lexicon produce a byte-identical transcript.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from . import bundled
from .corpus import ingest
from .engine import EngineConfig
from .errors import CritgateError, ScenarioInvalidError
from .lexicon import LexiconEdit, LexiconStore, load as load_lexicon
from .protocol import (
    CaseState,
    Dismissed,
    Gatekeeper,
    ModelImproved,
    ThresholdDecreased,
)
from .tuner import ThresholdConfig, tune

STEP_OPS = (
    "agent_submit", "operator_decide", "agent_alternative",
    "operator_alternative", "operator_flag", "flag_resolution", "lesson",
)

GROUND_TRUTH = ("harmful", "harmless")

_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)


class LogicalClock:
    """Monotone fake clock: one second per reading, fixed epoch."""

    def __init__(self):
        self.ticks = 0

    def __call__(self) -> str:
        ts = (_EPOCH + timedelta(seconds=self.ticks)).isoformat()
        self.ticks += 1
        return ts


@dataclass(frozen=True)
class Scenario:
    name: str
    task: str
    lexicon: str = "seed"
    threshold: float | None = None
    tuning: dict | None = None  # {"corpus": ref, "conf": float}
    engine: dict = field(default_factory=dict)
    agent_retry_cap: int = 10
    ground_truth: dict[str, str] = field(default_factory=dict)
    steps: tuple[dict, ...] = ()

    def validate(self) -> None:
        if (self.threshold is None) == (self.tuning is None):
            raise ScenarioInvalidError(-1, "exactly one of threshold/tuning required")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ScenarioInvalidError(-1, f"threshold {self.threshold} outside [0, 1]")
        for truth in self.ground_truth.values():
            if truth not in GROUND_TRUTH:
                raise ScenarioInvalidError(-1, f"ground truth {truth!r} invalid")
        for i, step in enumerate(self.steps):
            op = step.get("op")
            if op not in STEP_OPS:
                raise ScenarioInvalidError(i, f"unknown op {op!r}")
            if op in ("agent_submit", "agent_alternative", "operator_alternative"):
                if not step.get("command"):
                    raise ScenarioInvalidError(i, f"{op} needs a command")
            if op == "agent_submit" and step["command"] not in self.ground_truth:
                raise ScenarioInvalidError(
                    i, f"no ground truth for {step['command']!r}")
            if op == "operator_decide" and step.get("verdict") not in ("approve", "reject"):
                raise ScenarioInvalidError(i, "operator_decide needs approve/reject")
            if op == "lesson" and not step.get("text"):
                raise ScenarioInvalidError(i, "lesson needs text")
            if op == "flag_resolution" and not isinstance(step.get("resolution"), dict):
                raise ScenarioInvalidError(i, "flag_resolution needs a resolution object")

    @classmethod
    def from_document(cls, doc: dict) -> "Scenario":
        scenario = cls(
            name=doc.get("name", "unnamed"),
            task=doc.get("task", "task"),
            lexicon=doc.get("lexicon", "seed"),
            threshold=doc.get("threshold"),
            tuning=doc.get("tuning"),
            engine=doc.get("engine", {}),
            agent_retry_cap=doc.get("agent_retry_cap", 10),
            ground_truth=doc.get("ground_truth", {}),
            steps=tuple(doc.get("steps", [])),
        )
        scenario.validate()
        return scenario


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario by file path or bundled name (dinner, cat-fridge,
    efficiency-100)."""
    path = Path(ref)
    if not path.exists():
        try:
            path = bundled.scenario_path(str(ref))
        except ValueError:
            raise FileNotFoundError(f"no scenario file or bundled name {ref!r}")
    with open(path, encoding="utf-8") as fh:
        return Scenario.from_document(json.load(fh))


@dataclass
class RunMetrics:
    scenario: str
    threshold: float
    submitted: int
    gated: int
    auto_approved: int
    safety_misses: int
    gated_harmless: int
    transcript: list[dict]
    final_cases: dict[str, str]
    lessons: list[str]

    @property
    def interruption_rate(self) -> float:
        return self.gated / self.submitted if self.submitted else 0.0

    def to_record(self) -> dict:
        return {
            "scenario": self.scenario,
            "threshold": self.threshold,
            "submitted": self.submitted,
            "gated": self.gated,
            "auto_approved": self.auto_approved,
            "interruption_rate": self.interruption_rate,
            "safety_misses": self.safety_misses,
            "gated_harmless": self.gated_harmless,
            "final_cases": self.final_cases,
            "lessons": self.lessons,
            "events": len(self.transcript),
        }


def _resolve_lexicon(ref: str) -> LexiconStore:
    if ref == "seed":
        return LexiconStore(bundled.seed_lexicon())
    return LexiconStore(load_lexicon(ref))


def _resolve_threshold(scenario: Scenario, store: LexiconStore,
                       cfg: EngineConfig) -> float:
    if scenario.threshold is not None:
        return scenario.threshold
    corpus_ref = scenario.tuning["corpus"]
    path = Path(corpus_ref)
    if not path.exists():
        path = bundled.corpus_path(corpus_ref)
    corpus = ingest(path, "permissions")
    report = tune(corpus, store.snapshot, cfg,
                  ThresholdConfig(conf=scenario.tuning["conf"]))
    return report.threshold


def _resolution_from_step(resolution: dict):
    kind = resolution.get("kind")
    if kind == "threshold_decreased":
        return ThresholdDecreased(new_value=resolution["new_value"])
    if kind == "model_improved":
        return ModelImproved(
            attribution=frozenset(resolution.get("attribution", [])),
            edits=tuple(LexiconEdit.from_record(e)
                        for e in resolution.get("edits", [])),
        )
    if kind == "dismissed":
        return Dismissed()
    raise ValueError(f"unknown resolution kind {kind!r}")


def run_scenario(scenario: Scenario) -> RunMetrics:
    """Replay a scenario through the real gate protocol and measure it."""
    scenario.validate()
    transcript: list[dict] = []
    store = _resolve_lexicon(scenario.lexicon)
    cfg = EngineConfig(**scenario.engine)
    threshold = _resolve_threshold(scenario, store, cfg)
    gatekeeper = Gatekeeper(
        store, threshold=threshold, engine_config=cfg,
        agent_retry_cap=scenario.agent_retry_cap,
        clock=LogicalClock(), sink=transcript.append)

    submitted = gated = auto = misses = gated_harmless = 0
    current_case = None
    current_flag = None

    for i, step in enumerate(scenario.steps):
        op = step["op"]
        try:
            if op == "agent_submit":
                command = step["command"]
                case = gatekeeper.submit(step.get("task", scenario.task), command)
                current_case = case
                submitted += 1
                truth = scenario.ground_truth[command]
                if case.state is CaseState.PENDING_PERMISSION:
                    gated += 1
                    if truth == "harmless":
                        gated_harmless += 1
                elif case.state is CaseState.AUTO_APPROVED:
                    auto += 1
                    if truth == "harmful":
                        misses += 1
            elif op == "operator_decide":
                if current_case is None:
                    raise ScenarioInvalidError(i, "no case to decide")
                if current_case.state is CaseState.PENDING_PERMISSION:
                    gatekeeper.decide(current_case.case_id, step["verdict"], "operator")
                elif current_case.state is CaseState.AWAITING_ALTERNATIVE:
                    gatekeeper.decide_alternative(
                        current_case.case_id, step["verdict"], "operator")
                else:
                    raise ScenarioInvalidError(
                        i, f"case is {current_case.state.value}; nothing to decide")
            elif op == "agent_alternative":
                gatekeeper.propose_alternative(
                    current_case.case_id, "agent", step["command"])
            elif op == "operator_alternative":
                gatekeeper.propose_alternative(
                    current_case.case_id, "operator", step["command"])
            elif op == "operator_flag":
                current_flag = gatekeeper.flag_missed_critical(
                    current_case.case_id, "operator")
            elif op == "flag_resolution":
                if current_flag is None:
                    raise ScenarioInvalidError(i, "no open flag")
                gatekeeper.resolve_flag(
                    current_flag.flag_id,
                    _resolution_from_step(step["resolution"]), "operator")
            elif op == "lesson":
                gatekeeper.record_lesson(current_case.case_id, step["text"])
        except ScenarioInvalidError:
            raise
        except (CritgateError, ValueError, AttributeError) as exc:
            raise ScenarioInvalidError(i, f"{op}: {exc}") from exc

    return RunMetrics(
        scenario=scenario.name,
        threshold=threshold,
        submitted=submitted,
        gated=gated,
        auto_approved=auto,
        safety_misses=misses,
        gated_harmless=gated_harmless,
        transcript=transcript,
        final_cases={c.case_id: c.state.value for c in gatekeeper.list_cases()},
        lessons=[l.text for l in gatekeeper.lessons],
    )
