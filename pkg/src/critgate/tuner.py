"""Criticality-threshold calibration.

Given a permissions corpus, score every action with the engine and pick the
maximal threshold t such that at least a `conf` fraction of the
permission-required actions score at or above t.  Candidates are the
observed permission-required criticalities plus {0, 1}; coverage is a step
function of t, so the maximum is attained at one of these.

The comparator is fixed throughout the package: criticality >= threshold
means permission is required.

tune() is the production implementation (sorted scores + binary search);
tune_oracle() re-derives the same definition by exhaustive rescan and exists
to cross-check tune in tests.  Keep the two independent.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .corpus import LabeledCorpus
from .engine import EngineConfig, score_command
from .errors import NoPositivesError
from .lexicon import Lexicon


@dataclass(frozen=True)
class ThresholdConfig:
    conf: float

    def __post_init__(self):
        if not 0.0 < self.conf <= 1.0:
            raise ValueError(f"conf must be in (0, 1], got {self.conf}")


@dataclass(frozen=True)
class ActionScore:
    action: str
    model_crit: float
    label: bool
    gated: bool

    def to_record(self) -> dict:
        return {"action": self.action, "model_crit": self.model_crit,
                "label": self.label, "gated": self.gated}


@dataclass(frozen=True)
class ThresholdReport:
    threshold: float
    coverage: float
    interruption_rate: float
    per_action: tuple[ActionScore, ...]
    conf: float | None = None

    def to_record(self) -> dict:
        return {
            "threshold": self.threshold,
            "coverage": self.coverage,
            "interruption_rate": self.interruption_rate,
            "conf": self.conf,
            "per_action": [a.to_record() for a in self.per_action],
        }


def _score_corpus(corpus: LabeledCorpus, lex: Lexicon,
                  cfg: EngineConfig) -> list[tuple[str, float, bool]]:
    if corpus.kind != "permissions":
        raise ValueError("tuning requires a permissions corpus")
    return [(e.action, score_command(e.action, lex, cfg).combined, e.label)
            for e in corpus.entries]


def _build_report(scored: list[tuple[str, float, bool]], threshold: float,
                  conf: float | None) -> ThresholdReport:
    per_action = tuple(
        ActionScore(action=a, model_crit=c, label=label, gated=c >= threshold)
        for a, c, label in scored
    )
    positives = [a for a in per_action if a.label]
    coverage = (sum(1 for a in positives if a.gated) / len(positives)
                if positives else 1.0)
    interruption = (sum(1 for a in per_action if a.gated) / len(per_action)
                    if per_action else 0.0)
    return ThresholdReport(threshold=threshold, coverage=coverage,
                           interruption_rate=interruption,
                           per_action=per_action, conf=conf)


def select_threshold(positive_crits: list[float], conf: float) -> float:
    """Maximal candidate threshold covering >= conf of the positives.

    O(k log n): count-at-or-above via binary search on the sorted scores,
    walking candidates from the top down.
    """
    if not positive_crits:
        raise NoPositivesError("no permission-required actions")
    ordered = sorted(positive_crits)
    n = len(ordered)
    for t in sorted(set(ordered) | {0.0, 1.0}, reverse=True):
        at_or_above = n - bisect_left(ordered, t)
        if at_or_above / n >= conf:
            return t
    return 0.0  # unreachable: t=0 always covers everything


def select_threshold_oracle(positive_crits: list[float], conf: float) -> float:
    """Brute-force restatement of the same rule, for cross-checking."""
    if not positive_crits:
        raise NoPositivesError("no permission-required actions")
    n = len(positive_crits)
    feasible = []
    for t in set(positive_crits) | {0.0, 1.0}:
        covered = 0
        for c in positive_crits:
            if c >= t:
                covered += 1
        if covered / n >= conf:
            feasible.append(t)
    return max(feasible) if feasible else 0.0


def tune(corpus: LabeledCorpus, lex: Lexicon, cfg: EngineConfig,
         tc: ThresholdConfig) -> ThresholdReport:
    """Calibrate the threshold from a permissions corpus."""
    scored = _score_corpus(corpus, lex, cfg)
    positives = [c for _, c, label in scored if label]
    threshold = select_threshold(positives, tc.conf)
    return _build_report(scored, threshold, tc.conf)


def tune_oracle(corpus: LabeledCorpus, lex: Lexicon, cfg: EngineConfig,
                tc: ThresholdConfig) -> ThresholdReport:
    """Exhaustive twin of tune(); test use only."""
    scored = _score_corpus(corpus, lex, cfg)
    positives = [c for _, c, label in scored if label]
    threshold = select_threshold_oracle(positives, tc.conf)
    return _build_report(scored, threshold, tc.conf)


def evaluate(threshold: float, corpus: LabeledCorpus, lex: Lexicon,
             cfg: EngineConfig = EngineConfig()) -> ThresholdReport:
    """Apply a fixed threshold to a corpus and report gating outcomes."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    scored = _score_corpus(corpus, lex, cfg)
    return _build_report(scored, threshold, None)
