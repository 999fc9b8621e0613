"""Labeled action corpora.

Two kinds of line-delimited JSON corpora:

  levels       {"action": ..., "level": 1..5, "worker_id": ..., "domain_tag": ...}
  permissions  {"action": ..., "votes": [true, false, ...]}

Level 1 maps to criticality 0.0 and level 5 to 1.0 with linear interior
spacing.  Permission labels are the majority vote, ties breaking toward
"permission required".
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    CritgateError,
    EmptyVotesError,
    FormatError,
    MixedDomainError,
    OutOfRangeError,
    ParseRejectedError,
)
from .parsing import parse

LEVELS = (1, 2, 3, 4, 5)
KINDS = ("levels", "permissions")


def level_to_crit(level: int) -> float:
    """Criticality for a discrete level: 1 -> 0.0 ... 5 -> 1.0."""
    if level not in LEVELS:
        raise OutOfRangeError(f"level {level!r} not in 1..5")
    return (level - 1) / 4


def majority_label(votes: Sequence[bool]) -> bool:
    """True iff at least half the votes say "permission required"."""
    if not votes:
        raise EmptyVotesError("no votes")
    yes = sum(1 for v in votes if v)
    return yes >= len(votes) - yes


@dataclass(frozen=True)
class LevelEntry:
    action: str
    level: int
    worker_id: str
    domain_tag: str

    def to_record(self) -> dict:
        return {"action": self.action, "level": self.level,
                "worker_id": self.worker_id, "domain_tag": self.domain_tag}


@dataclass(frozen=True)
class PermissionEntry:
    action: str
    votes: tuple[bool, ...]
    label: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "label", majority_label(self.votes))

    def to_record(self) -> dict:
        return {"action": self.action, "votes": list(self.votes)}


@dataclass(frozen=True)
class RejectedLine:
    line: int
    reason: str


@dataclass(frozen=True)
class LabeledCorpus:
    kind: str
    domain_tag: str
    entries: tuple = ()
    rejects: tuple[RejectedLine, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)


def _parse_levels_record(record: dict, line: int) -> LevelEntry:
    for key in ("action", "level", "worker_id", "domain_tag"):
        if key not in record:
            raise FormatError(line, f"missing field {key!r}")
    level = record["level"]
    if not isinstance(level, int) or isinstance(level, bool) or level not in LEVELS:
        raise FormatError(line, f"level {level!r} not in 1..5")
    if not isinstance(record["action"], str):
        raise FormatError(line, "action must be a string")
    return LevelEntry(action=record["action"], level=level,
                      worker_id=str(record["worker_id"]),
                      domain_tag=str(record["domain_tag"]))


def _parse_permissions_record(record: dict, line: int) -> PermissionEntry:
    for key in ("action", "votes"):
        if key not in record:
            raise FormatError(line, f"missing field {key!r}")
    votes = record["votes"]
    if (not isinstance(votes, list) or not votes
            or not all(isinstance(v, bool) for v in votes)):
        raise FormatError(line, "votes must be a non-empty list of booleans")
    if not isinstance(record["action"], str):
        raise FormatError(line, "action must be a string")
    return PermissionEntry(action=record["action"], votes=tuple(votes))


def ingest(path: str | Path, kind: str, *, errors: str = "raise") -> LabeledCorpus:
    """Read and validate a corpus file.

    Every action must go through the parser.  With errors="raise" (default)
    the first bad line raises FormatError/ParseRejectedError/MixedDomainError;
    with errors="collect" bad lines land in the corpus's rejects report.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if errors not in ("raise", "collect"):
        raise ValueError("errors must be 'raise' or 'collect'")

    entries: list = []
    rejects: list[RejectedLine] = []
    domain_tag: str | None = None

    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                try:
                    record = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise FormatError(line_no, f"not valid JSON: {exc}") from exc
                if not isinstance(record, dict):
                    raise FormatError(line_no, "record must be an object")
                if kind == "levels":
                    entry = _parse_levels_record(record, line_no)
                else:
                    entry = _parse_permissions_record(record, line_no)
                try:
                    parse(entry.action)
                except CritgateError as exc:
                    raise ParseRejectedError(line_no, f"{entry.action!r}: {exc}") from exc
                if kind == "levels":
                    if domain_tag is None:
                        domain_tag = entry.domain_tag
                    elif entry.domain_tag != domain_tag:
                        raise MixedDomainError(
                            f"line {line_no}: domain {entry.domain_tag!r} != {domain_tag!r}")
            except CritgateError as exc:
                if errors == "raise":
                    raise
                rejects.append(RejectedLine(line=line_no, reason=str(exc)))
                continue
            entries.append(entry)

    return LabeledCorpus(kind=kind, domain_tag=domain_tag or "",
                         entries=tuple(entries), rejects=tuple(rejects))


def export(corpus: LabeledCorpus, path: str | Path) -> None:
    """Write a corpus back out; ingest(export(c)) == c for valid corpora."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in corpus.entries:
            fh.write(json.dumps(entry.to_record(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class UniformityReport:
    counts: dict[int, int]
    mean: float
    chi_square: float
    factor: float
    flagged_levels: tuple[int, ...]

    @property
    def flagged(self) -> bool:
        return bool(self.flagged_levels)


def check_uniformity(corpus: LabeledCorpus, factor: float = 2.0) -> UniformityReport:
    """Per-level counts and an imbalance check against the mean count.

    A level is flagged when its count exceeds factor * mean or falls below
    mean / factor.
    """
    if corpus.kind != "levels":
        raise ValueError("uniformity report applies to levels corpora")
    observed = Counter(e.level for e in corpus.entries)
    counts = {level: observed.get(level, 0) for level in LEVELS}
    mean = sum(counts.values()) / len(LEVELS)
    chi_square = (sum((c - mean) ** 2 / mean for c in counts.values())
                  if mean > 0 else 0.0)
    flagged = tuple(
        level for level, c in counts.items()
        if mean > 0 and (c > factor * mean or c < mean / factor)
    )
    return UniformityReport(counts=counts, mean=mean, chi_square=chi_square,
                            factor=factor, flagged_levels=flagged)


def permissions_from_pairs(pairs: Iterable[tuple[str, bool]]) -> LabeledCorpus:
    """Build a permissions corpus in memory from (action, label) pairs."""
    entries = tuple(PermissionEntry(action=a, votes=(label,)) for a, label in pairs)
    return LabeledCorpus(kind="permissions", domain_tag="", entries=entries)
