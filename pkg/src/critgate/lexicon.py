"""Word-level knowledge store.

A Lexicon is an immutable snapshot of four word tables: verb criticality,
object danger, object value, and the set of valuable objects that force
permission.  Mutations go through LexiconEdit records, each bumping the
version; a LexiconStore serializes writers, journals every edit, and
publishes fresh snapshots atomically so readers never see a half-applied
edit.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .errors import EmptyWordError, InvalidScoreError, SchemaError

SCORE_TABLES = ("verb_crit", "object_danger", "object_value")

SET_KINDS = ("set_verb_crit", "set_object_danger", "set_object_value")
EDIT_KINDS = SET_KINDS + ("add_valuable", "remove_valuable")

# Unknown-word defaults per table: standard mode treats the lexicon as a
# danger whitelist (miss = 0); strict mode fails safe on verbs and dangers.
_STANDARD_DEFAULTS = {"verb_crit": 0.0, "object_danger": 0.0, "object_value": 0.0}
_STRICT_DEFAULTS = {"verb_crit": 0.5, "object_danger": 0.5, "object_value": 0.0}


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Lexicon:
    verb_crit: dict[str, float] = field(default_factory=dict)
    object_danger: dict[str, float] = field(default_factory=dict)
    object_value: dict[str, float] = field(default_factory=dict)
    valuable_objects: frozenset[str] = frozenset()
    version: int = 0
    domain_tag: str = ""

    def table(self, name: str) -> dict[str, float]:
        if name not in SCORE_TABLES:
            raise KeyError(f"unknown table {name!r}")
        return getattr(self, name)

    def to_document(self) -> dict:
        return {
            "version": self.version,
            "domain_tag": self.domain_tag,
            "verb_crit": dict(sorted(self.verb_crit.items())),
            "object_danger": dict(sorted(self.object_danger.items())),
            "object_value": dict(sorted(self.object_value.items())),
            "valuable_objects": sorted(self.valuable_objects),
        }


@dataclass(frozen=True)
class LexiconEdit:
    kind: str
    word: str
    score: float | None = None
    author: str = ""
    timestamp: str = field(default_factory=_utcnow)

    def __post_init__(self):
        if self.kind not in EDIT_KINDS:
            raise ValueError(f"unknown edit kind {self.kind!r}")
        if not self.word or not self.word.strip():
            raise EmptyWordError("edit word is blank")
        if self.kind in SET_KINDS:
            if self.score is None:
                raise InvalidScoreError(f"{self.kind} requires a score")
            if not 0.0 <= self.score <= 1.0:
                raise InvalidScoreError(f"score {self.score} outside [0, 1]")
        elif self.score is not None:
            raise InvalidScoreError(f"{self.kind} takes no score")

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "word": self.word,
            "score": self.score,
            "author": self.author,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, record: dict) -> "LexiconEdit":
        return cls(
            kind=record["kind"],
            word=record["word"],
            score=record.get("score"),
            author=record.get("author", ""),
            timestamp=record.get("timestamp", ""),
        )


def lookup(lex: Lexicon, table: str, word: str, *,
           strict: bool = False, singularize: bool = True) -> float:
    """Score of `word` in `table`, never outside [0, 1].

    A miss retries once with one trailing "s" stripped (plural fallback),
    then returns the table's unknown-word default.
    """
    scores = lex.table(table)
    word = word.lower()
    if word in scores:
        return scores[word]
    if singularize and word.endswith("s") and word[:-1] in scores:
        return scores[word[:-1]]
    defaults = _STRICT_DEFAULTS if strict else _STANDARD_DEFAULTS
    return defaults[table]


def is_valuable(lex: Lexicon, word: str, *, singularize: bool = True) -> bool:
    """Valuable-objects membership, with the same plural fallback as lookup."""
    word = word.lower()
    if word in lex.valuable_objects:
        return True
    return singularize and word.endswith("s") and word[:-1] in lex.valuable_objects


def apply_edit(lex: Lexicon, edit: LexiconEdit) -> Lexicon:
    """Pure application of one edit; version always advances by one."""
    word = edit.word.lower().strip()
    if edit.kind in SET_KINDS:
        table = edit.kind.removeprefix("set_")
        updated = dict(lex.table(table))
        updated[word] = edit.score
        return replace(lex, **{table: updated, "version": lex.version + 1})
    if edit.kind == "add_valuable":
        return replace(lex, valuable_objects=lex.valuable_objects | {word},
                       version=lex.version + 1)
    return replace(lex, valuable_objects=lex.valuable_objects - {word},
                   version=lex.version + 1)


def replay(initial: Lexicon, edits: Iterable[LexiconEdit]) -> Lexicon:
    lex = initial
    for edit in edits:
        lex = apply_edit(lex, edit)
    return lex


# -- document persistence ----------------------------------------------------

_TOP_KEYS = {"version", "domain_tag", "verb_crit", "object_danger",
             "object_value", "valuable_objects"}


def _validate_scores(table: str, scores: object) -> dict[str, float]:
    if not isinstance(scores, dict):
        raise SchemaError(table, "must be an object of word -> score")
    out: dict[str, float] = {}
    for word, score in scores.items():
        path = f"{table}.{word}"
        if not isinstance(word, str) or not word.strip():
            raise SchemaError(path, "word must be a non-empty string")
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise SchemaError(path, f"score must be a number, got {score!r}")
        if not 0.0 <= float(score) <= 1.0:
            raise SchemaError(path, f"score {score} outside [0, 1]")
        out[word.lower()] = float(score)
    return out


def from_document(doc: dict) -> Lexicon:
    """Validate a parsed lexicon document; raises SchemaError with the
    offending field path."""
    if not isinstance(doc, dict):
        raise SchemaError("$", "document must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level key")
    version = doc.get("version", 0)
    if not isinstance(version, int) or isinstance(version, bool) or version < 0:
        raise SchemaError("version", f"must be a non-negative integer, got {version!r}")
    domain_tag = doc.get("domain_tag", "")
    if not isinstance(domain_tag, str):
        raise SchemaError("domain_tag", "must be a string")
    valuable = doc.get("valuable_objects", [])
    if not isinstance(valuable, list) or not all(isinstance(w, str) for w in valuable):
        raise SchemaError("valuable_objects", "must be a list of words")
    return Lexicon(
        verb_crit=_validate_scores("verb_crit", doc.get("verb_crit", {})),
        object_danger=_validate_scores("object_danger", doc.get("object_danger", {})),
        object_value=_validate_scores("object_value", doc.get("object_value", {})),
        valuable_objects=frozenset(w.lower() for w in valuable),
        version=version,
        domain_tag=domain_tag,
    )


def load(path: str | Path) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"not valid JSON: {exc}") from exc
    return from_document(doc)


def save(lex: Lexicon, path: str | Path) -> None:
    """Atomic write (tmp file + rename); save then load round-trips."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(lex.to_document(), indent=2, ensure_ascii=False) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


def read_journal(path: str | Path) -> list[LexiconEdit]:
    edits = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                edits.append(LexiconEdit.from_record(json.loads(line)))
    return edits


class LexiconStore:
    """Single-writer, many-reader lexicon holder.

    Readers grab `snapshot` (an immutable Lexicon) without locking; writers
    go through apply(), which journals the edit (fsynced when a journal path
    is set) before publishing the new snapshot.
    """

    def __init__(self, initial: Lexicon, journal_path: str | Path | None = None):
        self._lock = threading.Lock()
        self._snapshot = initial
        self.journal_path = Path(journal_path) if journal_path else None

    @classmethod
    def open(cls, lexicon_path: str | Path,
             journal_path: str | Path | None = None) -> "LexiconStore":
        """Load the document and replay any existing journal on top of it."""
        lex = load(lexicon_path)
        if journal_path and Path(journal_path).exists():
            lex = replay(lex, read_journal(journal_path))
        return cls(lex, journal_path)

    @property
    def snapshot(self) -> Lexicon:
        return self._snapshot

    def apply(self, edit: LexiconEdit) -> Lexicon:
        with self._lock:
            updated = apply_edit(self._snapshot, edit)
            if self.journal_path:
                with open(self.journal_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(edit.to_record(), ensure_ascii=False) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._snapshot = updated
            return updated
