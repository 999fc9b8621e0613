"""Criticality scoring.

Three dimensions, each in [0, 1]:

  verb_based   = verb_crit(verb) * max(object_value(head) for present heads)
  object_based = max(object_danger(head) for present heads)
  value_based  = 1.0 if any present head is a valuable object else 0.0

Absent heads contribute 0.  The combined criticality is either the maximum
of the three dimensions (default) or a weighted linear combination.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lexicon import Lexicon, is_valuable, lookup
from .parsing import ParsedAction, extract_heads, parse_command

COMBINATORS = ("max", "linear")
_UNIFORM = (1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class EngineConfig:
    combinator: str = "max"
    weights: tuple[float, float, float] | None = None
    strict_mode: bool = False

    def __post_init__(self):
        if self.combinator not in COMBINATORS:
            raise ValueError(f"combinator must be one of {COMBINATORS}")
        if self.combinator == "linear":
            weights = tuple(self.weights) if self.weights is not None else _UNIFORM
            if len(weights) != 3 or any(w < 0 for w in weights):
                raise ValueError("weights must be three non-negative numbers")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValueError(f"weights must sum to 1, got {sum(weights)}")
            object.__setattr__(self, "weights", weights)
        elif self.weights is not None:
            raise ValueError("weights only apply to the linear combinator")


@dataclass(frozen=True)
class CriticalityBreakdown:
    verb_based: float
    object_based: float
    value_based: float
    combined: float
    combinator: str
    weights: tuple[float, float, float] | None
    lexicon_version: int

    def to_record(self) -> dict:
        return {
            "verb_based": self.verb_based,
            "object_based": self.object_based,
            "value_based": self.value_based,
            "combined": self.combined,
            "combinator": self.combinator,
            "weights": list(self.weights) if self.weights else None,
            "lexicon_version": self.lexicon_version,
        }

    @classmethod
    def from_record(cls, record: dict) -> "CriticalityBreakdown":
        weights = record.get("weights")
        return cls(
            verb_based=record["verb_based"],
            object_based=record["object_based"],
            value_based=record["value_based"],
            combined=record["combined"],
            combinator=record["combinator"],
            weights=tuple(weights) if weights else None,
            lexicon_version=record["lexicon_version"],
        )


def _heads(action: ParsedAction) -> list[str]:
    return [h for h in (action.do_head, action.io_head) if h]


def score_verb_based(action: ParsedAction, lex: Lexicon, *, strict: bool = False) -> float:
    action = extract_heads(action)
    verb = lookup(lex, "verb_crit", action.verb, strict=strict)
    value = max(
        (lookup(lex, "object_value", h, strict=strict) for h in _heads(action)),
        default=0.0,
    )
    return verb * value


def score_object_based(action: ParsedAction, lex: Lexicon, *, strict: bool = False) -> float:
    action = extract_heads(action)
    return max(
        (lookup(lex, "object_danger", h, strict=strict) for h in _heads(action)),
        default=0.0,
    )


def score_value_based(action: ParsedAction, lex: Lexicon) -> float:
    action = extract_heads(action)
    return 1.0 if any(is_valuable(lex, h) for h in _heads(action)) else 0.0


def score(action: ParsedAction, lex: Lexicon,
          cfg: EngineConfig = EngineConfig()) -> CriticalityBreakdown:
    """Full breakdown for one parsed action against a lexicon snapshot."""
    action = extract_heads(action)
    dims = (
        score_verb_based(action, lex, strict=cfg.strict_mode),
        score_object_based(action, lex, strict=cfg.strict_mode),
        score_value_based(action, lex),
    )
    if cfg.combinator == "max":
        combined = max(dims)
    else:
        combined = sum(w * d for w, d in zip(cfg.weights, dims))
    combined = min(1.0, max(0.0, combined))
    return CriticalityBreakdown(
        verb_based=dims[0],
        object_based=dims[1],
        value_based=dims[2],
        combined=combined,
        combinator=cfg.combinator,
        weights=cfg.weights,
        lexicon_version=lex.version,
    )


def score_command(text: str, lex: Lexicon,
                  cfg: EngineConfig = EngineConfig()) -> CriticalityBreakdown:
    """parse + extract + score; parse errors propagate."""
    return score(parse_command(text), lex, cfg)
