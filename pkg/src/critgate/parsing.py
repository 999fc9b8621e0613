"""Imperative-command parsing.

Splits a command like "Cut the long cucumber into thin slices !" into three
constituents (verb, direct-object expression, indirect-object expression)
and extracts one head word per expression for lexicon lookup.

Grammar:  COMMAND := VERB [PARTICLE] NP? PREP-PHRASE? "!"?
The first token is the verb; a second token from PARTICLES merges into it
when at least one more token follows ("switch on the water boiler").  The
direct-object expression runs from after the verb to the first preposition;
the indirect-object expression runs from that preposition (inclusive) to the
end.  Everything is lowercased and stripped of "!", "." and ",".
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import EmptyCommandError, NoVerbError

PARTICLES = frozenset({"on", "off", "up", "down", "out"})

PREPOSITIONS = frozenset({
    "into", "in", "on", "onto", "to", "with", "from", "under", "over",
    "at", "for",
})

DETERMINERS = frozenset({
    "the", "a", "an", "some", "my", "his", "her", "this", "that",
})

STRIP_CHARS = "!.,"
_STRIP_TABLE = str.maketrans("", "", STRIP_CHARS)


@dataclass(frozen=True)
class ParsedAction:
    """One parsed imperative command.

    `do_expr`/`io_expr` are None when the constituent is absent; the io
    expression keeps its leading preposition.  Heads are None until
    extract_heads has run.
    """

    verb: str
    do_expr: str | None = None
    io_expr: str | None = None
    do_head: str | None = None
    io_head: str | None = None

    def words(self) -> frozenset[str]:
        """Verb plus extracted heads; the vocabulary an operator may attribute."""
        return frozenset(w for w in (self.verb, self.do_head, self.io_head) if w)


def normalize(text: str) -> str:
    """Lowercase, drop strip characters, collapse whitespace."""
    return " ".join(text.lower().translate(_STRIP_TABLE).split())


def parse(text: str) -> ParsedAction:
    """Parse a raw command into its three constituents.

    Raises EmptyCommandError on blank input and NoVerbError when nothing
    but punctuation or determiners remains after normalization.
    """
    if not text or not text.strip():
        raise EmptyCommandError("command is blank")
    tokens = normalize(text).split()
    if not tokens:
        raise NoVerbError(f"no verb in {text!r}: only punctuation")
    if all(t in DETERMINERS for t in tokens):
        raise NoVerbError(f"no verb in {text!r}: only determiners")

    verb = tokens[0]
    rest_start = 1
    if len(tokens) >= 3 and tokens[1] in PARTICLES:
        verb = f"{tokens[0]} {tokens[1]}"
        rest_start = 2
    rest = tokens[rest_start:]

    prep_at = next((i for i, t in enumerate(rest) if t in PREPOSITIONS), None)
    if prep_at is None:
        do_tokens, io_tokens = rest, []
    else:
        do_tokens, io_tokens = rest[:prep_at], rest[prep_at:]

    return ParsedAction(
        verb=verb,
        do_expr=" ".join(do_tokens) or None,
        io_expr=" ".join(io_tokens) or None,
    )


def _head_of(expr: str) -> str:
    """Head word of an expression: last token after stripping a leading
    preposition and leading determiners, falling back to the last token."""
    tokens = expr.split()
    after_prep = tokens[1:] if tokens and tokens[0] in PREPOSITIONS else tokens
    content = list(after_prep)
    while content and content[0] in DETERMINERS:
        content.pop(0)
    if content:
        return content[-1]
    if after_prep:
        return after_prep[-1]
    return tokens[-1]


def extract_heads(action: ParsedAction) -> ParsedAction:
    """Fill do_head/io_head for the present expressions. Idempotent."""
    return replace(
        action,
        do_head=_head_of(action.do_expr) if action.do_expr else None,
        io_head=_head_of(action.io_expr) if action.io_expr else None,
    )


def parse_command(text: str) -> ParsedAction:
    """parse + extract_heads in one call."""
    return extract_heads(parse(text))
