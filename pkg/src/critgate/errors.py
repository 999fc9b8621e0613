"""Exception hierarchy.

Every domain error raised by this package derives from CritgateError so
callers (CLI, gateway) can map the whole family to exit code 1 / HTTP 4xx
without enumerating leaf classes.
"""

from __future__ import annotations


class CritgateError(Exception):
    """Base class for all domain errors."""


# -- parsing ---------------------------------------------------------------

class EmptyCommandError(CritgateError):
    """Command text is blank after trimming."""


class NoVerbError(CritgateError):
    """Command contains only punctuation or determiners."""


# -- lexicon ---------------------------------------------------------------

class InvalidScoreError(CritgateError):
    """Score outside [0, 1]."""


class EmptyWordError(CritgateError):
    """Edit names a blank word."""


class SchemaError(CritgateError):
    """Lexicon document failed validation.

    `field` holds a dotted path to the offending entry, e.g.
    "object_danger.detergent".
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# -- corpus ----------------------------------------------------------------

class OutOfRangeError(CritgateError):
    """Criticality level outside 1..5."""


class EmptyVotesError(CritgateError):
    """Permission entry has no votes."""


class FormatError(CritgateError):
    """Corpus line is malformed. `line` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseRejectedError(CritgateError):
    """Corpus action does not parse. `line` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MixedDomainError(CritgateError):
    """Corpus entries carry more than one domain tag."""


# -- threshold tuner -------------------------------------------------------

class NoPositivesError(CritgateError):
    """No permission-required actions; calibration impossible."""


# -- gate protocol ---------------------------------------------------------

class TaskBusyError(CritgateError):
    """A non-terminal case is already open for the task."""


class WrongStateError(CritgateError):
    """Operation not enabled in the case's current state."""


class UnknownCaseError(CritgateError):
    """No case with that id."""


class UnknownFlagError(CritgateError):
    """No flag with that id."""


class AgentRetriesExhaustedError(CritgateError):
    """Agent hit its alternative-proposal cap; operator must propose or abandon."""


class EmptyLessonError(CritgateError):
    """Lesson text is blank."""


class ThresholdNotEffectiveError(CritgateError):
    """Proposed threshold would still not gate the flagged action."""


class InvalidAttributionError(CritgateError):
    """Attributed words are not drawn from the flagged command."""


class EditsNotEffectiveError(CritgateError):
    """Proposed lexicon edits leave the flagged action below the threshold."""


# -- scenarios / service ---------------------------------------------------

class ScenarioInvalidError(CritgateError):
    """Scenario step illegal in the current state. `step` is 0-based."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class CorruptJournalError(CritgateError):
    """Event journal contains an unreadable complete record."""
