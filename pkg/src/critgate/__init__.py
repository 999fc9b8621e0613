"""critgate: a human-in-the-loop gatekeeper for imperative agent commands.

Subgoals arrive as commands ("Put the cat into the fridge !"), get scored
for criticality against a word lexicon, and either pass automatically or
wait for a human operator's permission.  The package also ships the
calibration tooling (labeled corpora, threshold tuner), the permission
state machine, an HTTP gateway with an event stream, and a scenario
replay harness.
"""

from .engine import CriticalityBreakdown, EngineConfig, score, score_command
from .errors import CritgateError
from .lexicon import Lexicon, LexiconEdit, LexiconStore, lookup
from .parsing import ParsedAction, extract_heads, parse, parse_command
from .protocol import CaseState, GateCase, Gatekeeper
from .tuner import ThresholdConfig, ThresholdReport, evaluate, tune, tune_oracle

__version__ = "0.1.0"

__all__ = [
    "CaseState",
    "CritgateError",
    "CriticalityBreakdown",
    "EngineConfig",
    "GateCase",
    "Gatekeeper",
    "Lexicon",
    "LexiconEdit",
    "LexiconStore",
    "ParsedAction",
    "ThresholdConfig",
    "ThresholdReport",
    "evaluate",
    "extract_heads",
    "lookup",
    "parse",
    "parse_command",
    "score",
    "score_command",
    "tune",
    "tune_oracle",
    "__version__",
]
