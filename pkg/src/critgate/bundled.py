"""Access to the data files shipped inside the package.

Bundled artifacts: the household seed lexicon, the labeled corpora
(levels + permissions), the gold parser corpus, and the replayable
scenarios (dinner, cat-fridge, efficiency-100).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .lexicon import Lexicon, load

SCENARIOS = ("dinner", "cat-fridge", "efficiency-100")


def data_path(*parts: str) -> Path:
    root = resources.files("critgate") / "data"
    return Path(str(root.joinpath(*parts)))


def seed_lexicon_path() -> Path:
    return data_path("lexicon.json")


def seed_lexicon() -> Lexicon:
    return load(seed_lexicon_path())


def corpus_path(kind: str) -> Path:
    if kind not in ("levels", "permissions"):
        raise ValueError(f"no bundled corpus of kind {kind!r}")
    return data_path(f"corpus_{kind}.jsonl")


def parser_gold_path() -> Path:
    return data_path("parser_gold.jsonl")


def scenario_path(name: str) -> Path:
    if name not in SCENARIOS:
        raise ValueError(f"no bundled scenario {name!r}; have {SCENARIOS}")
    return data_path("scenarios", f"{name}.json")
