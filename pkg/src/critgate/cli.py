"""Command-line entry point.

Subcommands: parse, score, lexicon (get/set/add-valuable/export),
corpus (ingest/stats/export), tune, simulate, serve.

Exit codes: 0 success, 1 domain error, 2 usage error.  `--format records`
switches the output to line-delimited JSON for machine consumption.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bundled
from .corpus import check_uniformity, export as export_corpus, ingest
from .engine import EngineConfig, score_command
from .errors import CritgateError
from .lexicon import (
    SCORE_TABLES,
    LexiconEdit,
    LexiconStore,
    load as load_lexicon,
    lookup,
    save as save_lexicon,
)
from .parsing import parse_command
from .scenario import load_scenario, run_scenario
from .tuner import ThresholdConfig, tune as tune_threshold

_FORMATS = click.Choice(["text", "records"])


def _echo_record(record: dict) -> None:
    click.echo(json.dumps(record, ensure_ascii=False))


def _resolve_lexicon(ref: str):
    if ref == "seed":
        return bundled.seed_lexicon()
    return load_lexicon(ref)


def _engine_config(combinator: str, weights: str | None, strict: bool) -> EngineConfig:
    parsed = None
    if weights:
        parts = [float(w) for w in weights.split(",")]
        if len(parts) != 3:
            raise click.UsageError("--weights needs three comma-separated numbers")
        parsed = tuple(parts)
    return EngineConfig(combinator=combinator, weights=parsed, strict_mode=strict)


@click.group()
def cli():
    """Criticality gatekeeper for imperative agent commands."""


@cli.command("parse")
@click.option("--command", "text", required=True, help="Imperative command text.")
@click.option("--format", "fmt", type=_FORMATS, default="text")
def parse_cmd(text: str, fmt: str):
    """Split a command into verb / direct object / indirect object."""
    action = parse_command(text)
    record = {
        "verb": action.verb, "do_expr": action.do_expr, "io_expr": action.io_expr,
        "do_head": action.do_head, "io_head": action.io_head,
    }
    if fmt == "records":
        _echo_record(record)
    else:
        for key, value in record.items():
            click.echo(f"{key}: {value if value is not None else '-'}")


@cli.command("score")
@click.option("--command", "text", required=True)
@click.option("--lexicon", "lexicon_ref", default="seed", show_default=True)
@click.option("--combinator", type=click.Choice(["max", "linear"]), default="max")
@click.option("--weights", default=None, help="a,b,c for the linear combinator.")
@click.option("--strict", is_flag=True, help="Fail-safe defaults for unknown words.")
@click.option("--format", "fmt", type=_FORMATS, default="text")
def score_cmd(text, lexicon_ref, combinator, weights, strict, fmt):
    """Score a command's criticality against a lexicon."""
    lex = _resolve_lexicon(lexicon_ref)
    breakdown = score_command(text, lex, _engine_config(combinator, weights, strict))
    if fmt == "records":
        _echo_record(breakdown.to_record())
    else:
        click.echo(f"verb_based:   {breakdown.verb_based:.4f}")
        click.echo(f"object_based: {breakdown.object_based:.4f}")
        click.echo(f"value_based:  {breakdown.value_based:.4f}")
        click.echo(f"combined:     {breakdown.combined:.4f}  ({breakdown.combinator})")
        click.echo(f"lexicon_version: {breakdown.lexicon_version}")


@cli.group("lexicon")
def lexicon_group():
    """Inspect and edit a lexicon file."""


_TABLES = click.Choice([*SCORE_TABLES, "valuable_objects"])


@lexicon_group.command("get")
@click.argument("table", type=_TABLES)
@click.argument("word")
@click.option("--file", "path", default="seed", show_default=True)
@click.option("--strict", is_flag=True)
@click.option("--format", "fmt", type=_FORMATS, default="text")
def lexicon_get(table, word, path, strict, fmt):
    """Look a word up, applying the miss defaults."""
    lex = _resolve_lexicon(path)
    if table == "valuable_objects":
        record = {"table": table, "word": word,
                  "member": word.lower() in lex.valuable_objects}
    else:
        record = {"table": table, "word": word,
                  "score": lookup(lex, table, word, strict=strict)}
    if fmt == "records":
        _echo_record(record)
    else:
        value = record.get("score", record.get("member"))
        click.echo(f"{table}[{word}] = {value}")


def _edit_file(path: str, edit: LexiconEdit) -> None:
    lexicon_path = Path(path)
    journal = lexicon_path.with_suffix(lexicon_path.suffix + ".journal")
    store = LexiconStore(load_lexicon(lexicon_path), journal_path=journal)
    updated = store.apply(edit)
    save_lexicon(updated, lexicon_path)
    click.echo(f"{edit.kind} {edit.word}: version {updated.version}")


@lexicon_group.command("set")
@click.argument("table", type=click.Choice(list(SCORE_TABLES)))
@click.argument("word")
@click.argument("score", type=float)
@click.option("--file", "path", required=True,
              help="Lexicon file to edit in place (journal kept alongside).")
@click.option("--author", default="cli")
def lexicon_set(table, word, score, path, author):
    """Set a word's score in one table."""
    _edit_file(path, LexiconEdit(kind=f"set_{table}", word=word,
                                 score=score, author=author))


@lexicon_group.command("add-valuable")
@click.argument("word")
@click.option("--file", "path", required=True)
@click.option("--author", default="cli")
def lexicon_add_valuable(word, path, author):
    """Add a word to the valuable-objects set."""
    _edit_file(path, LexiconEdit(kind="add_valuable", word=word, author=author))


@lexicon_group.command("export")
@click.option("--file", "path", default="seed", show_default=True)
def lexicon_export(path):
    """Print the full lexicon document."""
    lex = _resolve_lexicon(path)
    click.echo(json.dumps(lex.to_document(), indent=2, ensure_ascii=False))


@cli.group("corpus")
def corpus_group():
    """Validate and inspect labeled corpora."""


def _resolve_corpus_path(ref: str, kind: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    return bundled.corpus_path(kind) if ref == "bundled" else path


@corpus_group.command("ingest")
@click.argument("path")
@click.option("--kind", type=click.Choice(["levels", "permissions"]), required=True)
@click.option("--lenient", is_flag=True, help="Collect bad lines instead of failing.")
@click.option("--format", "fmt", type=_FORMATS, default="text")
def corpus_ingest(path, kind, lenient, fmt):
    """Read a corpus file and report what was accepted."""
    corpus = ingest(_resolve_corpus_path(path, kind), kind,
                    errors="collect" if lenient else "raise")
    record = {
        "kind": corpus.kind, "domain_tag": corpus.domain_tag,
        "accepted": len(corpus.entries),
        "rejected": [{"line": r.line, "reason": r.reason} for r in corpus.rejects],
    }
    if fmt == "records":
        _echo_record(record)
    else:
        click.echo(f"accepted {record['accepted']} entries "
                   f"({corpus.kind}, domain {corpus.domain_tag or '-'})")
        for reject in record["rejected"]:
            click.echo(f"rejected line {reject['line']}: {reject['reason']}")


@corpus_group.command("stats")
@click.argument("path")
@click.option("--factor", type=float, default=2.0, show_default=True)
@click.option("--format", "fmt", type=_FORMATS, default="text")
def corpus_stats(path, factor, fmt):
    """Per-level counts and the uniformity check for a levels corpus."""
    corpus = ingest(_resolve_corpus_path(path, "levels"), "levels")
    report = check_uniformity(corpus, factor=factor)
    record = {
        "counts": report.counts, "mean": report.mean,
        "chi_square": report.chi_square, "flagged": report.flagged,
        "flagged_levels": list(report.flagged_levels),
    }
    if fmt == "records":
        _echo_record(record)
    else:
        for level, count in sorted(report.counts.items()):
            click.echo(f"level {level}: {count}")
        click.echo(f"chi_square: {report.chi_square:.3f}")
        click.echo("balanced" if not report.flagged
                   else f"imbalanced at levels {list(report.flagged_levels)}")


@corpus_group.command("export")
@click.argument("path")
@click.option("--kind", type=click.Choice(["levels", "permissions"]), required=True)
@click.option("--out", required=True)
def corpus_export(path, kind, out):
    """Re-serialize a corpus (ingest + export round trip)."""
    corpus = ingest(_resolve_corpus_path(path, kind), kind)
    export_corpus(corpus, out)
    click.echo(f"wrote {len(corpus.entries)} entries to {out}")


@cli.command("tune")
@click.option("--corpus", "corpus_ref", default="bundled", show_default=True,
              help="Permissions corpus path, or 'bundled'.")
@click.option("--conf", type=float, required=True)
@click.option("--lexicon", "lexicon_ref", default="seed", show_default=True)
@click.option("--combinator", type=click.Choice(["max", "linear"]), default="max")
@click.option("--weights", default=None)
@click.option("--strict", is_flag=True)
@click.option("--format", "fmt", type=_FORMATS, default="text")
def tune_cmd(corpus_ref, conf, lexicon_ref, combinator, weights, strict, fmt):
    """Calibrate the criticality threshold from a permissions corpus."""
    corpus = ingest(_resolve_corpus_path(corpus_ref, "permissions"), "permissions")
    lex = _resolve_lexicon(lexicon_ref)
    report = tune_threshold(corpus, lex, _engine_config(combinator, weights, strict),
                            ThresholdConfig(conf=conf))
    if fmt == "records":
        _echo_record(report.to_record())
    else:
        click.echo(f"threshold: {report.threshold}")
        click.echo(f"coverage: {report.coverage:.4f} (conf {conf})")
        click.echo(f"interruption_rate: {report.interruption_rate:.4f}")
        click.echo(f"actions: {len(report.per_action)}")


@cli.command("simulate")
@click.option("--scenario", "scenario_ref", required=True,
              help="Bundled name (dinner, cat-fridge, efficiency-100) or path.")
@click.option("--transcript", "transcript_path", default=None,
              help="Write the event transcript to this file.")
@click.option("--format", "fmt", type=_FORMATS, default="text")
def simulate_cmd(scenario_ref, transcript_path, fmt):
    """Replay a scenario and print its metrics."""
    metrics = run_scenario(load_scenario(scenario_ref))
    if transcript_path:
        with open(transcript_path, "w", encoding="utf-8") as fh:
            for event in metrics.transcript:
                fh.write(json.dumps(event, ensure_ascii=False) + "\n")
    if fmt == "records":
        _echo_record(metrics.to_record())
    else:
        click.echo(f"scenario: {metrics.scenario}")
        click.echo(f"threshold: {metrics.threshold}")
        click.echo(f"submitted: {metrics.submitted}  gated: {metrics.gated}  "
                   f"auto_approved: {metrics.auto_approved}")
        click.echo(f"interruption_rate: {metrics.interruption_rate:.4f}")
        click.echo(f"safety_misses: {metrics.safety_misses}")
        click.echo(f"gated_harmless: {metrics.gated_harmless}")
        for case_id, case_state in metrics.final_cases.items():
            click.echo(f"  {case_id}: {case_state}")


@cli.command("serve")
@click.option("--config", "config_path", required=True,
              help="Service config file (JSON).")
def serve_cmd(config_path):
    """Run the HTTP gateway."""
    from .service import ServiceConfig, serve

    serve(ServiceConfig.from_file(config_path))


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except CritgateError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
