"""Corpus ingestion and level/vote semantics."""

import json

import pytest
from hypothesis import given, strategies as st

from critgate.corpus import (
    LabeledCorpus,
    LevelEntry,
    PermissionEntry,
    check_uniformity,
    export,
    ingest,
    level_to_crit,
    majority_label,
)
from critgate.errors import (
    EmptyVotesError,
    FormatError,
    MixedDomainError,
    OutOfRangeError,
    ParseRejectedError,
)


class TestLevelToCrit:

    def test_endpoints(self):
        assert level_to_crit(1) == 0.0
        assert level_to_crit(5) == 1.0

    def test_midpoint(self):
        assert level_to_crit(3) == 0.5

    def test_exact_grid(self):
        assert [level_to_crit(l) for l in (1, 2, 3, 4, 5)] == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_strictly_increasing(self):
        crits = [level_to_crit(l) for l in (1, 2, 3, 4, 5)]
        assert all(a < b for a, b in zip(crits, crits[1:]))

    def test_out_of_range(self):
        for bad in (0, 6, -1):
            with pytest.raises(OutOfRangeError):
                level_to_crit(bad)


class TestMajorityLabel:

    def test_strict_majority(self):
        assert majority_label([True, True, False]) is True

    def test_tie_is_permission_required(self):
        assert majority_label([True, False]) is True

    def test_strict_minority(self):
        assert majority_label([False, False, False, True]) is False

    def test_empty_votes(self):
        with pytest.raises(EmptyVotesError):
            majority_label([])

    @given(st.lists(st.booleans(), min_size=1, max_size=15))
    def test_permutation_invariant(self, votes):
        assert majority_label(votes) == majority_label(list(reversed(votes)))
        assert majority_label(votes) == majority_label(sorted(votes))


def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


class TestIngest:

    def test_levels_happy_path(self, tmp_path):
        path = tmp_path / "levels.jsonl"
        _write_lines(path, [
            {"action": "Wash the dishes !", "level": 1, "worker_id": "w1",
             "domain_tag": "household"},
            {"action": "Burn the cat !", "level": 5, "worker_id": "w2",
             "domain_tag": "household"},
        ])
        corpus = ingest(path, "levels")
        assert len(corpus) == 2
        assert corpus.domain_tag == "household"
        assert corpus.rejects == ()

    def test_permissions_happy_path(self, tmp_path):
        path = tmp_path / "perm.jsonl"
        _write_lines(path, [
            {"action": "Burn the cat !", "votes": [True, True, False]},
            {"action": "Wash the dishes !", "votes": [False, False]},
        ])
        corpus = ingest(path, "permissions")
        assert [e.label for e in corpus.entries] == [True, False]

    def test_level_out_of_range_names_line(self, tmp_path):
        path = tmp_path / "levels.jsonl"
        _write_lines(path, [
            {"action": "Wash the dishes !", "level": 1, "worker_id": "w1",
             "domain_tag": "household"},
            {"action": "Burn the cat !", "level": 6, "worker_id": "w2",
             "domain_tag": "household"},
        ])
        with pytest.raises(FormatError) as err:
            ingest(path, "levels")
        assert err.value.line == 2

    def test_empty_file_empty_corpus(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        corpus = ingest(path, "levels")
        assert len(corpus) == 0
        assert corpus.rejects == ()

    def test_unparseable_action_rejected(self, tmp_path):
        path = tmp_path / "levels.jsonl"
        _write_lines(path, [
            {"action": "the !", "level": 1, "worker_id": "w1", "domain_tag": "h"},
        ])
        with pytest.raises(ParseRejectedError) as err:
            ingest(path, "levels")
        assert err.value.line == 1

    def test_mixed_domain_rejected(self, tmp_path):
        path = tmp_path / "levels.jsonl"
        _write_lines(path, [
            {"action": "Wash the dishes !", "level": 1, "worker_id": "w1",
             "domain_tag": "household"},
            {"action": "Park the forklift !", "level": 2, "worker_id": "w1",
             "domain_tag": "warehouse"},
        ])
        with pytest.raises(MixedDomainError):
            ingest(path, "levels")

    def test_collect_mode_reports_rejects(self, tmp_path):
        path = tmp_path / "levels.jsonl"
        path.write_text(
            json.dumps({"action": "Wash the dishes !", "level": 1,
                        "worker_id": "w1", "domain_tag": "h"}) + "\n"
            + "not json at all\n"
            + json.dumps({"action": "the !", "level": 2, "worker_id": "w1",
                          "domain_tag": "h"}) + "\n"
        )
        corpus = ingest(path, "levels", errors="collect")
        assert len(corpus) == 1
        assert [r.line for r in corpus.rejects] == [2, 3]

    def test_votes_must_be_nonempty_booleans(self, tmp_path):
        path = tmp_path / "perm.jsonl"
        _write_lines(path, [{"action": "Burn the cat !", "votes": []}])
        with pytest.raises(FormatError):
            ingest(path, "permissions")

    def test_export_ingest_round_trip(self, tmp_path):
        src = tmp_path / "src.jsonl"
        _write_lines(src, [
            {"action": "Wash the dishes !", "level": 1, "worker_id": "w1",
             "domain_tag": "household"},
            {"action": "Burn the cat !", "level": 5, "worker_id": "w2",
             "domain_tag": "household"},
        ])
        corpus = ingest(src, "levels")
        out = tmp_path / "out.jsonl"
        export(corpus, out)
        assert ingest(out, "levels") == corpus

    def test_export_ingest_round_trip_permissions(self, tmp_path):
        src = tmp_path / "src.jsonl"
        _write_lines(src, [
            {"action": "Burn the cat !", "votes": [True, False, True]},
        ])
        corpus = ingest(src, "permissions")
        out = tmp_path / "out.jsonl"
        export(corpus, out)
        assert ingest(out, "permissions") == corpus


def _levels_corpus(counts):
    entries = []
    for level, n in counts.items():
        for i in range(n):
            entries.append(LevelEntry(action="Wash the dishes !", level=level,
                                      worker_id=f"w{i}", domain_tag="h"))
    return LabeledCorpus(kind="levels", domain_tag="h", entries=tuple(entries))


class TestUniformity:

    def test_exactly_uniform_not_flagged(self):
        report = check_uniformity(_levels_corpus({1: 10, 2: 10, 3: 10, 4: 10, 5: 10}))
        assert not report.flagged
        assert report.chi_square == 0.0

    def test_extreme_imbalance_flagged(self):
        report = check_uniformity(_levels_corpus({1: 50, 2: 1, 3: 1, 4: 1, 5: 1}))
        assert report.flagged
        assert 1 in report.flagged_levels

    def test_mild_imbalance_not_flagged_at_factor_two(self):
        report = check_uniformity(_levels_corpus({1: 12, 2: 9, 3: 10, 4: 11, 5: 8}))
        assert not report.flagged
        assert report.mean == 10.0

    def test_missing_level_flagged(self):
        report = check_uniformity(_levels_corpus({1: 10, 2: 10, 3: 10, 4: 10, 5: 0}))
        assert 5 in report.flagged_levels

    def test_permissions_corpus_rejected(self):
        corpus = LabeledCorpus(kind="permissions", domain_tag="", entries=(
            PermissionEntry(action="Burn the cat !", votes=(True,)),))
        with pytest.raises(ValueError):
            check_uniformity(corpus)
