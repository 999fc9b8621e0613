"""Threshold tuner tests: the five-step calibration, its oracle twin, and
fixed-threshold evaluation."""

import pytest
from hypothesis import given, settings, strategies as st

from critgate.corpus import LabeledCorpus, PermissionEntry
from critgate.engine import EngineConfig
from critgate.errors import NoPositivesError
from critgate.lexicon import Lexicon
from critgate.tuner import (
    ThresholdConfig,
    evaluate,
    select_threshold,
    select_threshold_oracle,
    tune,
    tune_oracle,
)


def corpus_with_crits(pairs):
    """Build a permissions corpus plus a lexicon that makes each action score
    exactly the requested criticality (object_danger drives the max)."""
    entries = []
    danger = {}
    for i, (crit, label) in enumerate(pairs):
        word = f"obj{i}"
        danger[word] = crit
        entries.append(PermissionEntry(
            action=f"handle the {word} !", votes=(label,)))
    lex = Lexicon(object_danger=danger, domain_tag="synthetic")
    return LabeledCorpus(kind="permissions", domain_tag="", entries=tuple(entries)), lex


class TestSelectThreshold:

    def test_worked_example(self):
        # 4/5 = 0.8 gated at 0.6; 0.7 would gate only 3/5
        assert select_threshold([0.9, 0.8, 0.7, 0.6, 0.2], 0.8) == 0.6

    def test_all_ones(self):
        for conf in (0.5, 0.95, 1.0):
            assert select_threshold([1.0, 1.0, 1.0], conf) == 1.0

    def test_full_confidence_with_zero_positive(self):
        assert select_threshold([0.4, 0.0, 0.9], 1.0) == 0.0

    def test_single_positive(self):
        assert select_threshold([0.4], 0.95) == 0.4

    def test_duplicate_candidates_collapse(self):
        assert select_threshold([0.5, 0.5], 0.95) == 0.5

    def test_no_positives(self):
        with pytest.raises(NoPositivesError):
            select_threshold([], 0.95)
        with pytest.raises(NoPositivesError):
            select_threshold_oracle([], 0.95)


class TestTune:

    def test_report_fields(self):
        corpus, lex = corpus_with_crits(
            [(0.9, True), (0.8, True), (0.7, True), (0.6, True), (0.2, True),
             (0.1, False), (0.95, False)])
        report = tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=0.8))
        assert report.threshold == 0.6
        assert report.coverage == pytest.approx(0.8)
        assert report.conf == 0.8
        # gated: crits >= 0.6 -> 0.9, 0.8, 0.7, 0.6 and the 0.95 negative
        assert report.interruption_rate == pytest.approx(5 / 7)
        by_action = {a.action: a for a in report.per_action}
        assert by_action["handle the obj4 !"].gated is False
        assert by_action["handle the obj6 !"].gated is True

    def test_threshold_is_observed_value_or_extreme(self):
        corpus, lex = corpus_with_crits(
            [(0.33, True), (0.77, True), (0.51, False)])
        report = tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=0.9))
        assert report.threshold in {0.33, 0.77, 0.0, 1.0}

    def test_requires_permissions_corpus(self):
        with pytest.raises(ValueError):
            tune(LabeledCorpus(kind="levels", domain_tag="h"), Lexicon(),
                 EngineConfig(), ThresholdConfig(conf=0.9))

    def test_no_positives_raises(self):
        corpus, lex = corpus_with_crits([(0.5, False)])
        with pytest.raises(NoPositivesError):
            tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=0.9))

    def test_conf_validation(self):
        with pytest.raises(ValueError):
            ThresholdConfig(conf=0.0)
        with pytest.raises(ValueError):
            ThresholdConfig(conf=1.2)


class TestEvaluate:

    def test_dialog_threshold_does_not_gate_below(self):
        corpus, lex = corpus_with_crits([(0.5, True)])
        report = evaluate(0.7, corpus, lex)
        assert report.per_action[0].gated is False

    def test_zero_threshold_gates_everything(self):
        corpus, lex = corpus_with_crits([(0.0, False), (0.3, True), (0.9, False)])
        report = evaluate(0.0, corpus, lex)
        assert report.interruption_rate == 1.0

    def test_one_threshold_gates_nothing_below(self):
        corpus, lex = corpus_with_crits([(0.9, True), (0.5, False)])
        report = evaluate(1.0, corpus, lex)
        assert report.interruption_rate == 0.0

    def test_threshold_range_checked(self):
        corpus, lex = corpus_with_crits([(0.9, True)])
        with pytest.raises(ValueError):
            evaluate(1.5, corpus, lex)


_crit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
_pairs = st.lists(st.tuples(_crit, st.booleans()), min_size=1, max_size=60)
_conf = st.sampled_from([0.5, 0.8, 0.9, 0.95, 1.0])


class TestTunerLaws:

    @given(_pairs, _conf)
    @settings(max_examples=200)
    def test_tune_equals_oracle(self, pairs, conf):
        corpus, lex = corpus_with_crits(pairs)
        if not any(label for _, label in pairs):
            return
        fast = tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=conf))
        slow = tune_oracle(corpus, lex, EngineConfig(), ThresholdConfig(conf=conf))
        assert fast == slow

    @given(_pairs, _conf)
    @settings(max_examples=200)
    def test_coverage_guarantee(self, pairs, conf):
        if not any(label for _, label in pairs):
            return
        corpus, lex = corpus_with_crits(pairs)
        report = tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=conf))
        check = evaluate(report.threshold, corpus, lex)
        assert check.coverage >= conf or report.threshold == 0.0
        # the >= comparator makes t=0 gate everything, so coverage is 1 there
        if report.threshold == 0.0:
            assert check.coverage == 1.0

    @given(_pairs)
    @settings(max_examples=200)
    def test_monotone_in_conf(self, pairs):
        if not any(label for _, label in pairs):
            return
        corpus, lex = corpus_with_crits(pairs)
        thresholds = [
            tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=c)).threshold
            for c in (0.5, 0.8, 0.9, 0.95, 1.0)
        ]
        assert all(a >= b for a, b in zip(thresholds, thresholds[1:]))

    @given(_pairs, _conf)
    @settings(max_examples=200)
    def test_threshold_from_candidate_set(self, pairs, conf):
        if not any(label for _, label in pairs):
            return
        corpus, lex = corpus_with_crits(pairs)
        report = tune(corpus, lex, EngineConfig(), ThresholdConfig(conf=conf))
        positives = {c for c, label in pairs if label}
        assert report.threshold in positives | {0.0, 1.0}
