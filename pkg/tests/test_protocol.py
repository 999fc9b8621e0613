"""Gate protocol tests: the permission state machine end to end."""

import itertools
import threading

import pytest

from critgate.bundled import seed_lexicon
from critgate.engine import EngineConfig
from critgate.errors import (
    AgentRetriesExhaustedError,
    EditsNotEffectiveError,
    EmptyLessonError,
    InvalidAttributionError,
    TaskBusyError,
    ThresholdNotEffectiveError,
    UnknownCaseError,
    UnknownFlagError,
    WrongStateError,
)
from critgate.lexicon import LexiconEdit, LexiconStore
from critgate.protocol import (
    CaseState,
    Dismissed,
    Gatekeeper,
    ModelImproved,
    ThresholdDecreased,
    replay_records,
    validate_transitions,
)

CAT_FRIDGE = "Put the cat into the fridge !"
DETERGENT = "Put detergent into the salad !"
OLIVE_OIL = "Put olive oil into the salad !"


def make_gatekeeper(threshold=0.7, sink=None, retry_cap=10):
    return Gatekeeper(LexiconStore(seed_lexicon()), threshold=threshold,
                      engine_config=EngineConfig(), agent_retry_cap=retry_cap,
                      sink=sink)


class TestSubmit:

    def test_below_threshold_auto_approves(self):
        gk = make_gatekeeper(threshold=0.7)
        case = gk.submit("task-1", CAT_FRIDGE)
        assert case.state is CaseState.AUTO_APPROVED
        assert case.breakdown.combined < 0.7
        assert case.threshold_at_scoring == 0.7

    def test_after_valuable_added_it_gates(self):
        gk = make_gatekeeper(threshold=0.7)
        gk.store.apply(LexiconEdit(kind="add_valuable", word="cat"))
        case = gk.submit("task-1", CAT_FRIDGE)
        assert case.state is CaseState.PENDING_PERMISSION
        assert case.breakdown.combined == 1.0

    def test_zero_threshold_gates_everything(self):
        gk = make_gatekeeper(threshold=0.0)
        case = gk.submit("task-1", "Wash the dishes !")
        assert case.state is CaseState.PENDING_PERMISSION

    def test_task_busy(self):
        gk = make_gatekeeper(threshold=0.0)
        gk.submit("task-1", "Wash the dishes !")
        with pytest.raises(TaskBusyError):
            gk.submit("task-1", "Wash the dishes !")
        # a different task is free to proceed
        gk.submit("task-2", "Wash the dishes !")

    def test_terminal_case_frees_task(self):
        gk = make_gatekeeper(threshold=0.7)
        gk.submit("task-1", "Wash the dishes !")  # auto-approved, terminal
        case = gk.submit("task-1", "Wash the cup !")
        assert case.case_id == "case-0002"

    def test_parse_error_becomes_abandoned_case(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", "the !")
        assert case.state is CaseState.ABANDONED
        assert case.breakdown is None
        assert "the !" in case.reason or "determiners" in case.reason
        # the task is not blocked afterwards
        gk.submit("task-1", "Wash the dishes !")


class TestDecide:

    def test_approve(self):
        gk = make_gatekeeper(threshold=0.0)
        case = gk.submit("task-1", "Wash the dishes !")
        out = gk.decide(case.case_id, "approve", "harriet")
        assert out.state is CaseState.APPROVED
        assert out.alternative_history == []

    def test_reject_opens_alternative_loop(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        assert case.state is CaseState.PENDING_PERMISSION
        out = gk.decide(case.case_id, "reject", "harriet")
        assert out.state is CaseState.AWAITING_ALTERNATIVE
        assert out.passed_through(CaseState.REJECTED)

    def test_decide_auto_approved_is_wrong_state(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", CAT_FRIDGE)
        with pytest.raises(WrongStateError):
            gk.decide(case.case_id, "approve", "harriet")

    def test_unknown_case(self):
        gk = make_gatekeeper()
        with pytest.raises(UnknownCaseError):
            gk.decide("case-9999", "approve", "harriet")

    def test_bad_verdict(self):
        gk = make_gatekeeper(threshold=0.0)
        case = gk.submit("task-1", "Wash the dishes !")
        with pytest.raises(ValueError):
            gk.decide(case.case_id, "maybe", "harriet")


class TestAlternatives:

    def _rejected_case(self, gk):
        case = gk.submit("task-1", DETERGENT)
        return gk.decide(case.case_id, "reject", "harriet")

    def test_agent_proposal_then_operator_approval(self):
        gk = make_gatekeeper()
        case = self._rejected_case(gk)
        gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)
        out = gk.decide_alternative(case.case_id, "approve", "harriet")
        assert out.state is CaseState.RESOLVED
        assert out.resolved_command == OLIVE_OIL

    def test_operator_proposal_resolves_immediately(self):
        gk = make_gatekeeper()
        case = self._rejected_case(gk)
        out = gk.propose_alternative(case.case_id, "operator", OLIVE_OIL)
        assert out.state is CaseState.RESOLVED
        assert out.alternative_history[-1].verdict == "approved"

    def test_rejected_proposal_keeps_waiting(self):
        gk = make_gatekeeper()
        case = self._rejected_case(gk)
        gk.propose_alternative(case.case_id, "agent", "Put vinegar into the salad !")
        out = gk.decide_alternative(case.case_id, "reject", "harriet")
        assert out.state is CaseState.AWAITING_ALTERNATIVE
        gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)
        assert len(gk.get_case(case.case_id).alternative_history) == 2

    def test_pending_proposal_blocks_another(self):
        gk = make_gatekeeper()
        case = self._rejected_case(gk)
        gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)
        with pytest.raises(WrongStateError):
            gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)

    def test_agent_retry_cap(self):
        gk = make_gatekeeper(retry_cap=2)
        case = self._rejected_case(gk)
        for _ in range(2):
            gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)
            gk.decide_alternative(case.case_id, "reject", "harriet")
        with pytest.raises(AgentRetriesExhaustedError):
            gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)
        # the operator can still resolve or abandon
        out = gk.propose_alternative(case.case_id, "operator", OLIVE_OIL)
        assert out.state is CaseState.RESOLVED

    def test_propose_on_pending_case_is_wrong_state(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        with pytest.raises(WrongStateError):
            gk.propose_alternative(case.case_id, "agent", OLIVE_OIL)

    def test_decide_alternative_without_proposal(self):
        gk = make_gatekeeper()
        case = self._rejected_case(gk)
        with pytest.raises(WrongStateError):
            gk.decide_alternative(case.case_id, "approve", "harriet")

    def test_abandon(self):
        gk = make_gatekeeper()
        case = self._rejected_case(gk)
        out = gk.abandon(case.case_id, "harriet", reason="no safe option")
        assert out.state is CaseState.ABANDONED
        # task freed
        gk.submit("task-1", "Wash the dishes !")


class TestLessons:

    def test_lesson_stored_verbatim(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        gk.decide(case.case_id, "reject", "harriet")
        text = "Don’t put detergent into food."
        lesson = gk.record_lesson(case.case_id, text)
        assert lesson.text == text
        assert gk.get_case(case.case_id).lesson == text

    def test_empty_lesson(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        gk.decide(case.case_id, "reject", "harriet")
        with pytest.raises(EmptyLessonError):
            gk.record_lesson(case.case_id, "   ")

    def test_two_lessons_ordered(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        gk.decide(case.case_id, "reject", "harriet")
        gk.record_lesson(case.case_id, "first")
        gk.record_lesson(case.case_id, "second")
        texts = [l.text for l in gk.lessons_for_case(case.case_id)]
        assert texts == ["first", "second"]
        assert gk.lessons_for_task("task-1") == gk.lessons_for_case(case.case_id)

    def test_lesson_requires_rejection_lineage(self):
        gk = make_gatekeeper(threshold=0.0)
        case = gk.submit("task-1", "Wash the dishes !")
        gk.decide(case.case_id, "approve", "harriet")
        with pytest.raises(WrongStateError):
            gk.record_lesson(case.case_id, "nothing happened")

    def test_lesson_after_resolution_ok(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        gk.decide(case.case_id, "reject", "harriet")
        gk.propose_alternative(case.case_id, "operator", OLIVE_OIL)
        lesson = gk.record_lesson(case.case_id, "late lesson")
        assert lesson.case_id == case.case_id


class TestFlags:

    def _auto_approved(self, gk):
        return gk.submit("task-1", CAT_FRIDGE)

    def test_flag_offers_context(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        assert flag.breakdown == case.breakdown
        assert flag.threshold_at_scoring == 0.7
        assert set(flag.candidate_words) == {"put", "cat", "fridge"}

    def test_flag_pending_case_is_wrong_state(self):
        gk = make_gatekeeper(threshold=0.0)
        case = gk.submit("task-1", "Wash the dishes !")
        with pytest.raises(WrongStateError):
            gk.flag_missed_critical(case.case_id, "harriet")

    def test_double_flag_idempotent(self):
        gk = make_gatekeeper()
        case = self._auto_approved(gk)
        first = gk.flag_missed_critical(case.case_id, "harriet")
        second = gk.flag_missed_critical(case.case_id, "harriet")
        assert first.flag_id == second.flag_id

    def test_model_improved_cat_fridge(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        out = gk.resolve_flag(flag.flag_id, ModelImproved(
            attribution=frozenset({"cat", "fridge"}),
            edits=(LexiconEdit(kind="add_valuable", word="cat", author="harriet"),),
        ))
        assert out.resolution["new_criticality"] == 1.0
        # re-submission now gates
        again = gk.submit("task-1", CAT_FRIDGE)
        assert again.state is CaseState.PENDING_PERMISSION

    def test_threshold_decrease_effective(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)  # crit 0.2
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        gk.resolve_flag(flag.flag_id, ThresholdDecreased(new_value=0.2))
        assert gk.threshold == 0.2
        again = gk.submit("task-1", CAT_FRIDGE)
        assert again.state is CaseState.PENDING_PERMISSION

    def test_threshold_decrease_not_effective(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)  # crit 0.2
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        with pytest.raises(ThresholdNotEffectiveError):
            gk.resolve_flag(flag.flag_id, ThresholdDecreased(new_value=0.6))
        assert gk.threshold == 0.7  # untouched

    def test_threshold_equal_to_crit_gates_by_comparator(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)
        crit = case.breakdown.combined
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        gk.resolve_flag(flag.flag_id, ThresholdDecreased(new_value=crit))
        again = gk.submit("task-1", CAT_FRIDGE)
        assert again.state is CaseState.PENDING_PERMISSION

    def test_invalid_attribution(self):
        gk = make_gatekeeper()
        case = self._auto_approved(gk)
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        with pytest.raises(InvalidAttributionError):
            gk.resolve_flag(flag.flag_id, ModelImproved(
                attribution=frozenset({"banana"}),
                edits=(LexiconEdit(kind="add_valuable", word="cat"),)))
        with pytest.raises(InvalidAttributionError):
            gk.resolve_flag(flag.flag_id, ModelImproved(
                attribution=frozenset(), edits=()))

    def test_ineffective_edits_rejected_without_side_effects(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        version_before = gk.store.snapshot.version
        with pytest.raises(EditsNotEffectiveError):
            gk.resolve_flag(flag.flag_id, ModelImproved(
                attribution=frozenset({"fridge"}),
                edits=(LexiconEdit(kind="set_object_danger", word="fridge",
                                   score=0.3),)))
        assert gk.store.snapshot.version == version_before
        assert gk.get_flag(flag.flag_id).open

    def test_dismiss_changes_nothing(self):
        gk = make_gatekeeper(threshold=0.7)
        case = self._auto_approved(gk)
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        gk.resolve_flag(flag.flag_id, Dismissed())
        assert gk.threshold == 0.7
        again = gk.submit("task-1", CAT_FRIDGE)
        assert again.state is CaseState.AUTO_APPROVED

    def test_flag_resolved_twice_is_wrong_state(self):
        gk = make_gatekeeper()
        case = self._auto_approved(gk)
        flag = gk.flag_missed_critical(case.case_id, "harriet")
        gk.resolve_flag(flag.flag_id, Dismissed())
        with pytest.raises(WrongStateError):
            gk.resolve_flag(flag.flag_id, Dismissed())

    def test_unknown_flag(self):
        gk = make_gatekeeper()
        with pytest.raises(UnknownFlagError):
            gk.resolve_flag("flag-0404", Dismissed())

    def test_reflag_after_dismissal_opens_new_flag(self):
        gk = make_gatekeeper()
        case = self._auto_approved(gk)
        first = gk.flag_missed_critical(case.case_id, "harriet")
        gk.resolve_flag(first.flag_id, Dismissed())
        second = gk.flag_missed_critical(case.case_id, "harriet")
        assert second.flag_id != first.flag_id


class TestInvariants:

    def test_safety_invariant_no_silent_approval(self):
        """Nothing at or above its scoring threshold terminates approved
        without an operator verdict in the transition log."""
        gk = make_gatekeeper(threshold=0.5)
        commands = [CAT_FRIDGE, DETERGENT, "Wash the dishes !", "Burn the cat !",
                    "Smash the laptop with the hammer !", "Give me my shirt !"]
        for i, command in enumerate(commands):
            case = gk.submit(f"task-{i}", command)
            if case.state is CaseState.PENDING_PERMISSION:
                gk.decide(case.case_id, "approve", "harriet")
        for case in gk.list_cases():
            if case.breakdown.combined >= case.threshold_at_scoring:
                assert case.passed_through(CaseState.PENDING_PERMISSION)
                decided = [t for t in case.transitions
                           if t.to in ("approved", "rejected")]
                assert decided, "operator verdict missing"

    def test_every_nonterminal_case_has_enabled_transition(self):
        gk = make_gatekeeper()
        case = gk.submit("task-1", DETERGENT)
        assert case.state is CaseState.PENDING_PERMISSION  # decide enabled
        gk.decide(case.case_id, "reject", "harriet")
        assert case.state is CaseState.AWAITING_ALTERNATIVE  # propose enabled

    def test_transition_logs_validate(self):
        gk = make_gatekeeper()
        c1 = gk.submit("task-1", DETERGENT)
        gk.decide(c1.case_id, "reject", "h")
        gk.propose_alternative(c1.case_id, "agent", OLIVE_OIL)
        gk.decide_alternative(c1.case_id, "approve", "h")
        c2 = gk.submit("task-2", CAT_FRIDGE)
        c3 = gk.submit("task-3", "the !")
        for case in (c1, c2, c3):
            validate_transitions(case)

    def test_audit_replay_reconstructs_state(self):
        records = []
        gk = make_gatekeeper(sink=records.append)
        c1 = gk.submit("task-1", DETERGENT)
        gk.decide(c1.case_id, "reject", "h")
        gk.record_lesson(c1.case_id, "Don’t put detergent into food.")
        gk.propose_alternative(c1.case_id, "agent", OLIVE_OIL)
        gk.decide_alternative(c1.case_id, "approve", "h")
        c2 = gk.submit("task-2", CAT_FRIDGE)
        flag = gk.flag_missed_critical(c2.case_id, "h")
        gk.resolve_flag(flag.flag_id, ModelImproved(
            attribution=frozenset({"cat"}),
            edits=(LexiconEdit(kind="add_valuable", word="cat"),)))

        cases, flags, lessons = replay_records(records)
        assert {c.case_id: c.to_record() for c in cases} == \
               {c.case_id: c.to_record() for c in gk.list_cases()}
        assert [f.to_record() for f in flags] == \
               [f.to_record() for f in gk.flags.values()]
        assert [l.to_record() for l in lessons] == \
               [l.to_record() for l in gk.lessons]

    def test_adopt_restores_counters_and_task_index(self):
        records = []
        gk = make_gatekeeper(sink=records.append)
        c1 = gk.submit("task-1", DETERGENT)  # pending, non-terminal
        gk.submit("task-2", CAT_FRIDGE)

        fresh = make_gatekeeper()
        fresh.adopt(*replay_records(records))
        with pytest.raises(TaskBusyError):
            fresh.submit("task-1", "Wash the dishes !")
        case = fresh.submit("task-3", "Wash the dishes !")
        assert case.case_id == "case-0003"
        assert fresh.get_case(c1.case_id).state is CaseState.PENDING_PERMISSION

    def test_concurrent_decides_single_winner(self):
        gk = make_gatekeeper(threshold=0.0)
        case = gk.submit("task-1", "Wash the dishes !")
        outcomes = []

        def worker(verdict):
            try:
                gk.decide(case.case_id, verdict, "op")
                outcomes.append(verdict)
            except WrongStateError:
                pass

        threads = [threading.Thread(target=worker, args=(v,))
                   for v in itertools.islice(itertools.cycle(["approve", "reject"]), 8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(outcomes) == 1

    def test_concurrent_submits_one_per_task(self):
        gk = make_gatekeeper(threshold=0.0)
        wins = []

        def worker():
            try:
                gk.submit("task-1", "Wash the dishes !")
                wins.append(1)
            except TaskBusyError:
                pass

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(wins) == 1


class TestJournalFile:

    def test_journal_written_and_replayable(self, tmp_path):
        from critgate.protocol import read_case_journal
        journal = tmp_path / "cases.jsonl"
        gk = Gatekeeper(LexiconStore(seed_lexicon()), threshold=0.7,
                        journal_path=journal)
        case = gk.submit("task-1", DETERGENT)
        gk.decide(case.case_id, "reject", "h")
        gk.propose_alternative(case.case_id, "operator", OLIVE_OIL)
        cases, _, _ = replay_records(read_case_journal(journal))
        assert cases[0].to_record() == gk.get_case(case.case_id).to_record()
