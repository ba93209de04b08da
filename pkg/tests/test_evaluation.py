"""Accuracy arithmetic, judgment validation, transcripts, and the report."""

from __future__ import annotations

import random
from decimal import Decimal

import pytest

from policyqa.errors import (
    EmptySelection,
    MissingMode,
    NoFailures,
    UnknownPairId,
    ValidationError,
)
from policyqa.evaluation import (
    MODE_ORDER,
    NO_ERROR,
    GoldPair,
    Judgment,
    accuracy_over,
    build_report,
    compute_accuracy,
    compute_delta,
    delta_between,
    error_distribution,
    gold_pairs_from_synth,
    load_dataset,
    load_judgments,
    load_transcript,
    merge_judgments,
    run_eval,
    save_dataset,
    save_judgments,
    save_transcript,
    verify_reported_percent,
)
from policyqa.gateway import EchoBackend
from policyqa.kg import KgFact
from policyqa.pipeline import QaEngine
from policyqa.prompts import QaMode
from policyqa.synth import SynthPair

# ---------------------------------------------------------------------------
# accuracy arithmetic


def test_accuracy_known_values():
    assert compute_accuracy(16, 20) == Decimal("80.00")
    assert compute_accuracy(10, 104) == Decimal("9.62")
    assert compute_accuracy(0, 7) == Decimal("0.00")
    assert compute_accuracy(7, 7) == Decimal("100.00")
    assert compute_accuracy(1, 3) == Decimal("33.33")
    assert compute_accuracy(2, 3) == Decimal("66.67")


def test_accuracy_rounds_halves_up_not_to_even():
    assert compute_accuracy(1, 800) == Decimal("0.13")  # 0.125 exactly
    assert compute_accuracy(3, 800) == Decimal("0.38")  # 0.375 exactly


def test_accuracy_rejects_degenerate_counts():
    with pytest.raises(EmptySelection):
        compute_accuracy(0, 0)
    with pytest.raises(ValidationError):
        compute_accuracy(5, 4)
    with pytest.raises(ValidationError):
        compute_accuracy(-1, 4)


def test_delta_known_values():
    assert compute_delta("65.40", "9.60") == Decimal("55.80")
    assert compute_delta("83.13", "25.30") == Decimal("57.83")
    assert compute_delta("42.00", "42.00") == Decimal("0.00")
    assert compute_delta("9.60", "65.40") == Decimal("-55.80")


def test_published_percent_check_flags_rounding_mismatches():
    check = verify_reported_percent(10, 104, "9.60")
    assert check.computed == Decimal("9.62")
    assert check.reported == Decimal("9.60")
    assert not check.matches

    agreeing = verify_reported_percent(16, 20, 80)
    assert agreeing.matches
    assert agreeing.computed == agreeing.reported == Decimal("80.00")


# ---------------------------------------------------------------------------
# judgments


def make_judgment(
    pair_id,
    mode,
    correct,
    category=None,
    judge="j1",
    requires_table=False,
    requires_external=False,
):
    return Judgment(
        pair_id=pair_id,
        mode=mode,
        answerable=correct,
        complete=correct,
        correct=correct,
        error_category=NO_ERROR if correct else (category or "other"),
        judge_id=judge,
        requires_table=requires_table,
        requires_external=requires_external,
    )


def test_judgment_accepts_consistent_rows():
    make_judgment("p1", "rulebook", True).validate()
    make_judgment("p1", "rulebook", False, category="wrong_context").validate()


@pytest.mark.parametrize(
    "overrides",
    [
        {"answerable": True, "complete": False, "correct": True},
        {"correct": True, "error_category": "ambiguity"},
        {"answerable": False, "complete": False, "correct": False, "error_category": NO_ERROR},
        {"answerable": False, "complete": False, "correct": False, "error_category": "bogus"},
        {"judge_id": ""},
        {"mode": "direct"},
    ],
)
def test_judgment_rejects_inconsistent_rows(overrides):
    row = {
        "pair_id": "p1",
        "mode": "rulebook",
        "answerable": True,
        "complete": True,
        "correct": True,
        "error_category": NO_ERROR,
        "judge_id": "j1",
    }
    row.update(overrides)
    with pytest.raises((ValidationError, ValueError)):
        Judgment(**row).validate()


def test_wrong_context_is_invalid_without_retrieval():
    judgment = make_judgment("p1", "agnostic", False, category="wrong_context")
    with pytest.raises(ValidationError):
        judgment.validate()


def test_judgments_round_trip_through_jsonl(tmp_path):
    judgments = [
        make_judgment("p1", "agnostic", True, requires_table=True),
        make_judgment("p2", "rulebook_kg", False, category="ambiguity", judge="j2"),
    ]
    path = tmp_path / "judgments.jsonl"
    save_judgments(judgments, path)
    assert load_judgments(path) == judgments


# ---------------------------------------------------------------------------
# datasets and transcripts


def _dataset():
    return [
        GoldPair(
            pair_id="radiation",
            question="How much is the radiation treatment benefit payment?",
            gold_answer="Ten times the daily amount.",
        ),
        GoldPair(
            pair_id="surgery-table",
            question="Which surgeries pay the female specific surgery benefit?",
            gold_answer="Surgery involving the breast or uterus.",
            requires_table=True,
            requires_external=True,
        ),
    ]


def test_dataset_round_trip_and_duplicate_rejection(tmp_path):
    path = tmp_path / "gold.jsonl"
    save_dataset(_dataset(), path)
    assert load_dataset(path) == _dataset()

    doubled = _dataset() + [_dataset()[0]]
    save_dataset(doubled, path)
    with pytest.raises(ValidationError):
        load_dataset(path)


def test_dataset_rows_must_have_question_and_answer(tmp_path):
    path = tmp_path / "gold.jsonl"
    save_dataset([GoldPair(pair_id="p", question="q?", gold_answer="")], path)
    with pytest.raises(ValidationError):
        load_dataset(path)


def test_run_eval_produces_one_record_per_pair_and_mode(engine):
    modes = [QaMode.AGNOSTIC, QaMode.RULEBOOK, QaMode.RULEBOOK_KG]
    records = run_eval(engine, _dataset(), modes, EchoBackend())
    assert len(records) == len(_dataset()) * len(modes)
    assert [(r["pair_id"], r["mode"]) for r in records] == [
        (pair.pair_id, mode.value) for pair in _dataset() for mode in modes
    ]
    for record in records:
        assert record["answer"] == record["question"]  # echo backend
        assert record["prompt_hash"]
        assert "error" not in record
    flagged = [r for r in records if r["pair_id"] == "surgery-table"]
    assert all(r["requires_table"] and r["requires_external"] for r in flagged)


def test_run_eval_embeds_failures_as_records():
    bare = QaEngine()  # nothing indexed: retrieval must fail
    records = run_eval(bare, _dataset(), [QaMode.RULEBOOK], EchoBackend())
    assert len(records) == len(_dataset())
    for record in records:
        assert "answer" not in record
        assert record["error"]["stage"] == "retrieval"
        assert record["error"]["type"] == "EmptyIndex"


def test_transcript_round_trip(tmp_path, engine):
    records = run_eval(engine, _dataset(), [QaMode.RULEBOOK], EchoBackend())
    path = tmp_path / "transcript.jsonl"
    save_transcript(records, path)
    assert load_transcript(path) == records


def test_merge_judgments_stamps_subset_flags(engine):
    transcript = run_eval(engine, _dataset(), [QaMode.RULEBOOK], EchoBackend())
    rows = [
        {
            "pair_id": "surgery-table",
            "mode": "rulebook",
            "answerable": True,
            "complete": True,
            "correct": True,
            "error_category": NO_ERROR,
            "judge_id": "j1",
        }
    ]
    merged = merge_judgments(transcript, rows)
    assert merged[0].requires_table is True
    assert merged[0].requires_external is True

    with pytest.raises(UnknownPairId):
        merge_judgments(transcript, [{**rows[0], "mode": "agnostic"}])
    with pytest.raises(ValidationError):
        merge_judgments(transcript, [{**rows[0], "complete": False}])


# ---------------------------------------------------------------------------
# aggregation


def test_accuracy_over_matches_a_hand_tally():
    rng = random.Random(23)
    judgments = []
    for i in range(120):
        judgments.append(
            make_judgment(
                f"p{i}",
                rng.choice(MODE_ORDER),
                rng.random() < 0.6,
                category=rng.choice(["ambiguity", "complex_question", "other"]),
                requires_table=rng.random() < 0.3,
                requires_external=rng.random() < 0.3,
            )
        )
    for mode in MODE_ORDER:
        for subset in (None, "requires_table", "requires_external"):
            selected = [
                j
                for j in judgments
                if j.mode == mode and (subset is None or getattr(j, subset))
            ]
            if not selected:
                with pytest.raises(EmptySelection):
                    accuracy_over(judgments, mode, subset=subset)
                continue
            stat = accuracy_over(judgments, mode, subset=subset)
            assert stat.denominator == len(selected)
            assert stat.numerator == sum(1 for j in selected if j.correct)
            assert stat.percent == compute_accuracy(stat.numerator, stat.denominator)


def test_error_distribution_counts_every_category():
    judgments = (
        [make_judgment(f"a{i}", "rulebook", False, category="ambiguity") for i in range(3)]
        + [make_judgment(f"c{i}", "rulebook", False, category="complex_question") for i in range(2)]
        + [make_judgment("w0", "rulebook", False, category="wrong_context")]
        + [make_judgment(f"ok{i}", "rulebook", True) for i in range(4)]
    )
    dist = error_distribution(judgments, "rulebook")
    assert {name: stat.count for name, stat in dist.items()} == {
        "ambiguity": 3,
        "complex_question": 2,
        "wrong_context": 1,
        "other": 0,
    }
    assert dist["ambiguity"].percent == Decimal("50.00")
    assert sum(stat.percent for stat in dist.values()) == Decimal("100.00")

    with pytest.raises(NoFailures):
        error_distribution(judgments, "agnostic")


# ---------------------------------------------------------------------------
# the report


def test_report_prefers_adjudicated_rows_and_scores_agreement():
    rows = []
    for i in range(4):
        rows.append(make_judgment(f"p{i}", "agnostic", False, judge="alice"))
        rows.append(make_judgment(f"p{i}", "agnostic", i < 2, judge="bob"))
        rows.append(make_judgment(f"p{i}", "agnostic", i == 0, judge="final"))
    report = build_report(rows)
    assert report.judged_by == "final"
    assert report.judge_ids == ["alice", "bob"]
    assert report.accuracy["agnostic"].numerator == 1
    assert report.accuracy["agnostic"].denominator == 4
    # alice and bob agree on p2 and p3 only
    assert report.judge_agreement.numerator == 2
    assert report.judge_agreement.denominator == 4
    assert report.judge_agreement.percent == Decimal("50.00")


def test_report_uses_all_rows_when_nothing_is_adjudicated():
    rows = [make_judgment(f"p{i}", "agnostic", i < 3, judge="solo") for i in range(5)]
    report = build_report(rows)
    assert report.judged_by == "all"
    assert report.judge_ids == ["solo"]
    assert report.judge_agreement is None
    assert report.accuracy["agnostic"].percent == Decimal("60.00")


def test_baseline_is_the_first_mode_present_in_order():
    rows = [make_judgment(f"p{i}", "rulebook", i < 6, judge="j") for i in range(10)]
    rows += [make_judgment(f"p{i}", "rulebook_kg", i < 8, judge="j") for i in range(10)]
    report = build_report(rows)
    assert report.modes == ["rulebook", "rulebook_kg"]
    assert report.baseline == "rulebook"
    assert report.deltas == {"rulebook_kg": Decimal("20.00")}
    assert delta_between(report, "rulebook_kg", "rulebook") == Decimal("20.00")
    with pytest.raises(MissingMode):
        delta_between(report, "agnostic", "rulebook")


def test_subset_accuracies_count_only_flagged_items():
    rows = [
        make_judgment("p0", "agnostic", True, requires_table=True),
        make_judgment("p1", "agnostic", False, requires_table=True),
        make_judgment("p2", "agnostic", True),
        make_judgment("p3", "agnostic", False, requires_external=True),
    ]
    report = build_report(rows)
    assert report.table_subset["agnostic"].numerator == 1
    assert report.table_subset["agnostic"].denominator == 2
    assert report.external_subset["agnostic"].numerator == 0
    assert report.external_subset["agnostic"].denominator == 1
    assert report.accuracy["agnostic"].denominator == 4


def test_report_omits_sections_with_no_data():
    report = build_report([make_judgment("p0", "agnostic", True)])
    assert report.table_subset == {}
    assert report.external_subset == {}
    assert report.error_dist == {}
    with pytest.raises(EmptySelection):
        build_report([])


# ---------------------------------------------------------------------------
# synth handoff


def test_gold_pairs_come_only_from_accepted_synth_pairs():
    fact = KgFact(subject_label="Diabetes", predicate="abstract", object_text="...")
    pairs = [
        SynthPair(
            pair_id="t#0::0",
            chunk_id="t#0",
            question_raw="raw",
            question_adjusted="adj",
            question="What does the table cover?",
            answer="Breast and uterus surgery.",
            facts=[fact],
            status="accepted",
        ),
        SynthPair(
            pair_id="b#1::0",
            chunk_id="b#1",
            question_raw="raw",
            question_adjusted="raw",
            question="When are claims due?",
            answer="Within thirty days.",
            status="accepted",
        ),
        SynthPair(
            pair_id="b#2::0",
            chunk_id="b#2",
            question_raw="raw",
            question_adjusted="raw",
            question="Rejected question?",
            answer="n/a",
            status="rejected",
        ),
    ]
    gold = gold_pairs_from_synth(pairs, table_chunk_ids={"t#0"})
    assert [g.pair_id for g in gold] == ["t#0::0", "b#1::0"]
    assert gold[0].requires_table is True
    assert gold[0].requires_external is True
    assert gold[1].requires_table is False
    assert gold[1].requires_external is False
    assert gold[0].tags == ["synthesized"]
