"""Evaluation harness: run datasets, store judgments, build reports.

Grading is human judgment, not token overlap: a produced answer is correct
when the judge marks it both answerable and complete.  Accuracy math uses
decimal arithmetic with half-up rounding to two places, and every percent
travels with its raw counts, because rounded percentages alone cannot be
audited (and published ones do not always reconcile with their stated
denominators).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .errors import (
    EmptySelection,
    MissingMode,
    NoFailures,
    StageError,
    UnknownPairId,
    ValidationError,
)
from .prompts import QaMode

log = logging.getLogger(__name__)

TWO_PLACES = Decimal("0.01")
MODE_ORDER = [QaMode.AGNOSTIC.value, QaMode.RULEBOOK.value, QaMode.RULEBOOK_KG.value]

ERROR_CATEGORIES = ("ambiguity", "complex_question", "wrong_context", "other")
NO_ERROR = "none"
FINAL_JUDGE = "final"


@dataclass
class GoldPair:
    pair_id: str
    question: str
    gold_answer: str
    requires_table: bool = False
    requires_external: bool = False
    tags: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not self.pair_id:
            raise ValidationError("pair_id must be non-empty")
        if not self.question or not self.gold_answer:
            raise ValidationError(f"pair {self.pair_id}: question and gold_answer required")

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "requires_table": self.requires_table,
            "requires_external": self.requires_external,
            "tags": self.tags,
        }

    @classmethod
    def from_json(cls, row: dict) -> "GoldPair":
        return cls(
            pair_id=row["pair_id"],
            question=row["question"],
            gold_answer=row["gold_answer"],
            requires_table=bool(row.get("requires_table", False)),
            requires_external=bool(row.get("requires_external", False)),
            tags=list(row.get("tags", [])),
        )


def load_dataset(path: str | Path) -> list[GoldPair]:
    pairs = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            pair = GoldPair.from_json(json.loads(line))
            pair.validate()
            if pair.pair_id in seen:
                raise ValidationError(f"duplicate pair_id {pair.pair_id!r} in dataset")
            seen.add(pair.pair_id)
            pairs.append(pair)
    return pairs


def save_dataset(pairs: list[GoldPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_json(), ensure_ascii=False) + "\n")


@dataclass
class Judgment:
    pair_id: str
    mode: str
    answerable: bool
    complete: bool
    correct: bool
    error_category: str
    judge_id: str
    # copied from the dataset when the judgment file is written, so the
    # report stays a pure function of that one file
    requires_table: bool = False
    requires_external: bool = False

    def validate(self) -> None:
        QaMode.parse(self.mode)
        if self.correct != (self.answerable and self.complete):
            raise ValidationError(
                f"judgment {self.pair_id}/{self.mode}: correct must equal "
                "answerable AND complete"
            )
        if self.correct != (self.error_category == NO_ERROR):
            raise ValidationError(
                f"judgment {self.pair_id}/{self.mode}: error_category must be "
                f"'{NO_ERROR}' exactly when correct"
            )
        if not self.correct and self.error_category not in ERROR_CATEGORIES:
            raise ValidationError(
                f"judgment {self.pair_id}/{self.mode}: unknown category "
                f"{self.error_category!r}"
            )
        if self.error_category == "wrong_context" and self.mode == QaMode.AGNOSTIC.value:
            raise ValidationError(
                f"judgment {self.pair_id}: wrong_context is not valid for agnostic mode"
            )
        if not self.judge_id:
            raise ValidationError(f"judgment {self.pair_id}/{self.mode}: judge_id required")

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, row: dict) -> "Judgment":
        return cls(
            pair_id=row["pair_id"],
            mode=row["mode"],
            answerable=bool(row["answerable"]),
            complete=bool(row["complete"]),
            correct=bool(row["correct"]),
            error_category=row["error_category"],
            judge_id=row["judge_id"],
            requires_table=bool(row.get("requires_table", False)),
            requires_external=bool(row.get("requires_external", False)),
        )


def load_judgments(path: str | Path) -> list[Judgment]:
    judgments = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            judgment = Judgment.from_json(json.loads(line))
            judgment.validate()
            judgments.append(judgment)
    return judgments


def save_judgments(judgments: list[Judgment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for judgment in judgments:
            fh.write(json.dumps(judgment.to_json(), ensure_ascii=False) + "\n")


# --- running datasets through the pipeline ---


def run_eval(
    engine,
    dataset: list[GoldPair],
    modes: list[QaMode],
    backend,
    k: int | None = None,
) -> list[dict]:
    """One transcript record per (pair, mode); failures embed, never abort."""
    records = []
    for pair in dataset:
        for mode in modes:
            record = {
                "pair_id": pair.pair_id,
                "question": pair.question,
                "gold_answer": pair.gold_answer,
                "mode": mode.value,
                "requires_table": pair.requires_table,
                "requires_external": pair.requires_external,
            }
            try:
                result = engine.answer_question(pair.question, mode, backend, k=k)
                record.update(
                    {
                        "answer": result.answer,
                        "prompt_hash": result.prompt_hash,
                        "hits": [h.to_json() for h in result.hits],
                        "facts": [f.to_json() for f in result.facts],
                    }
                )
            except StageError as exc:
                log.warning("pair %s mode %s failed at %s: %s",
                            pair.pair_id, mode.value, exc.stage, exc.cause)
                record["error"] = {
                    "stage": exc.stage,
                    "type": type(exc.cause).__name__,
                    "message": str(exc.cause),
                }
            records.append(record)
    return records


def save_transcript(records: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_transcript(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def merge_judgments(transcript: list[dict], rows: list[dict]) -> list[Judgment]:
    """Validate raw judgment rows against a transcript and stamp subset flags."""
    by_key = {(r["pair_id"], r["mode"]): r for r in transcript}
    judgments = []
    for row in rows:
        key = (row.get("pair_id"), row.get("mode"))
        record = by_key.get(key)
        if record is None:
            raise UnknownPairId(f"{key[0]}/{key[1]} not present in transcript")
        judgment = Judgment.from_json(
            {
                **row,
                "requires_table": record["requires_table"],
                "requires_external": record["requires_external"],
            }
        )
        judgment.validate()
        judgments.append(judgment)
    return judgments


# --- accuracy arithmetic ---


def compute_accuracy(correct: int, total: int) -> Decimal:
    """100 * correct / total, half-up to two decimals."""
    if total <= 0:
        raise EmptySelection("accuracy over zero items")
    if not 0 <= correct <= total:
        raise ValidationError(f"correct={correct} outside 0..{total}")
    return (Decimal(100) * Decimal(correct) / Decimal(total)).quantize(
        TWO_PLACES, rounding=ROUND_HALF_UP
    )


def compute_delta(percent_a, percent_b) -> Decimal:
    """Percentage-point difference a - b, two decimals."""
    return (Decimal(str(percent_a)) - Decimal(str(percent_b))).quantize(
        TWO_PLACES, rounding=ROUND_HALF_UP
    )


@dataclass
class ReportedCheck:
    computed: Decimal
    reported: Decimal
    matches: bool


def verify_reported_percent(correct: int, total: int, reported) -> ReportedCheck:
    """Check a published percentage against its own counts.

    Useful because rounded percentages in print sometimes disagree with
    their stated numerator/denominator; the check makes that visible
    instead of propagating either number silently.
    """
    computed = compute_accuracy(correct, total)
    reported_dec = Decimal(str(reported)).quantize(TWO_PLACES, rounding=ROUND_HALF_UP)
    return ReportedCheck(
        computed=computed, reported=reported_dec, matches=computed == reported_dec
    )


@dataclass
class AccuracyStat:
    numerator: int
    denominator: int
    percent: Decimal


def accuracy_over(
    judgments: list[Judgment], mode: str, subset: str | None = None
) -> AccuracyStat:
    """Accuracy for one mode, optionally restricted to a subset flag.

    subset: None, "requires_table", or "requires_external".
    """
    selected = [j for j in judgments if j.mode == mode]
    if subset is not None:
        selected = [j for j in selected if getattr(j, subset)]
    if not selected:
        raise EmptySelection(f"no judgments for mode={mode} subset={subset}")
    correct = sum(1 for j in selected if j.correct)
    return AccuracyStat(
        numerator=correct,
        denominator=len(selected),
        percent=compute_accuracy(correct, len(selected)),
    )


@dataclass
class CategoryStat:
    count: int
    percent: Decimal


def error_distribution(judgments: list[Judgment], mode: str) -> dict[str, CategoryStat]:
    """Category mix among this mode's incorrect answers; sums to ~100."""
    failures = [j for j in judgments if j.mode == mode and not j.correct]
    if not failures:
        raise NoFailures(f"no incorrect judgments for mode {mode}")
    dist = {}
    for category in ERROR_CATEGORIES:
        count = sum(1 for j in failures if j.error_category == category)
        dist[category] = CategoryStat(
            count=count, percent=compute_accuracy(count, len(failures))
        )
    return dist


# --- the comparative report ---


@dataclass
class Report:
    modes: list[str]
    baseline: str
    accuracy: dict[str, AccuracyStat]
    deltas: dict[str, Decimal]  # mode -> accuracy(mode) - accuracy(baseline)
    table_subset: dict[str, AccuracyStat]
    external_subset: dict[str, AccuracyStat]
    error_dist: dict[str, dict[str, CategoryStat]]
    judge_ids: list[str]
    judge_agreement: "AccuracyStat | None"
    judged_by: str  # which rows fed the numbers: "final" or "all"


def delta_between(report: Report, mode_a: str, mode_b: str) -> Decimal:
    for mode in (mode_a, mode_b):
        if mode not in report.accuracy:
            raise MissingMode(mode)
    return compute_delta(
        report.accuracy[mode_a].percent, report.accuracy[mode_b].percent
    )


def _agreement(judgments: list[Judgment]) -> tuple[list[str], "AccuracyStat | None"]:
    judge_ids = sorted({j.judge_id for j in judgments if j.judge_id != FINAL_JUDGE})
    if len(judge_ids) != 2:
        return judge_ids, None
    a, b = judge_ids
    verdicts_a = {(j.pair_id, j.mode): j.correct for j in judgments if j.judge_id == a}
    verdicts_b = {(j.pair_id, j.mode): j.correct for j in judgments if j.judge_id == b}
    shared = sorted(set(verdicts_a) & set(verdicts_b))
    if not shared:
        return judge_ids, None
    same = sum(1 for key in shared if verdicts_a[key] == verdicts_b[key])
    return judge_ids, AccuracyStat(
        numerator=same, denominator=len(shared), percent=compute_accuracy(same, len(shared))
    )


def build_report(judgments: list[Judgment]) -> Report:
    """Pure function of the judgment rows; no other inputs consulted.

    When adjudicated rows (judge_id "final") exist they carry the numbers;
    otherwise all rows do.  Inter-judge agreement is reported whenever
    exactly two non-final judges share judged items.
    """
    if not judgments:
        raise EmptySelection("no judgments to report on")
    judge_ids, agreement = _agreement(judgments)
    has_final = any(j.judge_id == FINAL_JUDGE for j in judgments)
    scored = [j for j in judgments if j.judge_id == FINAL_JUDGE] if has_final else judgments

    modes = [m for m in MODE_ORDER if any(j.mode == m for j in scored)]
    accuracy = {mode: accuracy_over(scored, mode) for mode in modes}
    baseline = modes[0]
    deltas = {
        mode: compute_delta(accuracy[mode].percent, accuracy[baseline].percent)
        for mode in modes
        if mode != baseline
    }

    def subset_stats(flag: str) -> dict[str, AccuracyStat]:
        if not any(getattr(j, flag) for j in scored):
            return {}
        stats = {}
        for mode in modes:
            try:
                stats[mode] = accuracy_over(scored, mode, subset=flag)
            except EmptySelection:
                continue
        return stats

    error_dist = {}
    for mode in modes:
        try:
            error_dist[mode] = error_distribution(scored, mode)
        except NoFailures:
            continue

    return Report(
        modes=modes,
        baseline=baseline,
        accuracy=accuracy,
        deltas=deltas,
        table_subset=subset_stats("requires_table"),
        external_subset=subset_stats("requires_external"),
        error_dist=error_dist,
        judge_ids=judge_ids,
        judge_agreement=agreement,
        judged_by=FINAL_JUDGE if has_final else "all",
    )


def gold_pairs_from_synth(pairs, table_chunk_ids: set[str] | None = None) -> list[GoldPair]:
    """Turn accepted synthesized pairs into a gold dataset."""
    table_chunk_ids = table_chunk_ids or set()
    gold = []
    for pair in pairs:
        if pair.status != "accepted":
            continue
        gold.append(
            GoldPair(
                pair_id=pair.pair_id,
                question=pair.question,
                gold_answer=pair.answer,
                requires_table=pair.chunk_id in table_chunk_ids,
                requires_external=bool(pair.facts),
                tags=["synthesized"],
            )
        )
    return gold
