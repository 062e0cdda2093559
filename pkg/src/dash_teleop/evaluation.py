"""DASH-30 task taxonomy, trial ingestion, and success aggregation.

The 30-task registry (six categories, five repetitions per task, 150
repetitions per hand) ships as bundled data, together with a reference
trial log whose per-hand totals match the published results for the five
hand versions and the rigid baseline. The per-task split in that log is
synthetic; only the aggregates are meaningful.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ValidationError
from .hand_model import KNOWN_HAND_NAMES

REPS_PER_TASK = 5
TASK_COUNT = 30


class Category(Enum):
    HOLD = "Hold"
    PICK = "Pick"
    LEVER = "Lever"
    TWIST = "Twist"
    OPEN = "Open"
    PUT_IN_ON = "PutInOn"


CATEGORY_ORDER = (
    Category.HOLD,
    Category.PICK,
    Category.LEVER,
    Category.TWIST,
    Category.OPEN,
    Category.PUT_IN_ON,
)

#: Number of tasks in each category; they sum to the 30-task suite.
CATEGORY_SIZES = {
    Category.HOLD: 10,
    Category.PICK: 11,
    Category.LEVER: 2,
    Category.TWIST: 2,
    Category.OPEN: 2,
    Category.PUT_IN_ON: 3,
}

#: Display/report order for hands.
HAND_ORDER = KNOWN_HAND_NAMES


@dataclass(frozen=True)
class TaskSpec:
    """One manipulation task; compliance-flagged tasks are the ones where a
    soft hand is expected to have an edge."""

    id: int
    name: str
    category: Category
    compliance_flagged: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.id <= TASK_COUNT:
            raise ValidationError(f"task id must lie in 1..{TASK_COUNT}, got {self.id}")


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one repetition of one task with one hand."""

    hand: str
    task_id: int
    rep: int
    success: bool
    notes: str = ""
    timestamp_ms: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.rep <= REPS_PER_TASK:
            raise ValidationError(f"rep must lie in 1..{REPS_PER_TASK}, got {self.rep}")
        if not 1 <= self.task_id <= TASK_COUNT:
            raise ValidationError(f"task id must lie in 1..{TASK_COUNT}, got {self.task_id}")


@dataclass(frozen=True)
class HandResult:
    hand: str
    successes: int
    attempts: int
    rate_percent: int
    tasks_fully_solved: int
    category_fractions: Mapping[Category, float]


@dataclass(frozen=True)
class ResultsTable:
    rows: tuple
    strict: bool
    warnings: tuple = ()

    def row(self, hand: str) -> HandResult:
        for r in self.rows:
            if r.hand == hand:
                return r
        raise KeyError(hand)


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero (87.33 -> 87,
    75.5 -> 76); matches how the published percentages are presented."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


# ---------------------------------------------------------------------------
# Registry and trial-log loading
# ---------------------------------------------------------------------------

def _bundled(name: str):
    return resources.files("dash_teleop").joinpath("data").joinpath(name)


def reference_results_path() -> str:
    """Path of the bundled reference trial log (per-hand totals fixture)."""
    return str(_bundled("dash30_reference_results.jsonl"))


def load_task_registry(path=None) -> tuple:
    """Load and validate the 30-task registry."""
    source = _bundled("task_registry.json") if path is None else path
    with open(source, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    tasks = []
    for i, rec in enumerate(raw):
        try:
            tasks.append(
                TaskSpec(
                    id=int(rec["id"]),
                    name=str(rec["name"]),
                    category=Category(rec["category"]),
                    compliance_flagged=bool(rec["compliance_flagged"]),
                )
            )
        except (KeyError, ValueError, ValidationError) as exc:
            raise ValidationError(f"task record {i}: {exc}") from exc
    ids = sorted(t.id for t in tasks)
    if ids != list(range(1, TASK_COUNT + 1)):
        raise ValidationError(f"registry must cover task ids 1..{TASK_COUNT} exactly once")
    sizes = {c: sum(1 for t in tasks if t.category is c) for c in Category}
    if sizes != CATEGORY_SIZES:
        raise ValidationError(f"bad category sizes {sizes}, expected {CATEGORY_SIZES}")
    return tuple(sorted(tasks, key=lambda t: t.id))


def task_categories(registry: Optional[Sequence[TaskSpec]] = None) -> dict:
    reg = load_task_registry() if registry is None else registry
    return {t.id: t.category for t in reg}


def trial_to_dict(rec: TrialRecord) -> dict:
    return {
        "hand": rec.hand,
        "task": rec.task_id,
        "rep": rec.rep,
        "success": rec.success,
        "t": rec.timestamp_ms,
        "notes": rec.notes,
    }


def trial_from_dict(data: Mapping, known_hands=KNOWN_HAND_NAMES) -> TrialRecord:
    try:
        hand = str(data["hand"])
        task = int(data["task"])
        rep = int(data["rep"])
        success = data["success"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad trial record: {exc}") from exc
    if not isinstance(success, bool):
        raise ValidationError(f"success must be a boolean, got {success!r}")
    if hand not in known_hands:
        raise ValidationError(f"unknown hand {hand!r} (known: {', '.join(known_hands)})")
    return TrialRecord(
        hand=hand,
        task_id=task,
        rep=rep,
        success=success,
        notes=str(data.get("notes", "")),
        timestamp_ms=int(data.get("t", 0)),
    )


def load_trials(path, known_hands=KNOWN_HAND_NAMES) -> list:
    """Load a JSON-lines trial log; every problem is reported with its line
    number, and duplicate (hand, task, rep) records are rejected."""
    records = []
    seen = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = trial_from_dict(json.loads(line), known_hands=known_hands)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: invalid JSON: {exc}") from exc
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            key = (rec.hand, rec.task_id, rec.rep)
            if key in seen:
                raise ValidationError(
                    f"line {lineno}: duplicate record for hand={rec.hand} "
                    f"task={rec.task_id} rep={rec.rep} (first seen on line {seen[key]})"
                )
            seen[key] = lineno
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate(
    trials: Iterable[TrialRecord],
    strict: bool = False,
    registry: Optional[Sequence[TaskSpec]] = None,
) -> ResultsTable:
    """Roll trial records up into per-hand success tables.

    strict counts missing repetitions as failures (denominator 150);
    otherwise missing repetitions are excluded from the rate denominator
    and flagged in the warnings.
    """
    cats = task_categories(registry)
    per_hand: dict = {}
    for rec in trials:
        per_hand.setdefault(rec.hand, {}).setdefault(rec.task_id, []).append(rec)

    total_reps = TASK_COUNT * REPS_PER_TASK
    rows = []
    warnings = []
    for hand in sorted(per_hand, key=lambda h: HAND_ORDER.index(h) if h in HAND_ORDER else 99):
        tasks = per_hand[hand]
        successes = sum(sum(1 for r in recs if r.success) for recs in tasks.values())
        recorded = sum(len(recs) for recs in tasks.values())
        fully = sum(
            1
            for recs in tasks.values()
            if len(recs) == REPS_PER_TASK and all(r.success for r in recs)
        )
        if strict:
            attempts = total_reps
        else:
            attempts = recorded
            if recorded < total_reps:
                warnings.append(
                    f"{hand}: {total_reps - recorded} repetitions missing; "
                    f"excluded from the rate denominator"
                )
        rate = round_half_away(100.0 * successes / attempts) if attempts else 0
        cat_succ = {c: 0 for c in Category}
        for task_id, recs in tasks.items():
            cat_succ[cats[task_id]] += sum(1 for r in recs if r.success)
        fractions = {
            c: cat_succ[c] / (REPS_PER_TASK * CATEGORY_SIZES[c]) for c in CATEGORY_ORDER
        }
        rows.append(
            HandResult(
                hand=hand,
                successes=successes,
                attempts=attempts,
                rate_percent=rate,
                tasks_fully_solved=fully,
                category_fractions=fractions,
            )
        )
    return ResultsTable(rows=tuple(rows), strict=strict, warnings=tuple(warnings))


def category_breakdown(
    trials: Iterable[TrialRecord],
    registry: Optional[Sequence[TaskSpec]] = None,
) -> dict:
    """(hand, Category) -> success fraction out of 5 * category size."""
    table = aggregate(trials, strict=False, registry=registry)
    return {
        (row.hand, cat): frac
        for row in table.rows
        for cat, frac in row.category_fractions.items()
    }


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("hand", "successes", "rate", "tasks_fully_solved") + tuple(
    c.value for c in CATEGORY_ORDER
)


def export_report_csv(table: ResultsTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in table.rows:
            cells = [
                row.hand,
                str(row.successes),
                str(row.rate_percent),
                str(row.tasks_fully_solved),
            ]
            cells += [f"{row.category_fractions[c]:.3f}" for c in CATEGORY_ORDER]
            fh.write(",".join(cells) + "\n")


def format_report_text(table: ResultsTable) -> str:
    header = ["hand", "success", "rate%", "solved"] + [c.value for c in CATEGORY_ORDER]
    lines = ["  ".join(f"{h:>8}" for h in header)]
    for row in table.rows:
        cells = [
            row.hand,
            f"{row.successes}/{row.attempts}",
            str(row.rate_percent),
            f"{row.tasks_fully_solved}/30",
        ] + [f"{row.category_fractions[c]:.2f}" for c in CATEGORY_ORDER]
        lines.append("  ".join(f"{c:>8}" for c in cells))
    for warning in table.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines)


def results_table_to_dict(table: ResultsTable) -> dict:
    """JSON-friendly form used by the session service's report endpoint."""
    return {
        "strict": table.strict,
        "rows": [
            {
                "hand": row.hand,
                "successes": row.successes,
                "attempts": row.attempts,
                "rate_percent": row.rate_percent,
                "tasks_fully_solved": row.tasks_fully_solved,
                "categories": {c.value: row.category_fractions[c] for c in CATEGORY_ORDER},
            }
            for row in table.rows
        ],
        "warnings": list(table.warnings),
    }
