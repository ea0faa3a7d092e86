"""Experiment-plan object model and validation.

An :class:`ExperimentPlan` is a tree: a participant-set identifier plus
calendars, each calendar holding context collections, each of which holds
any number of question collections and sensor collections.  Question and
sensor collections carry a time window, a :class:`RecurrenceRule`, and the
question or sensor they fire.

The tree is deliberately lenient at construction time: dataclasses hold
whatever they are given, and :func:`validate_plan` is the single place
where invariants are checked, returning diagnostics instead of raising.
The document parser (``plan_io``) funnels through the same validator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterator, Optional

MAX_ID = 2**63 - 1

#: Raw (name-with-params, value) content lines preserved for forward
#: compatibility; written back verbatim on serialization.
Extensions = tuple[tuple[str, str], ...]


class Frequency(str, Enum):
    MILLISECOND = "Millisecond"
    SECOND = "Second"
    MINUTE = "Minute"
    HOUR = "Hour"
    DAILY = "Daily"
    WEEKLY = "Weekly"
    MONTHLY = "Monthly"
    YEARLY = "Yearly"


#: Frequencies a question collection is expected to stay within; finer
#: cadences are legal but flagged as a validation warning.
BASE_QUESTION_FREQUENCIES = frozenset(
    {Frequency.DAILY, Frequency.WEEKLY, Frequency.MONTHLY, Frequency.YEARLY}
)


class QuestionCategory(str, Enum):
    WE = "WE"
    WA = "WA"
    WI = "WI"
    WO = "WO"
    WU = "WU"


class QuestionType(str, Enum):
    DICHOTOMOUS = "Dichotomous"
    MULTIPLE_CHOICE = "MultipleChoice"
    SINGLE_CHOICE = "SingleChoice"
    FREE_TEXT = "FreeText"


class SensorType(str, Enum):
    SOCIAL = "Social"
    MOTION = "Motion"
    LOCATION = "Location"
    INERTIAL = "Inertial"
    DEVICE = "Device"
    AMBIENT = "Ambient"
    SOFTWARE = "Software"
    QUESTION_ANSWERING = "QuestionAnswering"


@dataclass(frozen=True)
class RecurrenceRule:
    """(frequency, interval, count): fire every ``interval`` frequency
    units, ``count`` times in total."""

    frequency: Frequency
    interval: int = 1
    count: int = 1


@dataclass(frozen=True)
class Question:
    qid: int
    qcategory: QuestionCategory
    question_content: str
    answer_options: tuple[str, ...] = ()
    qtype: QuestionType = QuestionType.SINGLE_CHOICE
    answer_content: Optional[str] = None


@dataclass(frozen=True)
class Sensor:
    name: str
    description: str = ""
    sensor_type: SensorType = SensorType.DEVICE


@dataclass(frozen=True)
class QuestionCollection:
    cid: int
    dtstart: datetime
    dtend: datetime
    rrule: RecurrenceRule
    question: Question
    status: bool = True
    extensions: Extensions = ()


@dataclass(frozen=True)
class SensorCollection:
    sid: int
    dtstart: datetime
    dtend: datetime
    rrule: RecurrenceRule
    sensor: Sensor
    extensions: Extensions = ()


@dataclass(frozen=True)
class ContextCollection:
    id: int
    question_collections: tuple[QuestionCollection, ...] = ()
    sensor_collections: tuple[SensorCollection, ...] = ()
    extensions: Extensions = ()


@dataclass(frozen=True)
class Calendar:
    calendar_id: int
    context_collections: tuple[ContextCollection, ...] = ()
    extensions: Extensions = ()


@dataclass(frozen=True)
class ExperimentPlan:
    user: str
    calendars: tuple[Calendar, ...] = ()
    extensions: Extensions = ()

    def iter_question_collections(self) -> Iterator[tuple[Calendar, ContextCollection, QuestionCollection]]:
        for cal in self.calendars:
            for ctx in cal.context_collections:
                for qc in ctx.question_collections:
                    yield cal, ctx, qc

    def iter_sensor_collections(self) -> Iterator[tuple[Calendar, ContextCollection, SensorCollection]]:
        for cal in self.calendars:
            for ctx in cal.context_collections:
                for sc in ctx.sensor_collections:
                    yield cal, ctx, sc


# --------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    path: str
    message: str
    code: str = "invalid"

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


class PlanError(ValueError):
    """Base class for plan parsing/validation failures."""


class PlanSyntaxError(PlanError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class PlanValidationError(PlanError):
    def __init__(self, diagnostics: list[Diagnostic]):
        errors = [d for d in diagnostics if d.is_error]
        summary = "; ".join(f"{d.path}: {d.message}" for d in errors[:3])
        if len(errors) > 3:
            summary += f" (+{len(errors) - 3} more)"
        super().__init__(summary or "invalid plan")
        self.diagnostics = diagnostics


class DuplicateIdError(PlanValidationError):
    pass


def _check_id(diags: list[Diagnostic], path: str, value: int, what: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not (0 <= value <= MAX_ID):
        diags.append(Diagnostic("error", path, f"{what} must be a non-negative 64-bit integer", "bad-id"))


def _check_window(diags: list[Diagnostic], path: str, dtstart: datetime, dtend: datetime) -> None:
    if dtstart >= dtend:
        diags.append(Diagnostic("error", path, f"dtend {dtend} not after dtstart {dtstart}", "bad-window"))
    for name, value in (("dtstart", dtstart), ("dtend", dtend)):
        if value.microsecond:
            diags.append(
                Diagnostic("error", f"{path}.{name}", "sub-second precision is not representable", "bad-timestamp")
            )


def _check_rrule(diags: list[Diagnostic], path: str, rrule: RecurrenceRule) -> None:
    if rrule.interval < 1:
        diags.append(Diagnostic("error", f"{path}.rrule", f"interval must be >= 1, got {rrule.interval}", "bad-rrule"))
    if rrule.count < 1:
        diags.append(Diagnostic("error", f"{path}.rrule", f"count must be >= 1, got {rrule.count}", "bad-rrule"))


def _check_question(diags: list[Diagnostic], path: str, q: Question) -> None:
    _check_id(diags, f"{path}.qid", q.qid, "question id")
    n = len(q.answer_options)
    if q.qtype is QuestionType.DICHOTOMOUS and n != 2:
        diags.append(Diagnostic("error", path, f"dichotomous question needs exactly 2 options, got {n}", "bad-options"))
    elif q.qtype in (QuestionType.SINGLE_CHOICE, QuestionType.MULTIPLE_CHOICE) and n == 0:
        diags.append(Diagnostic("error", path, f"{q.qtype.value} question needs at least one option", "bad-options"))
    elif q.qtype is QuestionType.FREE_TEXT and n != 0:
        diags.append(Diagnostic("error", path, f"free-text question must not carry options, got {n}", "bad-options"))


def _check_unique(diags: list[Diagnostic], path: str, ids: list[int], what: str) -> None:
    seen: set[int] = set()
    for i in ids:
        if i in seen:
            diags.append(Diagnostic("error", path, f"duplicate {what} {i}", "duplicate-id"))
        seen.add(i)


def validate_plan(plan: ExperimentPlan) -> list[Diagnostic]:
    """Check every plan invariant; empty result means the plan is clean.

    Errors mark contract violations; warnings mark legal-but-unusual
    constructs (currently: question cadences finer than daily).
    """
    diags: list[Diagnostic] = []
    if not plan.user:
        diags.append(Diagnostic("error", "plan.user", "participant-set identifier is empty", "bad-user"))
    _check_unique(diags, "plan", [c.calendar_id for c in plan.calendars], "calendar id")
    for cal in plan.calendars:
        cal_path = f"calendar[{cal.calendar_id}]"
        _check_id(diags, cal_path, cal.calendar_id, "calendar id")
        _check_unique(diags, cal_path, [cc.id for cc in cal.context_collections], "context-collection id")
        for cc in cal.context_collections:
            cc_path = f"{cal_path}.context[{cc.id}]"
            _check_id(diags, cc_path, cc.id, "context-collection id")
            _check_unique(diags, cc_path, [qc.cid for qc in cc.question_collections], "question-collection id")
            _check_unique(diags, cc_path, [sc.sid for sc in cc.sensor_collections], "sensor-collection id")
            for qc in cc.question_collections:
                q_path = f"{cc_path}.question[{qc.cid}]"
                _check_id(diags, q_path, qc.cid, "question-collection id")
                _check_window(diags, q_path, qc.dtstart, qc.dtend)
                _check_rrule(diags, q_path, qc.rrule)
                _check_question(diags, q_path, qc.question)
                if qc.rrule.frequency not in BASE_QUESTION_FREQUENCIES:
                    diags.append(
                        Diagnostic(
                            "warning",
                            f"{q_path}.rrule",
                            f"question cadence {qc.rrule.frequency.value} is finer than the base "
                            "frequency set {Daily, Weekly, Monthly, Yearly}",
                            "sub-daily-question",
                        )
                    )
            for sc in cc.sensor_collections:
                s_path = f"{cc_path}.sensor[{sc.sid}]"
                _check_id(diags, s_path, sc.sid, "sensor-collection id")
                _check_window(diags, s_path, sc.dtstart, sc.dtend)
                _check_rrule(diags, s_path, sc.rrule)
                if not sc.sensor.name:
                    diags.append(Diagnostic("error", s_path, "sensor name is empty", "bad-sensor"))
    return diags
