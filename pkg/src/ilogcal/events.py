"""QA lifecycle events, sensor readings, and the append-only event log.

Question answering is itself sensed: each question occurrence produces a
``QuestionGenerated`` record when it becomes ready, a ``QuestionDelivered``
record when it reaches the device, then either ``AnswerStarted`` +
``AnswerStored`` or a terminal ``Missed``.  Reaction time is
delivered-to-started, completion time is started-to-stored, delay is
generated-to-stored.

The log serializes as line-delimited JSON with a schema-versioned header
line; records are kept in the deterministic order
(at, participant, record rank, source).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable, Iterator, Optional, Union

from .context import format_instant, parse_instant

EVENT_LOG_SCHEMA = "ilog-events/1"

LIFECYCLE_ORDER = {
    "QuestionGenerated": 0,
    "QuestionDelivered": 1,
    "AnswerStarted": 2,
    "AnswerStored": 3,
    "Missed": 4,
}


class LifecycleError(ValueError):
    """Events of one occurrence violate the QA lifecycle order."""


@dataclass(frozen=True)
class OccurrenceRef:
    calendar_id: int
    collection_id: int
    seq_no: int


@dataclass(frozen=True)
class QAEvent:
    participant: str
    ref: OccurrenceRef
    kind: str
    at: datetime
    payload: Optional[str] = None
    category: Optional[str] = None
    diary_or_task: str = "TimeDiary"
    correct: Optional[bool] = None  # simulator annotation; absent on real data

    def to_record(self) -> dict:
        return {
            "type": "qa",
            "participant": self.participant,
            "calendar": self.ref.calendar_id,
            "collection": self.ref.collection_id,
            "seq": self.ref.seq_no,
            "kind": self.kind,
            "at": format_instant(self.at),
            "payload": self.payload,
            "category": self.category,
            "diary": self.diary_or_task,
            "correct": self.correct,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "QAEvent":
        return cls(
            participant=rec["participant"],
            ref=OccurrenceRef(rec["calendar"], rec["collection"], rec["seq"]),
            kind=rec["kind"],
            at=parse_instant(rec["at"]),
            payload=rec.get("payload"),
            category=rec.get("category"),
            diary_or_task=rec.get("diary", "TimeDiary"),
            correct=rec.get("correct"),
        )


@dataclass(frozen=True)
class SensorReading:
    participant: str
    sensor: str
    at: datetime
    value: Union[float, str, None]
    cadence_source: Optional[OccurrenceRef] = None

    def to_record(self) -> dict:
        rec = {
            "type": "sensor",
            "participant": self.participant,
            "sensor": self.sensor,
            "at": format_instant(self.at),
            "value": self.value,
        }
        if self.cadence_source is not None:
            rec["calendar"] = self.cadence_source.calendar_id
            rec["collection"] = self.cadence_source.collection_id
            rec["seq"] = self.cadence_source.seq_no
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "SensorReading":
        source = None
        if "calendar" in rec:
            source = OccurrenceRef(rec["calendar"], rec["collection"], rec["seq"])
        return cls(rec["participant"], rec["sensor"], parse_instant(rec["at"]), rec.get("value"), source)


Record = Union[QAEvent, SensorReading]


def record_sort_key(record: Record):
    if isinstance(record, QAEvent):
        return (
            record.at,
            record.participant,
            0,
            LIFECYCLE_ORDER.get(record.kind, 9),
            record.ref.calendar_id,
            record.ref.collection_id,
            record.ref.seq_no,
        )
    ref = record.cadence_source or OccurrenceRef(-1, -1, -1)
    return (record.at, record.participant, 1, 0, ref.calendar_id, ref.collection_id, ref.seq_no)


@dataclass
class EventLog:
    records: list[Record] = field(default_factory=list)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def qa_events(self) -> Iterator[QAEvent]:
        return (r for r in self.records if isinstance(r, QAEvent))

    def sensor_readings(self) -> Iterator[SensorReading]:
        return (r for r in self.records if isinstance(r, SensorReading))

    def sort(self) -> None:
        self.records.sort(key=record_sort_key)

    def write(self, out: IO[str]) -> None:
        out.write(json.dumps({"schema": EVENT_LOG_SCHEMA}) + "\n")
        for record in self.records:
            out.write(json.dumps(record.to_record()) + "\n")

    def dumps(self) -> str:
        header = json.dumps({"schema": EVENT_LOG_SCHEMA})
        return "\n".join([header] + [json.dumps(r.to_record()) for r in self.records]) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    @classmethod
    def read(cls, lines: Iterable[str]) -> "EventLog":
        it = iter(lines)
        header = json.loads(next(it))
        if header.get("schema") != EVENT_LOG_SCHEMA:
            raise ValueError(f"unexpected event log schema {header.get('schema')!r}")
        log = cls()
        for line in it:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            log.records.append(record_from_dict(rec))
        return log


def record_from_dict(rec: dict) -> Record:
    if rec.get("type") == "qa":
        return QAEvent.from_record(rec)
    if rec.get("type") == "sensor":
        return SensorReading.from_record(rec)
    raise ValueError(f"unknown record type {rec.get('type')!r}")


@dataclass(frozen=True)
class TimingMetrics:
    """Durations, in seconds, derived from one occurrence's QA events."""

    reaction_time: Optional[float] = None
    completion_time: Optional[float] = None
    delay: Optional[float] = None


def events_for(log: Union[EventLog, Iterable[Record]], participant: str, ref: OccurrenceRef) -> list[QAEvent]:
    return [
        r
        for r in (log.records if isinstance(log, EventLog) else log)
        if isinstance(r, QAEvent) and r.participant == participant and r.ref == ref
    ]


def derive_timing(log: Union[EventLog, Iterable[Record]], participant: str, ref: OccurrenceRef) -> TimingMetrics:
    """Compute reaction/completion/delay for one question occurrence.

    Raises :class:`LifecycleError` when the occurrence's events are out of
    lifecycle order or when no delivery happened.
    """
    by_kind: dict[str, QAEvent] = {}
    for event in events_for(log, participant, ref):
        if event.kind in by_kind:
            raise LifecycleError(f"{ref}: duplicate {event.kind}")
        by_kind[event.kind] = event
    if "QuestionDelivered" not in by_kind:
        raise LifecycleError(f"{ref}: no QuestionDelivered event")
    check_lifecycle(by_kind.values())
    delivered = by_kind["QuestionDelivered"]
    generated = by_kind.get("QuestionGenerated")
    started = by_kind.get("AnswerStarted")
    stored = by_kind.get("AnswerStored")
    reaction = (started.at - delivered.at).total_seconds() if started else None
    completion = (stored.at - started.at).total_seconds() if started and stored else None
    delay = (stored.at - generated.at).total_seconds() if stored and generated else None
    return TimingMetrics(reaction, completion, delay)


def check_lifecycle(events: Iterable[QAEvent]) -> None:
    """Assert Generated <= Delivered <= AnswerStarted <= AnswerStored and
    that Missed excludes AnswerStored."""
    ordered = sorted(events, key=lambda e: LIFECYCLE_ORDER.get(e.kind, 9))
    kinds = [e.kind for e in ordered]
    if "Missed" in kinds and "AnswerStored" in kinds:
        raise LifecycleError("occurrence both Missed and AnswerStored")
    previous: Optional[QAEvent] = None
    for event in ordered:
        if event.kind == "Missed":
            continue
        if previous is not None and event.at < previous.at:
            raise LifecycleError(
                f"{event.kind} at {event.at} precedes {previous.kind} at {previous.at}"
            )
        previous = event
