"""Recurrence expansion, plan compilation, and runtime revision.

``expand`` turns a (frequency, interval, count) rule into concrete UTC
instants.  ``compile_plan`` merges every accepted collection of a plan
into one time-sorted occurrence list per participant.  ``apply_revision``
then edits that timeline under the control hierarchy: the researcher is
unrestricted, participants act within researcher-set bounds, and the
platform acts within bounds set by both.

The timeline is event-sourced: it is a pure fold of the compiled plan
over the audit log, so replaying the audit from the compiled base
reproduces the current timeline exactly.
"""

from __future__ import annotations

import calendar as _calendar
import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Union

from .plan import (
    ExperimentPlan,
    Frequency,
    PlanValidationError,
    RecurrenceRule,
    validate_plan,
)
from .plan_io import fold_line

DEFAULT_EXPANSION_CAP = 10_000_000

_FIXED_UNITS = {
    Frequency.MILLISECOND: timedelta(milliseconds=1),
    Frequency.SECOND: timedelta(seconds=1),
    Frequency.MINUTE: timedelta(minutes=1),
    Frequency.HOUR: timedelta(hours=1),
    Frequency.DAILY: timedelta(days=1),
    Frequency.WEEKLY: timedelta(weeks=1),
}


class ExpansionOverflowError(OverflowError):
    """The expansion would produce more occurrences than the cap allows."""


class PolicyViolationError(Exception):
    def __init__(self, actor: "Actor", limit: str):
        super().__init__(f"{actor.value}: {limit}")
        self.actor = actor
        self.limit = limit


class ImmutablePastError(Exception):
    """A revision tried to rewrite an occurrence that already elapsed."""


def _add_months(start: datetime, months: int) -> datetime:
    month_index = start.year * 12 + (start.month - 1) + months
    year, month0 = divmod(month_index, 12)
    day = min(start.day, _calendar.monthrange(year, month0 + 1)[1])
    return start.replace(year=year, month=month0 + 1, day=day)


def _instant_at(rrule: RecurrenceRule, dtstart: datetime, k: int) -> datetime:
    if rrule.frequency in _FIXED_UNITS:
        return dtstart + k * rrule.interval * _FIXED_UNITS[rrule.frequency]
    if rrule.frequency is Frequency.MONTHLY:
        return _add_months(dtstart, k * rrule.interval)
    # Yearly: clamp Feb 29 starts to Feb 28 in non-leap years.
    year = dtstart.year + k * rrule.interval
    day = min(dtstart.day, _calendar.monthrange(year, dtstart.month)[1])
    return dtstart.replace(year=year, day=day)


def _estimate_occurrences(rrule: RecurrenceRule, dtstart: datetime, dtend: datetime) -> int:
    if rrule.frequency in _FIXED_UNITS:
        step = rrule.interval * _FIXED_UNITS[rrule.frequency]
        delta = dtend - dtstart
        window = delta // step + (0 if delta % step == timedelta(0) else 1)
    elif rrule.frequency is Frequency.MONTHLY:
        months = (dtend.year - dtstart.year) * 12 + dtend.month - dtstart.month + 1
        window = months // rrule.interval + 1
    else:
        window = (dtend.year - dtstart.year) // rrule.interval + 1
    return min(rrule.count, max(window, 0))


def expand(
    rrule: RecurrenceRule,
    dtstart: datetime,
    dtend: datetime,
    cap: int = DEFAULT_EXPANSION_CAP,
) -> list[datetime]:
    """Concrete instants of a rule: dtstart + k * (interval * unit).

    Yields at most ``count`` instants, all strictly before ``dtend``.
    Monthly/yearly steps use calendar arithmetic with day-of-month
    clamping (Jan 31 + 1 month -> Feb 28/29), so the count semantics stay
    exact across short months and leap years.
    """
    if dtstart.tzinfo is None or dtend.tzinfo is None:
        raise ValueError("dtstart and dtend must be timezone-aware UTC instants")
    if dtstart >= dtend:
        raise ValueError(f"dtstart {dtstart} must precede dtend {dtend}")
    if rrule.interval < 1 or rrule.count < 1:
        raise ValueError(f"invalid rule: interval={rrule.interval} count={rrule.count}")
    if _estimate_occurrences(rrule, dtstart, dtend) > cap:
        raise ExpansionOverflowError(
            f"rule would expand to more than {cap} occurrences in [{dtstart}, {dtend})"
        )
    instants: list[datetime] = []
    for k in range(rrule.count):
        instant = _instant_at(rrule, dtstart, k)
        if instant >= dtend:
            break
        instants.append(instant)
    return instants


# --------------------------------------------------------------------------
# Timelines


class Actor(str, Enum):
    RESEARCHER = "Researcher"
    PARTICIPANT = "Participant"
    PLATFORM = "Platform"


@dataclass(frozen=True)
class OccurrenceSource:
    calendar_id: int
    collection_id: int
    kind: str  # "question" | "sensor"


@dataclass(frozen=True)
class Occurrence:
    source: OccurrenceSource
    seq_no: int
    scheduled_at: datetime
    window_end: datetime
    cancelled: bool = False


@dataclass(frozen=True)
class CollectionInfo:
    source: OccurrenceSource
    dtstart: datetime
    dtend: datetime
    rrule: RecurrenceRule
    accepted: bool
    question: Optional[object] = None  # plan.Question for question collections
    sensor: Optional[object] = None  # plan.Sensor for sensor collections


@dataclass(frozen=True)
class RevisionTarget:
    """Selector over occurrences; every non-None field must match."""

    calendar_id: Optional[int] = None
    collection_id: Optional[int] = None
    kind: Optional[str] = None
    seq_no: Optional[int] = None
    day: Optional[date] = None
    participant: Optional[str] = None

    def matches(self, occ: Occurrence) -> bool:
        if self.calendar_id is not None and occ.source.calendar_id != self.calendar_id:
            return False
        if self.collection_id is not None and occ.source.collection_id != self.collection_id:
            return False
        if self.kind is not None and occ.source.kind != self.kind:
            return False
        if self.seq_no is not None and occ.seq_no != self.seq_no:
            return False
        if self.day is not None and occ.scheduled_at.date() != self.day:
            return False
        return True


@dataclass(frozen=True)
class Shift:
    delta: timedelta


@dataclass(frozen=True)
class Cancel:
    pass


@dataclass(frozen=True)
class Reinstate:
    pass


@dataclass(frozen=True)
class FrequencyOverride:
    rrule: RecurrenceRule


Change = Union[Shift, Cancel, Reinstate, FrequencyOverride]


@dataclass(frozen=True)
class Revision:
    actor: Actor
    target: RevisionTarget
    change: Change
    issued_at: datetime


@dataclass(frozen=True)
class AuditEntry:
    revision: Revision
    note: Optional[str] = None


@dataclass(frozen=True)
class RevisionPolicy:
    """Researcher-set bounds on participant and platform revisions.

    ``participant_platform_windows`` records per-participant grants for
    platform-initiated shifts; the effective platform bound is the
    smaller of the researcher window and the participant grant.
    """

    max_participant_shift: timedelta = timedelta(minutes=60)
    max_participant_cancels_per_day: int = 4
    platform_shift_window: timedelta = timedelta(minutes=30)
    frozen_collections: frozenset = frozenset()  # of (calendar_id, collection_id)
    participant_platform_windows: Mapping[str, timedelta] = field(default_factory=dict)
    allow_platform_frequency_override: bool = False


@dataclass
class Timeline:
    """Per-participant occurrence lists plus the audit that produced them."""

    occurrences: dict[str, tuple[Occurrence, ...]]
    collections: dict[tuple[int, int, str], CollectionInfo]
    rejected: dict[str, tuple[Occurrence, ...]] = field(default_factory=dict)
    audit: tuple[AuditEntry, ...] = ()
    version: int = 0

    @property
    def participants(self) -> list[str]:
        return sorted(self.occurrences)

    def for_participant(self, participant: str) -> tuple[Occurrence, ...]:
        return self.occurrences[participant]


def _sort_key(occ: Occurrence):
    return (occ.scheduled_at, occ.source.calendar_id, occ.source.collection_id, occ.source.kind, occ.seq_no)


def _chain_windows(instants: Sequence[datetime], dtend: datetime) -> list[datetime]:
    # A question stays open until superseded by the next firing, capped at
    # the collection's end.
    return [min(instants[i + 1], dtend) if i + 1 < len(instants) else dtend for i in range(len(instants))]


def compile_plan(
    plan: ExperimentPlan,
    participants: Iterable,
    cap: int = DEFAULT_EXPANSION_CAP,
) -> Timeline:
    """Merge all accepted collections into a per-participant timeline.

    Rejected (status 0) question collections are kept aside so a later
    ``Reinstate`` revision can bring them back; they contribute nothing
    to the active occurrence lists.
    """
    diags = validate_plan(plan)
    if any(d.is_error for d in diags):
        raise PlanValidationError(diags)

    active: list[Occurrence] = []
    shelved: list[Occurrence] = []
    collections: dict[tuple[int, int, str], CollectionInfo] = {}

    def expand_collection(source: OccurrenceSource, dtstart, dtend, rrule) -> list[Occurrence]:
        try:
            instants = expand(rrule, dtstart, dtend, cap=cap)
        except ExpansionOverflowError as exc:
            raise ExpansionOverflowError(
                f"calendar[{source.calendar_id}].collection[{source.collection_id}]: {exc}"
            ) from exc
        windows = _chain_windows(instants, dtend)
        return [Occurrence(source, k, at, win) for k, (at, win) in enumerate(zip(instants, windows))]

    for cal, cc, qc in plan.iter_question_collections():
        source = OccurrenceSource(cal.calendar_id, qc.cid, "question")
        collections[(cal.calendar_id, qc.cid, "question")] = CollectionInfo(
            source, qc.dtstart, qc.dtend, qc.rrule, qc.status, question=qc.question
        )
        occurrences = expand_collection(source, qc.dtstart, qc.dtend, qc.rrule)
        (active if qc.status else shelved).extend(occurrences)
    for cal, cc, sc in plan.iter_sensor_collections():
        source = OccurrenceSource(cal.calendar_id, sc.sid, "sensor")
        collections[(cal.calendar_id, sc.sid, "sensor")] = CollectionInfo(
            source, sc.dtstart, sc.dtend, sc.rrule, True, sensor=sc.sensor
        )
        active.extend(expand_collection(source, sc.dtstart, sc.dtend, sc.rrule))

    active.sort(key=_sort_key)
    shelved.sort(key=_sort_key)
    ids = [p.id if hasattr(p, "id") else str(p) for p in participants]
    merged = tuple(active)
    kept = tuple(shelved)
    return Timeline(
        occurrences={pid: merged for pid in ids},
        collections=collections,
        rejected={pid: kept for pid in ids},
    )


def _collection_key(occ: Occurrence) -> tuple[int, int]:
    return (occ.source.calendar_id, occ.source.collection_id)


def _participant_cancels_today(timeline: Timeline, participant: str, day: date) -> int:
    n = 0
    for entry in timeline.audit:
        rev = entry.revision
        if (
            rev.actor is Actor.PARTICIPANT
            and isinstance(rev.change, Cancel)
            and rev.target.participant == participant
            and rev.issued_at.date() == day
        ):
            n += 1
    return n


def _check_policy(timeline: Timeline, rev: Revision, policy: RevisionPolicy, matched: list[Occurrence]) -> None:
    actor = rev.actor
    if actor is Actor.RESEARCHER:
        return
    if rev.target.participant is None and actor is Actor.PARTICIPANT:
        raise PolicyViolationError(actor, "participant revisions must target their own timeline")
    frozen_hit = [occ for occ in matched if _collection_key(occ) in policy.frozen_collections]
    if not matched and rev.target.calendar_id is not None and rev.target.collection_id is not None:
        if (rev.target.calendar_id, rev.target.collection_id) in policy.frozen_collections:
            frozen_hit = [None]  # collection-level target on a frozen collection
    if frozen_hit:
        raise PolicyViolationError(actor, "target collection is frozen by the researcher")
    change = rev.change
    if isinstance(change, Shift):
        magnitude = abs(change.delta)
        if actor is Actor.PARTICIPANT:
            if magnitude > policy.max_participant_shift:
                raise PolicyViolationError(
                    actor, f"shift {magnitude} exceeds max_participant_shift {policy.max_participant_shift}"
                )
        else:  # platform
            grant = policy.platform_shift_window
            if rev.target.participant is not None:
                grant = policy.participant_platform_windows.get(rev.target.participant, grant)
            window = min(policy.platform_shift_window, grant)
            if magnitude > window:
                raise PolicyViolationError(actor, f"shift {magnitude} exceeds platform window {window}")
    elif isinstance(change, Cancel):
        if actor is Actor.PLATFORM:
            raise PolicyViolationError(actor, "the platform may not cancel occurrences")
        day = rev.issued_at.date()
        if _participant_cancels_today(timeline, rev.target.participant, day) >= policy.max_participant_cancels_per_day:
            raise PolicyViolationError(
                actor, f"more than {policy.max_participant_cancels_per_day} cancels on {day}"
            )
    elif isinstance(change, FrequencyOverride):
        if actor is Actor.PARTICIPANT:
            raise PolicyViolationError(actor, "participants may not override collection cadence")
        if not policy.allow_platform_frequency_override:
            raise PolicyViolationError(actor, "platform cadence overrides are disabled by policy")
    # Reinstate carries no numeric bound; frozen check above still applies.


def _apply_override(
    occurrences: tuple[Occurrence, ...],
    info: CollectionInfo,
    new_rrule: RecurrenceRule,
    issued_at: datetime,
) -> tuple[Occurrence, ...]:
    mine = [o for o in occurrences if o.source == info.source]
    others = [o for o in occurrences if o.source != info.source]
    past = [o for o in mine if o.scheduled_at < issued_at]
    future_active = sorted(
        (o for o in mine if o.scheduled_at >= issued_at and not o.cancelled), key=_sort_key
    )
    anchor = future_active[0].scheduled_at if future_active else issued_at
    next_seq = max((o.seq_no for o in mine), default=-1) + 1
    tail: list[Occurrence] = []
    if anchor < info.dtend:
        instants = expand(new_rrule, anchor, info.dtend)
        windows = _chain_windows(instants, info.dtend)
        tail = [
            Occurrence(info.source, next_seq + k, at, win)
            for k, (at, win) in enumerate(zip(instants, windows))
        ]
    return tuple(sorted(others + past + tail, key=_sort_key))


def apply_revision(timeline: Timeline, rev: Revision, policy: RevisionPolicy) -> Timeline:
    """Apply one revision, returning the revised timeline.

    Occurrences already elapsed at ``rev.issued_at`` are never touched;
    a revision pinned to a single elapsed occurrence raises
    :class:`ImmutablePastError` instead of silently doing nothing.
    """
    pids = [rev.target.participant] if rev.target.participant is not None else timeline.participants
    for pid in pids:
        if pid not in timeline.occurrences:
            raise KeyError(f"unknown participant {pid!r}")

    matched_by_pid: dict[str, list[Occurrence]] = {}
    for pid in pids:
        matched = [o for o in timeline.occurrences[pid] if rev.target.matches(o)]
        if rev.target.seq_no is not None:
            if matched and all(o.scheduled_at < rev.issued_at for o in matched):
                raise ImmutablePastError(
                    f"occurrence seq {rev.target.seq_no} already elapsed at {rev.issued_at}"
                )
        matched_by_pid[pid] = [o for o in matched if o.scheduled_at >= rev.issued_at]
        if isinstance(rev.change, Shift):
            for occ in matched_by_pid[pid]:
                if occ.scheduled_at + rev.change.delta < rev.issued_at:
                    raise ImmutablePastError("shift would move an occurrence into the past")

    all_matched = [o for occs in matched_by_pid.values() for o in occs]
    _check_policy(timeline, rev, policy, all_matched)

    note: Optional[str] = None
    new_occurrences = dict(timeline.occurrences)
    new_rejected = dict(timeline.rejected)
    new_collections = dict(timeline.collections)

    for pid in pids:
        occs = new_occurrences[pid]
        targeted = set(map(id, matched_by_pid[pid]))
        if isinstance(rev.change, Shift):
            delta = rev.change.delta
            updated = [
                replace(o, scheduled_at=o.scheduled_at + delta, window_end=o.window_end + delta)
                if id(o) in targeted
                else o
                for o in occs
            ]
            new_occurrences[pid] = tuple(sorted(updated, key=_sort_key))
        elif isinstance(rev.change, Cancel):
            new_occurrences[pid] = tuple(
                replace(o, cancelled=True) if id(o) in targeted else o for o in occs
            )
        elif isinstance(rev.change, Reinstate):
            new_occurrences[pid] = tuple(
                replace(o, cancelled=False) if id(o) in targeted else o for o in occs
            )
            revived = [
                o
                for o in new_rejected.get(pid, ())
                if rev.target.matches(o) and o.scheduled_at >= rev.issued_at
            ]
            if revived:
                note = "reinstated a collection the participant had rejected"
                keep = tuple(
                    o
                    for o in new_rejected[pid]
                    if not (rev.target.matches(o) and o.scheduled_at >= rev.issued_at)
                )
                new_rejected[pid] = keep
                new_occurrences[pid] = tuple(
                    sorted(new_occurrences[pid] + tuple(o for o in revived), key=_sort_key)
                )
        elif isinstance(rev.change, FrequencyOverride):
            key = (rev.target.calendar_id, rev.target.collection_id, rev.target.kind or "question")
            if key not in new_collections:
                raise KeyError(f"unknown collection {key}")
            info = new_collections[key]
            new_occurrences[pid] = _apply_override(occs, info, rev.change.rrule, rev.issued_at)
            new_collections[key] = replace(info, rrule=rev.change.rrule)

    return Timeline(
        occurrences=new_occurrences,
        collections=new_collections,
        rejected=new_rejected,
        audit=timeline.audit + (AuditEntry(rev, note),),
        version=timeline.version + 1,
    )


def replay(base: Timeline, entries: Iterable[Union[AuditEntry, Revision]], policy: RevisionPolicy) -> Timeline:
    """Fold an audit log over a freshly compiled timeline."""
    current = base
    for entry in entries:
        rev = entry.revision if isinstance(entry, AuditEntry) else entry
        current = apply_revision(current, rev, policy)
    return current


def next_due(timeline: Timeline, now: datetime, participant: Optional[str] = None) -> Optional[Occurrence]:
    """Earliest non-cancelled occurrence at or after ``now``."""
    pids = [participant] if participant is not None else timeline.participants
    best: Optional[Occurrence] = None
    for pid in pids:
        for occ in timeline.occurrences[pid]:
            if occ.cancelled or occ.scheduled_at < now:
                continue
            if best is None or _sort_key(occ) < _sort_key(best):
                best = occ
            break  # lists are time-sorted; first hit is the per-participant minimum
    return best


# --------------------------------------------------------------------------
# Exports

TIMELINE_SCHEMA = "ilog-timeline/1"


def occurrence_record(participant: str, occ: Occurrence) -> dict:
    return {
        "participant": participant,
        "calendar": occ.source.calendar_id,
        "collection": occ.source.collection_id,
        "kind": occ.source.kind,
        "seq": occ.seq_no,
        "scheduled_at": occ.scheduled_at.strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z",
        "window_end": occ.window_end.strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z",
        "cancelled": occ.cancelled,
    }


def timeline_to_ndjson(timeline: Timeline, participant: Optional[str] = None) -> str:
    pids = [participant] if participant is not None else timeline.participants
    lines = [json.dumps({"schema": TIMELINE_SCHEMA, "version": timeline.version})]
    for pid in pids:
        for occ in timeline.occurrences[pid]:
            lines.append(json.dumps(occurrence_record(pid, occ)))
    return "\n".join(lines) + "\n"


def revision_to_record(rev: Revision, note: Optional[str] = None) -> dict:
    """JSON-friendly rendering used by the audit log and the HTTP API."""
    change = rev.change
    if isinstance(change, Shift):
        change_rec = {"kind": "shift", "delta_s": change.delta.total_seconds()}
    elif isinstance(change, Cancel):
        change_rec = {"kind": "cancel"}
    elif isinstance(change, Reinstate):
        change_rec = {"kind": "reinstate"}
    else:
        change_rec = {
            "kind": "frequency_override",
            "rrule": {
                "frequency": change.rrule.frequency.value,
                "interval": change.rrule.interval,
                "count": change.rrule.count,
            },
        }
    target = rev.target
    record = {
        "actor": rev.actor.value,
        "target": {
            "calendar_id": target.calendar_id,
            "collection_id": target.collection_id,
            "kind": target.kind,
            "seq_no": target.seq_no,
            "day": target.day.isoformat() if target.day else None,
            "participant": target.participant,
        },
        "change": change_rec,
        "issued_at": rev.issued_at.strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z",
    }
    if note is not None:
        record["note"] = note
    return record


def revision_from_record(record: dict) -> Revision:
    target_rec = record.get("target") or {}
    target = RevisionTarget(
        calendar_id=target_rec.get("calendar_id"),
        collection_id=target_rec.get("collection_id"),
        kind=target_rec.get("kind"),
        seq_no=target_rec.get("seq_no"),
        day=date.fromisoformat(target_rec["day"]) if target_rec.get("day") else None,
        participant=target_rec.get("participant"),
    )
    change_rec = record.get("change") or {}
    kind = change_rec.get("kind")
    if kind == "shift":
        change: Change = Shift(timedelta(seconds=float(change_rec["delta_s"])))
    elif kind == "cancel":
        change = Cancel()
    elif kind == "reinstate":
        change = Reinstate()
    elif kind == "frequency_override":
        rrule_rec = change_rec["rrule"]
        change = FrequencyOverride(
            RecurrenceRule(Frequency(rrule_rec["frequency"]), int(rrule_rec["interval"]), int(rrule_rec["count"]))
        )
    else:
        raise ValueError(f"unknown change kind {kind!r}")
    issued = datetime.fromisoformat(record["issued_at"].replace("Z", "+00:00")).astimezone(timezone.utc)
    return Revision(Actor(record["actor"]), target, change, issued)


def timeline_to_vevents(timeline: Timeline, participant: str) -> str:
    """Standard VEVENT rendering for display in external calendar clients."""
    stamp = "19700101T000000Z"
    lines = ["BEGIN:VCALENDAR", "VERSION:2.0", "PRODID:-//ilogcal//timeline//EN"]
    for occ in timeline.occurrences[participant]:
        uid = (
            f"{participant}-{occ.source.calendar_id}-{occ.source.collection_id}"
            f"-{occ.source.kind}-{occ.seq_no}@ilogcal"
        )
        lines += [
            "BEGIN:VEVENT",
            f"UID:{uid}",
            f"DTSTAMP:{stamp}",
            f"DTSTART:{occ.scheduled_at.strftime('%Y%m%dT%H%M%SZ')}",
            f"DTEND:{occ.window_end.strftime('%Y%m%dT%H%M%SZ')}",
            f"SUMMARY:{occ.source.kind} {occ.source.calendar_id}/{occ.source.collection_id} #{occ.seq_no}",
        ]
        if occ.cancelled:
            lines.append("STATUS:CANCELLED")
        lines.append("END:VEVENT")
    lines.append("END:VCALENDAR")
    return "".join(fold_line(line) + "\r\n" for line in lines)
