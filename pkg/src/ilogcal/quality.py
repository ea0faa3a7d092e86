"""Live monitoring: participant ranking, compliance, and data-quality checks.

Researchers set :class:`QualityParameters` (unanswered budget, average
completion/response ceilings); participants are then ranked good, medium
or poor by a piecewise rule on their metrics.  The heatmap and the
summary panels aggregate the raw event log; the quality checks scan it
for misbehavior signatures (empty days, answer bursts, sensor gaps,
answers inconsistent with sensors or with each other).

Every flag points back at log records (by index) so a reviewer can drill
down; all functions are read-only folds over a log snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Mapping, Optional, Sequence

from .events import EventLog, OccurrenceRef, QAEvent, SensorReading, derive_timing
from .plan import ExperimentPlan, SensorType
from .schedule import Timeline, expand
from .simulate import DEFAULT_ACTIVITY_CONFLICTS, SENSOR_CATALOG

DEFAULT_SENSOR_GAP = 30
DEFAULT_BURST_COUNT = 10
DEFAULT_BURST_WINDOW_S = 60.0


class AuthorizationError(PermissionError):
    """A viewer asked for data outside their role's slice."""


@dataclass(frozen=True)
class QualityParameters:
    max_unanswered: int = 20
    max_avg_completion_time: float = 120.0  # seconds
    max_avg_response_time: float = 300.0  # seconds
    medium_band: tuple[float, float] = (0.0, 0.5)

    def validate(self) -> None:
        lower, upper = self.medium_band
        if min(self.max_unanswered, self.max_avg_completion_time, self.max_avg_response_time) <= 0:
            raise ValueError("quality thresholds must be positive")
        if not (0.0 <= lower <= upper <= 1.0) or upper == 0.0:
            raise ValueError("medium band fractions must satisfy 0 <= lower <= upper <= 1, upper > 0")


@dataclass(frozen=True)
class ParticipantMetrics:
    participant: str
    unanswered_count: int
    avg_reaction: Optional[float]
    avg_completion: Optional[float]


@dataclass(frozen=True)
class ParticipantRanking:
    participant: str
    verdict: str  # "Good" | "Medium" | "Poor"
    unanswered_count: int
    avg_reaction: Optional[float]
    avg_completion: Optional[float]
    as_of: Optional[datetime] = None


def participant_metrics(log: EventLog, participant: str) -> ParticipantMetrics:
    """Unanswered count and average reaction/completion for one person."""
    unanswered = 0
    reactions: list[float] = []
    completions: list[float] = []
    answered_refs: set[OccurrenceRef] = set()
    for event in log.qa_events():
        if event.participant != participant:
            continue
        if event.kind == "Missed":
            unanswered += 1
        elif event.kind == "AnswerStored":
            answered_refs.add(event.ref)
    for ref in sorted(answered_refs, key=lambda r: (r.calendar_id, r.collection_id, r.seq_no)):
        timing = derive_timing(log, participant, ref)
        if timing.reaction_time is not None:
            reactions.append(timing.reaction_time)
        if timing.completion_time is not None:
            completions.append(timing.completion_time)
    return ParticipantMetrics(
        participant,
        unanswered,
        sum(reactions) / len(reactions) if reactions else None,
        sum(completions) / len(completions) if completions else None,
    )


def rank_participant(
    metrics: ParticipantMetrics,
    params: QualityParameters,
    as_of: Optional[datetime] = None,
) -> ParticipantRanking:
    """Good when every metric sits within its threshold (stretched by the
    band's lower fraction); poor when any metric exceeds the threshold
    stretched by the upper fraction; medium in between."""
    params.validate()
    lower, upper = params.medium_band
    pairs = [
        (float(metrics.unanswered_count), float(params.max_unanswered)),
        (metrics.avg_reaction, params.max_avg_response_time),
        (metrics.avg_completion, params.max_avg_completion_time),
    ]
    good = all(value is None or value <= limit * (1.0 + lower) for value, limit in pairs)
    poor = any(value is not None and value > limit * (1.0 + upper) for value, limit in pairs)
    verdict = "Good" if good else ("Poor" if poor else "Medium")
    return ParticipantRanking(
        metrics.participant, verdict, metrics.unanswered_count,
        metrics.avg_reaction, metrics.avg_completion, as_of,
    )


def rank_all(log: EventLog, params: QualityParameters, as_of: Optional[datetime] = None) -> list[ParticipantRanking]:
    pids = sorted({e.participant for e in log.qa_events()})
    return [rank_participant(participant_metrics(log, pid), params, as_of) for pid in pids]


# --------------------------------------------------------------------------
# Compliance


@dataclass
class Heatmap:
    participants: list[str]
    days: list[date]
    cells: dict[tuple[str, date], Optional[float]]
    counts: dict[tuple[str, date], tuple[int, int]]  # (answered, delivered)
    flagged_days: list[date]

    def rate(self, participant: str, day: date) -> Optional[float]:
        return self.cells.get((participant, day))

    def to_csv(self) -> str:
        lines = ["participant," + ",".join(d.isoformat() for d in self.days)]
        for pid in self.participants:
            row = [pid]
            for day in self.days:
                value = self.cells.get((pid, day))
                row.append("" if value is None else f"{value:.4f}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _utc_date(at: datetime) -> date:
    return at.astimezone(timezone.utc).date()


def compliance_heatmap(log: EventLog, window: Optional[tuple[date, date]] = None) -> Heatmap:
    """Participant x day matrix of answer rates.

    An occurrence counts toward the day its question was delivered; it is
    answered if an ``AnswerStored`` exists anywhere in the log.  Days on
    which no participant produced any record are flagged as a possible
    systemic issue.
    """
    delivered: dict[tuple[str, date], set[OccurrenceRef]] = {}
    answered_refs: dict[str, set[OccurrenceRef]] = {}
    active_days: set[date] = set()
    for record in log:
        active_days.add(_utc_date(record.at))
        if isinstance(record, QAEvent):
            if record.kind == "QuestionDelivered":
                delivered.setdefault((record.participant, _utc_date(record.at)), set()).add(record.ref)
            elif record.kind == "AnswerStored":
                answered_refs.setdefault(record.participant, set()).add(record.ref)

    if window is not None:
        first, last = window
    elif active_days:
        first, last = min(active_days), max(active_days)
    else:
        today = datetime.now(timezone.utc).date()
        first = last = today
    days = [first + timedelta(days=i) for i in range((last - first).days + 1)]
    participants = sorted({pid for pid, _ in delivered} | set(answered_refs))

    cells: dict[tuple[str, date], Optional[float]] = {}
    counts: dict[tuple[str, date], tuple[int, int]] = {}
    for pid in participants:
        stored = answered_refs.get(pid, set())
        for day in days:
            refs = delivered.get((pid, day), set())
            if not refs:
                cells[(pid, day)] = None
                counts[(pid, day)] = (0, 0)
                continue
            n_answered = len(refs & stored)
            cells[(pid, day)] = n_answered / len(refs)
            counts[(pid, day)] = (n_answered, len(refs))
    flagged = [day for day in days if day not in active_days]
    return Heatmap(participants, days, cells, counts, flagged)


@dataclass(frozen=True)
class ComplianceSnapshot:
    per_day: Mapping[str, Mapping[date, tuple[int, int]]]  # pid -> day -> (answered, delivered)
    days_covered: int
    days_left: int
    delivery_rate: Optional[float]
    sensor_rates: Mapping[str, Optional[float]]


def compliance_snapshot(
    log: EventLog, plan: ExperimentPlan, now: Optional[datetime] = None
) -> ComplianceSnapshot:
    """Compliance rollup: per-participant daily answered/delivered counts,
    experiment progress, and question/sensor delivery rates."""
    heatmap = compliance_heatmap(log)
    per_day: dict[str, dict[date, tuple[int, int]]] = {}
    for (pid, day), (answered, delivered) in heatmap.counts.items():
        per_day.setdefault(pid, {})[day] = (answered, delivered)
    summary = dashboard_summary(log, plan, QualityParameters(), now=now)
    return ComplianceSnapshot(
        per_day=per_day,
        days_covered=summary.progress["days_covered"],
        days_left=summary.progress["days_left"],
        delivery_rate=summary.delivery_rate,
        sensor_rates={name: stats["rate"] for name, stats in summary.sensors.items()},
    )


# --------------------------------------------------------------------------
# Quality checks


@dataclass(frozen=True)
class QualityFlag:
    participant: str  # "*" for experiment-wide flags
    kind: str
    evidence: tuple[int, ...]  # indexes into the log's record list
    at: datetime
    detail: str = ""


def _nearest_record_index(log: EventLog, at: datetime) -> int:
    best, best_gap = 0, None
    for i, record in enumerate(log):
        gap = abs((record.at - at).total_seconds())
        if best_gap is None or gap < best_gap:
            best, best_gap = i, gap
    return best


def _missing_day_flags(log: EventLog) -> list[QualityFlag]:
    days = sorted({_utc_date(r.at) for r in log})
    if len(days) < 2:
        return []
    flags = []
    have = set(days)
    cursor = days[0]
    while cursor <= days[-1]:
        if cursor not in have:
            at = datetime(cursor.year, cursor.month, cursor.day, tzinfo=timezone.utc)
            flags.append(
                QualityFlag("*", "MissingDay", (_nearest_record_index(log, at),), at, cursor.isoformat())
            )
        cursor += timedelta(days=1)
    return flags


def _answer_burst_flags(log: EventLog, burst_count: int, window_s: float) -> list[QualityFlag]:
    stored: dict[str, list[tuple[datetime, int]]] = {}
    for i, record in enumerate(log):
        if isinstance(record, QAEvent) and record.kind == "AnswerStored":
            stored.setdefault(record.participant, []).append((record.at, i))
    flags = []
    for pid in sorted(stored):
        events = sorted(stored[pid])
        in_burst = [False] * len(events)
        left = 0
        for right in range(len(events)):
            while (events[right][0] - events[left][0]).total_seconds() > window_s:
                left += 1
            if right - left + 1 >= burst_count:
                for j in range(left, right + 1):
                    in_burst[j] = True
        # Merge marked runs into one flag per contiguous burst cluster.
        j = 0
        while j < len(events):
            if not in_burst[j]:
                j += 1
                continue
            k = j
            while k + 1 < len(events) and in_burst[k + 1]:
                k += 1
            evidence = tuple(index for _, index in events[j : k + 1])
            flags.append(
                QualityFlag(pid, "AnswerBurst", evidence, events[j][0], f"{k - j + 1} answers in a burst")
            )
            j = k + 1
    return flags


def _location_sensor_names() -> set[str]:
    return {name for name, (family, _, _) in SENSOR_CATALOG.items() if family is SensorType.LOCATION}


def _location_mismatch_flags(
    log: EventLog,
    compat: Optional[Mapping[str, set[str]]],
    tolerance_s: float = 600.0,
) -> list[QualityFlag]:
    location_names = _location_sensor_names()
    readings: dict[str, list[tuple[datetime, int, SensorReading]]] = {}
    for i, record in enumerate(log):
        if isinstance(record, SensorReading) and record.sensor in location_names:
            readings.setdefault(record.participant, []).append((record.at, i, record))
    flags = []
    for i, record in enumerate(log):
        if not (isinstance(record, QAEvent) and record.kind == "AnswerStored" and record.category == "WE"):
            continue
        if record.payload is None or record.participant not in readings:
            continue
        nearby = [
            (abs((at - record.at).total_seconds()), idx, reading)
            for at, idx, reading in readings[record.participant]
            if abs((at - record.at).total_seconds()) <= tolerance_s
        ]
        if not nearby:
            continue
        _, idx, reading = min(nearby, key=lambda t: t[0])
        allowed = set(compat.get(record.payload, {record.payload})) if compat else {record.payload}
        if reading.value not in allowed:
            flags.append(
                QualityFlag(
                    record.participant, "LocationMismatch", (i, idx), record.at,
                    f"answered {record.payload!r} but sensed {reading.value!r}",
                )
            )
    return flags


def _sensor_gap_flags(log: EventLog, timeline: Timeline, gap_threshold: int) -> list[QualityFlag]:
    seen: dict[tuple[str, int, int], set[int]] = {}
    last_index: dict[tuple[str, int, int], int] = {}
    for i, record in enumerate(log):
        if isinstance(record, SensorReading) and record.cadence_source is not None:
            key = (record.participant, record.cadence_source.calendar_id, record.cadence_source.collection_id)
            seen.setdefault(key, set()).add(record.cadence_source.seq_no)
            last_index[key] = i
    flags = []
    if not len(log):
        return flags
    for pid in timeline.participants:
        for (cal_id, coll_id, kind), info in sorted(timeline.collections.items()):
            if kind != "sensor" or info.sensor is None:
                continue
            catalog = SENSOR_CATALOG.get(info.sensor.name)
            if catalog is not None and catalog[2]:
                continue  # on-change sensors have no fixed schedule to miss
            expected = [
                occ for occ in timeline.occurrences[pid]
                if occ.source.calendar_id == cal_id and occ.source.collection_id == coll_id and not occ.cancelled
            ]
            present = seen.get((pid, cal_id, coll_id), set())
            run_start, run_len = None, 0
            for occ in expected:
                if occ.seq_no in present:
                    run_start, run_len = None, 0
                    continue
                if run_start is None:
                    run_start = occ
                run_len += 1
                if run_len == gap_threshold + 1:
                    evidence = (last_index.get((pid, cal_id, coll_id), _nearest_record_index(log, run_start.scheduled_at)),)
                    flags.append(
                        QualityFlag(
                            pid, "SensorGap", evidence, run_start.scheduled_at,
                            f"{info.sensor.name}: more than {gap_threshold} consecutive missed readings",
                        )
                    )
            # one flag per gap run; longer runs already flagged at threshold
    return flags


def _implausible_answer_flags(
    log: EventLog, conflicts: Mapping[str, frozenset[str]], tolerance_s: float = 1800.0
) -> list[QualityFlag]:
    we_answers: dict[str, list[tuple[datetime, int, str]]] = {}
    for i, record in enumerate(log):
        if isinstance(record, QAEvent) and record.kind == "AnswerStored" and record.category == "WE" and record.payload:
            we_answers.setdefault(record.participant, []).append((record.at, i, record.payload))
    flags = []
    for i, record in enumerate(log):
        if not (isinstance(record, QAEvent) and record.kind == "AnswerStored" and record.category == "WA"):
            continue
        bad_locations = conflicts.get(record.payload or "")
        if not bad_locations or record.participant not in we_answers:
            continue
        nearby = [
            (abs((at - record.at).total_seconds()), idx, label)
            for at, idx, label in we_answers[record.participant]
            if abs((at - record.at).total_seconds()) <= tolerance_s
        ]
        if not nearby:
            continue
        _, idx, label = min(nearby, key=lambda t: t[0])
        if label in bad_locations:
            flags.append(
                QualityFlag(
                    record.participant, "ImplausibleAnswer", (i, idx), record.at,
                    f"activity {record.payload!r} at location {label!r}",
                )
            )
    return flags


def run_quality_checks(
    log: EventLog,
    timeline: Optional[Timeline] = None,
    *,
    location_compat: Optional[Mapping[str, set[str]]] = None,
    activity_conflicts: Optional[Mapping[str, frozenset[str]]] = None,
    gap_threshold: int = DEFAULT_SENSOR_GAP,
    burst_count: int = DEFAULT_BURST_COUNT,
    burst_window_s: float = DEFAULT_BURST_WINDOW_S,
) -> list[QualityFlag]:
    """All misbehavior and data-error signatures found in the log.

    ``SensorGap`` detection needs the compiled timeline for the expected
    cadence and is skipped when none is given.
    """
    if not len(log):
        return []
    flags = _missing_day_flags(log)
    flags += _answer_burst_flags(log, burst_count, burst_window_s)
    flags += _location_mismatch_flags(log, location_compat)
    if timeline is not None:
        flags += _sensor_gap_flags(log, timeline, gap_threshold)
    flags += _implausible_answer_flags(log, activity_conflicts or DEFAULT_ACTIVITY_CONFLICTS)
    flags.sort(key=lambda f: (f.at, f.participant, f.kind))
    return flags


# --------------------------------------------------------------------------
# Dashboard summary (panels A-F)


@dataclass(frozen=True)
class DashboardSummary:
    quality_params: dict  # A: thresholds currently in force
    participant_count: Optional[int]  # B: researcher only
    progress: dict  # C: days covered / left
    delivery_rate: Optional[float]  # D
    answers: dict  # E: experiment-wide or self slice
    sensors: dict  # F: per-sensor collection stats
    role: str
    participant: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "quality_params": self.quality_params,
            "participant_count": self.participant_count,
            "progress": self.progress,
            "delivery_rate": self.delivery_rate,
            "answers": self.answers,
            "sensors": self.sensors,
            "role": self.role,
            "participant": self.participant,
        }


def _plan_window(plan: ExperimentPlan) -> Optional[tuple[datetime, datetime]]:
    starts, ends = [], []
    for _, _, qc in plan.iter_question_collections():
        starts.append(qc.dtstart)
        ends.append(qc.dtend)
    for _, _, sc in plan.iter_sensor_collections():
        starts.append(sc.dtstart)
        ends.append(sc.dtend)
    if not starts:
        return None
    return min(starts), max(ends)


def dashboard_summary(
    log: EventLog,
    plan: ExperimentPlan,
    params: QualityParameters,
    role: str = "Researcher",
    participant: Optional[str] = None,
    now: Optional[datetime] = None,
) -> DashboardSummary:
    """The six summary panels, scoped by role.

    Researchers see experiment-wide numbers including the live participant
    count; participants see only their own slice and no count at all.
    """
    if role == "Participant" and participant is None:
        raise AuthorizationError("participant view requires the participant id")
    scoped = role == "Participant"
    records = [r for r in log if not scoped or r.participant == participant]

    if now is None:
        now = max((r.at for r in log), default=datetime.now(timezone.utc))
    window = _plan_window(plan)
    if window is not None:
        start, end = window
        total_days = max((end - start).days, 0)
        covered = min(max((now - start).days + (1 if now > start else 0), 0), total_days)
        progress = {"days_covered": covered, "days_left": max(total_days - covered, 0)}
    else:
        progress = {"days_covered": 0, "days_left": 0}

    generated = sum(1 for r in records if isinstance(r, QAEvent) and r.kind == "QuestionGenerated")
    delivered = sum(1 for r in records if isinstance(r, QAEvent) and r.kind == "QuestionDelivered")
    stored_events = [r for r in records if isinstance(r, QAEvent) and r.kind == "AnswerStored"]
    delivery_rate = delivered / generated if generated else None

    pids = sorted({r.participant for r in records}) if records else []
    reactions, completions = [], []
    for pid in pids:
        metrics = participant_metrics(EventLog(records), pid)
        if metrics.avg_reaction is not None:
            reactions.append(metrics.avg_reaction)
        if metrics.avg_completion is not None:
            completions.append(metrics.avg_completion)
    answers = {
        "answered_total": len(stored_events),
        "answer_rate": len({(e.participant, e.ref) for e in stored_events}) / delivered if delivered else None,
        "avg_reaction_s": sum(reactions) / len(reactions) if reactions else None,
        "avg_completion_s": sum(completions) / len(completions) if completions else None,
    }

    sensor_counts: dict[str, int] = {}
    for r in records:
        if isinstance(r, SensorReading):
            sensor_counts[r.sensor] = sensor_counts.get(r.sensor, 0) + 1
    n_scope = 1 if scoped else max(len({r.participant for r in log}), 1)
    sensors: dict[str, dict] = {}
    for _, _, sc in plan.iter_sensor_collections():
        cadence = f"every {sc.rrule.interval} {sc.rrule.frequency.value.lower()}"
        expected_instants = expand(sc.rrule, sc.dtstart, min(sc.dtend, now)) if now > sc.dtstart else []
        expected = len(expected_instants) * n_scope
        observed = sensor_counts.get(sc.sensor.name, 0)
        sensors[sc.sensor.name] = {
            "readings": observed,
            "cadence": cadence,
            "rate": (observed / expected) if expected else None,
        }

    participant_count = None if scoped else len({r.participant for r in log})
    return DashboardSummary(
        quality_params={
            "max_unanswered": params.max_unanswered,
            "max_avg_completion_time": params.max_avg_completion_time,
            "max_avg_response_time": params.max_avg_response_time,
            "medium_band": list(params.medium_band),
        },
        participant_count=participant_count,
        progress=progress,
        delivery_rate=delivery_rate,
        answers=answers,
        sensors=sensors,
        role=role,
        participant=participant,
    )
