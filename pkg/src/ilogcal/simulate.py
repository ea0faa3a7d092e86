"""Participant simulator: QA lifecycle events and synthetic sensor streams.

Given a compiled timeline, per-participant ground-truth life sequences and
a :class:`BehaviorModel`, the simulator plays every occurrence forward:

* question occurrences always produce ``QuestionGenerated`` and (delivery
  permitting) ``QuestionDelivered``; the participant then either answers
  or lets the question lapse into ``Missed`` at the end of its window;
* answering behavior is drawn per context cell (spatial label, social
  label, weekday, day period): an *attentive* interaction, with
  probability ``p_correct``, reacts quickly (log-normal, clamped under
  the 30-minute quality horizon) and stores the ground-truth label; an
  inattentive one reacts past the horizon and stores a uniformly wrong
  option;
* sensor occurrences produce readings consistent with the ground truth
  (location readings carry the current spatial label); on-change sensors
  fire on ground-truth context transitions instead of on the schedule.

Everything is driven by per-participant generators seeded from
(model seed, participant id), so identical inputs give byte-identical
logs.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Mapping, Optional, Sequence, Union
from zoneinfo import ZoneInfo

from .context import LifeSequence, ParticipantProfile, SituationalContext, context_at
from .events import EventLog, OccurrenceRef, QAEvent, SensorReading
from .plan import Question, QuestionType, Sensor, SensorType
from .schedule import Occurrence, Timeline

QUALITY_HORIZON_S = 30 * 60

#: Sensor catalog: name -> (family, cadence note, fires on change).
SENSOR_CATALOG: dict[str, tuple[SensorType, str, bool]] = {
    "Accelerometer": (SensorType.MOTION, "up to 10 samples per second", False),
    "Gyroscope": (SensorType.MOTION, "up to 10 samples per second", False),
    "Light": (SensorType.AMBIENT, "up to 10 samples per second", False),
    "Location": (SensorType.LOCATION, "once every minute", False),
    "GPS": (SensorType.LOCATION, "once every minute", False),
    "Magnetic Field": (SensorType.INERTIAL, "up to 10 samples per second", False),
    "Pressure": (SensorType.AMBIENT, "up to 10 samples per second", False),
    "Airplane Mode": (SensorType.SOFTWARE, "on change", True),
    "Battery Charge": (SensorType.SOFTWARE, "on change", True),
    "Battery Level": (SensorType.SOFTWARE, "on change", True),
    "Bluetooth Devices": (SensorType.SOFTWARE, "once every minute", False),
    "Bluetooth LE Devices": (SensorType.SOFTWARE, "once every minute", False),
    "Cellular Network Info": (SensorType.SOFTWARE, "once every minute", False),
    "Doze Mode": (SensorType.SOFTWARE, "on change", True),
    "Headset Status": (SensorType.SOFTWARE, "on change", True),
    "Movement Activity Label": (SensorType.SOFTWARE, "once every 30 seconds", False),
    "Music Playback": (SensorType.SOFTWARE, "on change", True),
    "Notifications Received": (SensorType.SOFTWARE, "on change", True),
    "Proximity": (SensorType.SOFTWARE, "up to 10 samples per second", False),
    "Ring Mode": (SensorType.SOFTWARE, "on change", True),
    "Running Applications": (SensorType.SOFTWARE, "once every 5 seconds", False),
    "Screen Status": (SensorType.SOFTWARE, "on change", True),
    "Step Counter": (SensorType.SOFTWARE, "up to 10 samples per second", False),
    "Step Detection": (SensorType.SOFTWARE, "on change", True),
    "Touch Event": (SensorType.SOFTWARE, "on change", True),
    "User Presence": (SensorType.SOFTWARE, "on change", True),
    "WIFI Network Connected": (SensorType.SOFTWARE, "on change", True),
    "WIFI Networks Available": (SensorType.SOFTWARE, "once every minute", False),
}

#: Default label vocabularies for synthetic ground truth.
LOCATION_LABELS = [
    "Home Apartment/room",
    "Home Relatives",
    "House Friends/others",
    "University Classroom/library",
    "University Canteen",
    "Restaurant/pub",
    "In the street",
    "Another indoor place",
    "Another outdoor place",
]
ACTIVITY_LABELS = [
    "studying", "eating", "meeting", "driving", "walking",
    "watching tv", "shopping", "sport", "resting",
]
SOCIAL_LABELS = ["Alone", "Partner", "Roommates", "Classmates", "Relatives", "Friends", "Colleagues/other"]
MOOD_LABELS = ["happy", "good", "neutral", "bad", "sad"]

#: Activity labels that cannot plausibly co-occur with a spatial label;
#: the truth generator avoids these pairs, the quality checks flag them.
DEFAULT_ACTIVITY_CONFLICTS: dict[str, frozenset[str]] = {
    "driving": frozenset({"University Classroom/library"}),
}

#: Share of answers given quickly and truthfully per spatial label, used
#: by the default model (restaurants drag quality down, campus holds it up).
DEFAULT_LOCATION_QUALITY = {
    "Home Apartment/room": 0.4530,
    "Home Relatives": 0.4147,
    "House Friends/others": 0.2976,
    "University Classroom/library": 0.5202,
    "University Canteen": 0.4000,
    "Restaurant/pub": 0.2887,
    "In the street": 0.3958,
    "Another indoor place": 0.2693,
    "Another outdoor place": 0.2868,
}


class CoverageError(ValueError):
    """Ground truth lacks labels for a question category in the plan."""


def day_period(hour: int) -> str:
    """Fixed four-band day segmentation over the local hour."""
    if 6 <= hour <= 11:
        return "Morning"
    if 12 <= hour <= 17:
        return "Afternoon"
    if 18 <= hour <= 23:
        return "Evening"
    return "Night"


@dataclass(frozen=True)
class CellParams:
    p_answer: float = 0.9
    reaction_mu: float = 3.8  # log-seconds; exp(3.8) ~ 45 s
    reaction_sigma: float = 0.8
    p_correct: float = 0.45

    def validate(self) -> None:
        if not (0.0 <= self.p_answer <= 1.0 and 0.0 <= self.p_correct <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.reaction_sigma <= 0:
            raise ValueError("reaction_sigma must be positive")


@dataclass(frozen=True)
class CellRule:
    """Partial match over (spatial, social, weekday, period) plus overrides."""

    we: Optional[str] = None
    wo: Optional[str] = None
    weekday: Optional[int] = None
    period: Optional[str] = None
    params: dict = field(default_factory=dict)

    def matches(self, we: Optional[str], wo: Optional[str], weekday: int, period: str) -> bool:
        return (
            (self.we is None or self.we == we)
            and (self.wo is None or self.wo == wo)
            and (self.weekday is None or self.weekday == weekday)
            and (self.period is None or self.period == period)
        )


@dataclass(frozen=True)
class BehaviorModel:
    """Context-conditioned answering behavior; first matching rule wins."""

    seed: int = 0
    default: CellParams = CellParams()
    rules: tuple[CellRule, ...] = ()
    p_deliver: float = 1.0
    delivery_latency_s: float = 5.0
    completion_mu: float = 3.4  # exp(3.4) ~ 30 s
    completion_sigma: float = 0.6

    def params_for(self, we: Optional[str], wo: Optional[str], weekday: int, period: str) -> CellParams:
        for rule in self.rules:
            if rule.matches(we, wo, weekday, period):
                return replace(self.default, **rule.params)
        return self.default


def default_behavior_model(seed: int = 0) -> BehaviorModel:
    """Model whose per-location attentiveness follows the default quality
    shares (low in bars and restaurants, high on campus)."""
    rules = tuple(
        CellRule(we=label, params={"p_correct": share}) for label, share in DEFAULT_LOCATION_QUALITY.items()
    )
    return BehaviorModel(seed=seed, rules=rules)


def behavior_model_to_dict(model: BehaviorModel) -> dict:
    return {
        "seed": model.seed,
        "default": {
            "p_answer": model.default.p_answer,
            "reaction_mu": model.default.reaction_mu,
            "reaction_sigma": model.default.reaction_sigma,
            "p_correct": model.default.p_correct,
        },
        "rules": [
            {"we": r.we, "wo": r.wo, "weekday": r.weekday, "period": r.period, "params": dict(r.params)}
            for r in model.rules
        ],
        "p_deliver": model.p_deliver,
        "delivery_latency_s": model.delivery_latency_s,
        "completion_mu": model.completion_mu,
        "completion_sigma": model.completion_sigma,
    }


def behavior_model_from_dict(raw: dict) -> BehaviorModel:
    default = CellParams(**raw.get("default", {}))
    rules = tuple(
        CellRule(
            we=r.get("we"), wo=r.get("wo"), weekday=r.get("weekday"), period=r.get("period"),
            params=dict(r.get("params", {})),
        )
        for r in raw.get("rules", ())
    )
    return BehaviorModel(
        seed=raw.get("seed", 0),
        default=default,
        rules=rules,
        p_deliver=raw.get("p_deliver", 1.0),
        delivery_latency_s=raw.get("delivery_latency_s", 5.0),
        completion_mu=raw.get("completion_mu", 3.4),
        completion_sigma=raw.get("completion_sigma", 0.6),
    )


# --------------------------------------------------------------------------
# Ground-truth synthesis


def generate_life_sequence(
    participant: str,
    start: datetime,
    end: datetime,
    seed: int = 0,
    locations: Sequence[str] = tuple(LOCATION_LABELS),
    activities: Sequence[str] = tuple(ACTIVITY_LABELS),
    socials: Sequence[str] = tuple(SOCIAL_LABELS),
    gap_chance: float = 0.1,
) -> LifeSequence:
    """Synthesize a plausible, gap-sprinkled life sequence for one person."""
    rng = random.Random(_derive_seed(seed, participant, "truth"))
    contexts = []
    cursor = start
    index = 0
    while cursor < end:
        span = timedelta(minutes=rng.randint(30, 240))
        ctx_end = min(cursor + span, end)
        social = rng.choice(list(socials))
        place = rng.choice(list(locations))
        activity = rng.choice(list(activities))
        if place in DEFAULT_ACTIVITY_CONFLICTS.get(activity, ()):
            activity = "resting"
        contexts.append(
            SituationalContext(
                id=f"{participant}-c{index}",
                start=cursor,
                end=ctx_end,
                we=place,
                wa=(activity,),
                wi=rng.choice(MOOD_LABELS),
                wo=() if social == "Alone" else (social,),
            )
        )
        index += 1
        cursor = ctx_end
        if rng.random() < gap_chance:
            cursor += timedelta(minutes=rng.randint(5, 30))
    return LifeSequence(participant, tuple(contexts), purpose="synthetic everyday life")


def _derive_seed(seed: int, *parts: str) -> int:
    digest = hashlib.sha256(":".join([str(seed), *parts]).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# --------------------------------------------------------------------------
# Simulation


def _check_coverage(timeline: Timeline, ground_truth: Mapping[str, LifeSequence]) -> None:
    categories = {
        info.question.qcategory.value
        for info in timeline.collections.values()
        if info.question is not None and info.accepted
    }
    for pid, seq in ground_truth.items():
        for category in sorted(categories):
            if not any(ctx.label_for(category) is not None for ctx in seq.contexts):
                raise CoverageError(
                    f"participant {pid}: ground truth provides no {category} labels"
                )


def _wrong_option(rng: random.Random, question: Question, truth: Optional[str]) -> str:
    options = [o for o in question.answer_options if o != truth]
    if options:
        return rng.choice(options)
    if question.answer_options:
        return question.answer_options[0]  # only the truth itself is offered
    return "unclear"  # free text fallback


def _reading_value(rng: random.Random, sensor: Sensor, ctx: Optional[SituationalContext]):
    family = sensor.sensor_type
    name = sensor.name
    catalog = SENSOR_CATALOG.get(name)
    if catalog is not None:
        family = catalog[0]
    if family is SensorType.LOCATION:
        return ctx.we if ctx is not None and ctx.we else "unknown"
    if family is SensorType.SOCIAL:
        return float(len(ctx.wo)) if ctx is not None else 0.0
    if family is SensorType.SOFTWARE:
        anchor = ctx.we if ctx is not None and ctx.we else "nowhere"
        return f"state:{anchor}"
    # Summarized numeric sample for motion/inertial/ambient/device sensors.
    return round(rng.gauss(1.0, 0.25), 4)


def run_simulation(
    timeline: Timeline,
    profiles: Union[Mapping[str, ParticipantProfile], Iterable[ParticipantProfile]],
    ground_truth: Mapping[str, LifeSequence],
    model: BehaviorModel,
) -> EventLog:
    """Play the timeline: one QA lifecycle per question occurrence, one
    reading per sensor occurrence, plus on-change readings at context
    transitions.  Deterministic for a fixed (timeline, truth, model)."""
    model.default.validate()
    if not isinstance(profiles, Mapping):
        profiles = {p.id: p for p in profiles}
    _check_coverage(timeline, ground_truth)

    log = EventLog()
    for pid in timeline.participants:
        profile = profiles.get(pid, ParticipantProfile(id=pid))
        truth = ground_truth.get(pid, LifeSequence(pid))
        rng = random.Random(_derive_seed(model.seed, pid, "behavior"))
        tz = ZoneInfo(profile.timezone)
        for occ in timeline.occurrences[pid]:
            if occ.cancelled:
                continue
            info = timeline.collections.get(
                (occ.source.calendar_id, occ.source.collection_id, occ.source.kind)
            )
            if occ.source.kind == "question" and info is not None and info.question is not None:
                _simulate_question(log, pid, occ, info.question, truth, model, rng, tz)
            elif info is not None and info.sensor is not None:
                catalog = SENSOR_CATALOG.get(info.sensor.name)
                if catalog is not None and catalog[2]:
                    continue  # on-change sensors do not follow the schedule
                ctx = context_at(truth, occ.scheduled_at)
                log.records.append(
                    SensorReading(
                        participant=pid,
                        sensor=info.sensor.name,
                        at=occ.scheduled_at,
                        value=_reading_value(rng, info.sensor, ctx),
                        cadence_source=OccurrenceRef(
                            occ.source.calendar_id, occ.source.collection_id, occ.seq_no
                        ),
                    )
                )
        _emit_on_change(log, pid, timeline, truth)
    log.sort()
    return log


def _simulate_question(
    log: EventLog,
    pid: str,
    occ: Occurrence,
    question: Question,
    truth: LifeSequence,
    model: BehaviorModel,
    rng: random.Random,
    tz: ZoneInfo,
) -> None:
    ref = OccurrenceRef(occ.source.calendar_id, occ.source.collection_id, occ.seq_no)
    category = question.qcategory.value
    diary = "TimeDiary" if category in ("WE", "WA", "WI", "WO", "WU") else "Task"
    generated_at = occ.scheduled_at
    log.records.append(QAEvent(pid, ref, "QuestionGenerated", generated_at, category=category, diary_or_task=diary))

    if rng.random() >= model.p_deliver:
        log.records.append(QAEvent(pid, ref, "Missed", occ.window_end, category=category, diary_or_task=diary))
        return
    delivered_at = generated_at + timedelta(seconds=model.delivery_latency_s)
    log.records.append(QAEvent(pid, ref, "QuestionDelivered", delivered_at, category=category, diary_or_task=diary))

    ctx = context_at(truth, delivered_at)
    we = ctx.we if ctx is not None else None
    wo = ctx.label_for("WO") if ctx is not None else None
    local = delivered_at.astimezone(tz)
    params = model.params_for(we, wo, local.isoweekday(), day_period(local.hour))

    if rng.random() >= params.p_answer:
        log.records.append(QAEvent(pid, ref, "Missed", occ.window_end, category=category, diary_or_task=diary))
        return

    attentive = rng.random() < params.p_correct
    truth_label = ctx.label_for(category) if ctx is not None else None
    if attentive and truth_label is not None:
        # Attentive interactions complete inside the 30-minute horizon.
        reaction = min(rng.lognormvariate(params.reaction_mu, params.reaction_sigma), 1200.0)
        completion = min(rng.lognormvariate(model.completion_mu, model.completion_sigma), 300.0)
        payload, correct = truth_label, True
    else:
        # Inattentive ones never do: the reaction alone blows past it.
        reaction = QUALITY_HORIZON_S + 60.0 + rng.lognormvariate(params.reaction_mu, params.reaction_sigma)
        completion = min(rng.lognormvariate(model.completion_mu, model.completion_sigma), 300.0)
        payload, correct = _wrong_option(rng, question, truth_label), False
        if payload == truth_label:  # single-option questions cannot be wrong
            correct = True
    started_at = delivered_at + timedelta(seconds=reaction)
    stored_at = started_at + timedelta(seconds=completion)
    log.records.append(QAEvent(pid, ref, "AnswerStarted", started_at, category=category, diary_or_task=diary))
    log.records.append(
        QAEvent(
            pid, ref, "AnswerStored", stored_at,
            payload=payload, category=category, diary_or_task=diary, correct=correct,
        )
    )


def _emit_on_change(log: EventLog, pid: str, timeline: Timeline, truth: LifeSequence) -> None:
    on_change_infos = [
        info
        for key, info in sorted(timeline.collections.items())
        if info.sensor is not None and SENSOR_CATALOG.get(info.sensor.name, (None, "", False))[2]
    ]
    for info in on_change_infos:
        for ctx in truth.contexts:
            if info.dtstart <= ctx.start < info.dtend:
                log.records.append(
                    SensorReading(
                        participant=pid,
                        sensor=info.sensor.name,
                        at=ctx.start,
                        value=f"state:{ctx.we or 'nowhere'}",
                        cadence_source=None,
                    )
                )


# --------------------------------------------------------------------------
# Fault injection


@dataclass(frozen=True)
class BlackoutDay:
    day: date


@dataclass(frozen=True)
class SensorDropout:
    sensor: str
    span: tuple[datetime, datetime]


@dataclass(frozen=True)
class AnswerBurst:
    participant: str
    span: tuple[datetime, datetime]


Fault = Union[BlackoutDay, SensorDropout, AnswerBurst]


def inject_fault(log: EventLog, fault: Fault) -> EventLog:
    """Return a copy of the log with one misbehavior signature injected.

    ``BlackoutDay`` drops every record dated that UTC day; ``SensorDropout``
    drops one sensor's readings inside the span; ``AnswerBurst`` re-times a
    participant's answer events in the span into the span's final minute.
    """
    if isinstance(fault, BlackoutDay):
        records = [r for r in log.records if r.at.astimezone(timezone.utc).date() != fault.day]
        return EventLog(records)
    if isinstance(fault, SensorDropout):
        lo, hi = fault.span
        records = [
            r
            for r in log.records
            if not (isinstance(r, SensorReading) and r.sensor == fault.sensor and lo <= r.at < hi)
        ]
        return EventLog(records)

    lo, hi = fault.span
    burst = [
        r
        for r in log.records
        if isinstance(r, QAEvent)
        and r.participant == fault.participant
        and r.kind in ("AnswerStarted", "AnswerStored")
        and lo <= r.at < hi
    ]
    burst_ids = set(map(id, burst))
    others = [r for r in log.records if id(r) not in burst_ids]
    window_start = hi - timedelta(seconds=60)
    step = 60.0 / max(len(burst), 1)
    retimed = [
        replace(event, at=window_start + timedelta(seconds=i * step))
        for i, event in enumerate(sorted(burst, key=lambda e: (e.at, e.kind)))
    ]
    out = EventLog(others + retimed)
    out.sort()
    return out
