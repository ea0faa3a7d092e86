"""Shared test helpers: independent oracles and plan builders."""

from __future__ import annotations

import calendar as _calendar
import random
from datetime import datetime, timedelta, timezone

import numpy as np

from ilogcal.plan import (
    Calendar,
    ContextCollection,
    ExperimentPlan,
    Frequency,
    Question,
    QuestionCategory,
    QuestionCollection,
    QuestionType,
    RecurrenceRule,
    Sensor,
    SensorCollection,
    SensorType,
)

UTC = timezone.utc

FIXED_UNIT_MS = {
    Frequency.MILLISECOND: 1,
    Frequency.SECOND: 1000,
    Frequency.MINUTE: 60_000,
    Frequency.HOUR: 3_600_000,
    Frequency.DAILY: 86_400_000,
    Frequency.WEEKLY: 7 * 86_400_000,
}


def expand_oracle(rrule: RecurrenceRule, dtstart: datetime, dtend: datetime) -> list[datetime]:
    """Brute-force expansion: step the window at the finest unit and keep
    the instants that match the rule, independent of the production path."""
    if rrule.frequency in FIXED_UNIT_MS:
        unit_ms = FIXED_UNIT_MS[rrule.frequency]
        start_ms = int(dtstart.timestamp() * 1000)
        total_ms = int((dtend - dtstart).total_seconds() * 1000)
        n_steps = -(-total_ms // unit_ms)  # ceil: steps whose instant is < dtend
        steps = np.arange(n_steps, dtype=np.int64)
        matching = steps[steps % rrule.interval == 0][: rrule.count]
        return [
            datetime.fromtimestamp((start_ms + int(s) * unit_ms) / 1000.0, tz=UTC)
            for s in matching
        ]

    # Monthly/yearly: walk day by day and test each date for membership.
    out = []
    day = dtstart
    while day < dtend and len(out) < rrule.count:
        if _matches_calendar_rule(rrule, dtstart, day):
            out.append(day)
        day += timedelta(days=1)
    return out


def _matches_calendar_rule(rrule: RecurrenceRule, dtstart: datetime, candidate: datetime) -> bool:
    if candidate < dtstart:
        return False
    if rrule.frequency is Frequency.MONTHLY:
        months = (candidate.year - dtstart.year) * 12 + candidate.month - dtstart.month
        if months % rrule.interval != 0:
            return False
        expected_day = min(dtstart.day, _calendar.monthrange(candidate.year, candidate.month)[1])
        return candidate.day == expected_day
    years = candidate.year - dtstart.year
    if years % rrule.interval != 0 or candidate.month != dtstart.month:
        return False
    expected_day = min(dtstart.day, _calendar.monthrange(candidate.year, candidate.month)[1])
    return candidate.day == expected_day


def random_rule_and_window(rng: random.Random) -> tuple[RecurrenceRule, datetime, datetime]:
    """A random rule with a window sized so the stepping oracle stays cheap."""
    frequency = rng.choice(list(Frequency))
    base = datetime(2020, 1, 1, tzinfo=UTC) + timedelta(
        days=rng.randint(0, 1200), hours=rng.randint(0, 23), minutes=rng.randint(0, 59)
    )
    if frequency is Frequency.MILLISECOND:
        window = timedelta(seconds=rng.randint(1, 30))
        interval = rng.randint(1, 50)
    elif frequency is Frequency.SECOND:
        window = timedelta(minutes=rng.randint(1, 120))
        interval = rng.randint(1, 90)
    elif frequency is Frequency.MINUTE:
        window = timedelta(hours=rng.randint(1, 24 * 60))
        interval = rng.randint(1, 120)
    elif frequency is Frequency.HOUR:
        window = timedelta(days=rng.randint(1, 60))
        interval = rng.randint(1, 72)
    else:
        window = timedelta(days=rng.randint(1, 60))
        interval = rng.randint(1, 12)
    count = rng.choice([1, 2, 3, rng.randint(1, 500), rng.randint(1, 100_000)])
    return RecurrenceRule(frequency, interval, count), base, base + window


# --------------------------------------------------------------------------
# Plan builders


def ts(text: str) -> datetime:
    return datetime.strptime(text, "%Y%m%dT%H%M%SZ").replace(tzinfo=UTC)


def diary_question(cid: int, qid: int, category: QuestionCategory, content: str, options, rrule, dtstart, dtend, status=True):
    return QuestionCollection(
        cid=cid,
        dtstart=dtstart,
        dtend=dtend,
        rrule=rrule,
        question=Question(qid, category, content, tuple(options), QuestionType.SINGLE_CHOICE),
        status=status,
    )


def two_phase_diary_plan() -> ExperimentPlan:
    """30-minute cadence for two weeks, hourly for the next two."""
    start = ts("20201102T080000Z")
    mid = ts("20201116T080000Z")
    end = ts("20201130T080000Z")
    questions = (
        diary_question(
            1, 1, QuestionCategory.WA, "What are you doing?",
            ["studying", "eating", "resting"],
            RecurrenceRule(Frequency.MINUTE, 30, 672), start, mid,
        ),
        diary_question(
            2, 2, QuestionCategory.WA, "What are you doing?",
            ["studying", "eating", "resting"],
            RecurrenceRule(Frequency.HOUR, 1, 336), mid, end,
        ),
    )
    calendar = Calendar(1, (ContextCollection(1, questions, ()),))
    return ExperimentPlan("cohort-demo", (calendar,))


def small_sim_plan(
    days: int = 2,
    cadence_minutes: int = 30,
    categories=(QuestionCategory.WE, QuestionCategory.WA, QuestionCategory.WO),
    with_sensors: bool = True,
    options_by_category=None,
    start: datetime = None,
) -> ExperimentPlan:
    start = start or datetime(2020, 11, 2, 8, 0, tzinfo=UTC)
    end = start + timedelta(days=days)
    per_day = (24 * 60) // cadence_minutes
    count = per_day * days
    defaults = {
        QuestionCategory.WE: ("Where are you?", [
            "Home Apartment/room", "University Classroom/library", "Restaurant/pub", "In the street",
        ]),
        QuestionCategory.WA: ("What are you doing?", ["studying", "eating", "driving", "resting"]),
        QuestionCategory.WO: ("Who is with you?", ["Alone", "Friends", "Classmates"]),
        QuestionCategory.WI: ("What is your mood?", ["happy", "neutral", "sad"]),
    }
    if options_by_category:
        defaults.update(options_by_category)
    questions = []
    for i, category in enumerate(categories, start=1):
        content, options = defaults[category]
        questions.append(
            diary_question(
                i, i, category, content, options,
                RecurrenceRule(Frequency.MINUTE, cadence_minutes, count), start, end,
            )
        )
    sensors = ()
    if with_sensors:
        sensors = (
            SensorCollection(
                101, start, end, RecurrenceRule(Frequency.MINUTE, 10, (24 * 6) * days),
                Sensor("Location", "location fix once per schedule tick", SensorType.LOCATION),
            ),
            SensorCollection(
                102, start, end, RecurrenceRule(Frequency.DAILY, 1, days),
                Sensor("Screen Status", "screen on/off transitions", SensorType.SOFTWARE),
            ),
        )
    calendar = Calendar(1, (ContextCollection(1, tuple(questions), sensors),))
    return ExperimentPlan("cohort-sim", (calendar,))


def random_plan(rng: random.Random) -> ExperimentPlan:
    """A random structurally valid plan in canonical (sorted) order."""
    def rand_text() -> str:
        alphabet = "abcdefghijklmnopqrstuvwxyz ,;\\=:éü中文"
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))

    def rand_rrule() -> RecurrenceRule:
        return RecurrenceRule(
            rng.choice(list(Frequency)), rng.randint(1, 10_000), rng.randint(1, 1_000_000)
        )

    def rand_window() -> tuple[datetime, datetime]:
        start = datetime(2020, 1, 1, tzinfo=UTC) + timedelta(
            days=rng.randint(0, 3000), seconds=rng.randint(0, 86_399)
        )
        return start, start + timedelta(seconds=rng.randint(1, 200 * 86_400))

    def rand_question(cid: int) -> QuestionCollection:
        qtype = rng.choice(list(QuestionType))
        if qtype is QuestionType.FREE_TEXT:
            options = ()
        elif qtype is QuestionType.DICHOTOMOUS:
            options = ("yes came through", rand_text() + "x")
        else:
            options = tuple(f"option {i} {rand_text()}" for i in range(rng.randint(1, 5)))
        dtstart, dtend = rand_window()
        extensions = ()
        if rng.random() < 0.3:
            extensions = (("X-CUSTOM-NOTE", "free/form;values,kept verbatim"),)
        return QuestionCollection(
            cid=cid,
            dtstart=dtstart,
            dtend=dtend,
            rrule=rand_rrule(),
            question=Question(
                rng.randint(0, 10_000),
                rng.choice(list(QuestionCategory)),
                rand_text(),
                options,
                qtype,
                rand_text() if rng.random() < 0.3 else None,
            ),
            status=rng.random() < 0.9,
            extensions=extensions,
        )

    def rand_sensor(sid: int) -> SensorCollection:
        dtstart, dtend = rand_window()
        return SensorCollection(
            sid=sid,
            dtstart=dtstart,
            dtend=dtend,
            rrule=rand_rrule(),
            sensor=Sensor("sensor " + rand_text(), rand_text(), rng.choice(list(SensorType))),
        )

    calendars = []
    for cal_id in sorted(rng.sample(range(100), rng.randint(1, 4))):
        contexts = []
        for cc_id in sorted(rng.sample(range(100), rng.randint(0, 3))):
            q_ids = sorted(rng.sample(range(1000), rng.randint(0, 4)))
            s_ids = sorted(rng.sample(range(1000), rng.randint(0, 3)))
            contexts.append(
                ContextCollection(
                    cc_id,
                    tuple(rand_question(cid) for cid in q_ids),
                    tuple(rand_sensor(sid) for sid in s_ids),
                )
            )
        calendars.append(Calendar(cal_id, tuple(contexts)))
    return ExperimentPlan("cohort " + rand_text().strip() + "x", tuple(calendars))
