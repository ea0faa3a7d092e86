import random
from datetime import date, datetime, timedelta, timezone

import pytest

from ilogcal.context import LifeSequence, ParticipantProfile, SituationalContext
from ilogcal.events import EventLog, OccurrenceRef, QAEvent, SensorReading
from ilogcal.plan import QuestionCategory
from ilogcal.quality import (
    AuthorizationError,
    ParticipantMetrics,
    QualityParameters,
    compliance_heatmap,
    dashboard_summary,
    participant_metrics,
    rank_participant,
    run_quality_checks,
)
from ilogcal.schedule import compile_plan
from ilogcal.simulate import (
    AnswerBurst,
    BehaviorModel,
    BlackoutDay,
    CellParams,
    inject_fault,
    run_simulation,
)

import helpers

UTC = timezone.utc
T0 = datetime(2020, 11, 2, 0, 0, tzinfo=UTC)

PARAMS = QualityParameters(
    max_unanswered=10, max_avg_completion_time=120.0, max_avg_response_time=300.0,
    medium_band=(0.0, 0.5),
)


def metrics(unanswered=0, reaction=30.0, completion=20.0):
    return ParticipantMetrics("p0", unanswered, reaction, completion)


def test_all_within_thresholds_is_good():
    assert rank_participant(metrics(), PARAMS).verdict == "Good"


def test_double_the_unanswered_budget_is_poor():
    assert rank_participant(metrics(unanswered=20), PARAMS).verdict == "Poor"


def test_slightly_over_budget_is_medium():
    ranking = rank_participant(metrics(unanswered=11), PARAMS)
    assert ranking.verdict == "Medium"


def test_ranking_is_deterministic():
    m = metrics(unanswered=11, reaction=299.0)
    assert rank_participant(m, PARAMS) == rank_participant(m, PARAMS)


def test_ranking_monotone_under_metric_increase():
    order = {"Good": 0, "Medium": 1, "Poor": 2}
    rng = random.Random(17)
    for _ in range(300):
        m1 = metrics(
            unanswered=rng.randint(0, 25),
            reaction=rng.uniform(0, 600),
            completion=rng.uniform(0, 300),
        )
        m2 = ParticipantMetrics(
            "p0",
            m1.unanswered_count + rng.randint(0, 10),
            m1.avg_reaction + rng.uniform(0, 200),
            m1.avg_completion + rng.uniform(0, 100),
        )
        v1 = rank_participant(m1, PARAMS).verdict
        v2 = rank_participant(m2, PARAMS).verdict
        assert order[v2] >= order[v1]


def test_participant_metrics_counts_missed(sim_bundle):
    log = sim_bundle["log"]
    m = participant_metrics(log, "p0")
    missed = sum(1 for e in log.qa_events() if e.participant == "p0" and e.kind == "Missed")
    assert m.unanswered_count == missed
    assert m.avg_reaction is not None and m.avg_reaction > 0


# --------------------------------------------------------------------------
# Heatmap


def perfect_log(days=2, participants=2):
    plan = helpers.small_sim_plan(days=days, categories=(QuestionCategory.WE,), with_sensors=False)
    people = [ParticipantProfile(f"p{i}") for i in range(participants)]
    timeline = compile_plan(plan, people)
    truth = {
        p.id: LifeSequence(
            p.id,
            (SituationalContext(f"{p.id}-a", T0, T0 + timedelta(days=days + 1),
                                we="Home Apartment/room", wa=("resting",)),),
        )
        for p in people
    }
    model = BehaviorModel(seed=2, default=CellParams(p_answer=1.0, p_correct=1.0))
    return run_simulation(timeline, people, truth, model), timeline


def test_perfect_simulation_heatmap_is_all_ones():
    log, _ = perfect_log()
    heatmap = compliance_heatmap(log)
    assert heatmap.participants == ["p0", "p1"]
    for pid in heatmap.participants:
        for day in heatmap.days:
            rate = heatmap.rate(pid, day)
            if rate is not None:
                assert rate == 1.0
    assert heatmap.flagged_days == []


def test_blackout_day_flags_empty_column():
    log, _ = perfect_log(days=3)
    day = date(2020, 11, 3)
    faulted = inject_fault(log, BlackoutDay(day))
    heatmap = compliance_heatmap(faulted)
    assert day in heatmap.flagged_days
    for pid in heatmap.participants:
        assert heatmap.rate(pid, day) is None


def test_heatmap_cells_match_brute_force_recount(sim_bundle):
    log = sim_bundle["log"]
    heatmap = compliance_heatmap(log)
    for pid in heatmap.participants:
        for day in heatmap.days:
            delivered_refs = {
                e.ref for e in log.qa_events()
                if e.participant == pid and e.kind == "QuestionDelivered" and e.at.date() == day
            }
            answered_refs = {
                e.ref for e in log.qa_events() if e.participant == pid and e.kind == "AnswerStored"
            }
            expected = len(delivered_refs & answered_refs) / len(delivered_refs) if delivered_refs else None
            assert heatmap.rate(pid, day) == expected


def test_coin_flip_answer_rates_stay_in_binomial_band():
    plan = helpers.small_sim_plan(days=4, categories=(QuestionCategory.WE,), with_sensors=False)
    people = [ParticipantProfile(f"p{i}") for i in range(4)]
    timeline = compile_plan(plan, people)
    truth = {
        p.id: LifeSequence(
            p.id,
            (SituationalContext(f"{p.id}-a", T0, T0 + timedelta(days=5),
                                we="Home Apartment/room", wa=("resting",)),),
        )
        for p in people
    }
    model = BehaviorModel(seed=13, default=CellParams(p_answer=0.5, p_correct=1.0))
    log = run_simulation(timeline, people, truth, model)
    heatmap = compliance_heatmap(log)
    cells = [
        heatmap.rate(pid, day)
        for pid in heatmap.participants
        for day in heatmap.days
        if heatmap.counts[(pid, day)][1] >= 40  # full days only
    ]
    assert len(cells) >= 12
    inside = sum(1 for c in cells if 0.3 <= c <= 0.7)
    assert inside / len(cells) >= 0.95


def test_heatmap_csv_shape(sim_bundle):
    heatmap = compliance_heatmap(sim_bundle["log"])
    lines = heatmap.to_csv().strip().split("\n")
    assert len(lines) == 1 + len(heatmap.participants)
    assert lines[0].startswith("participant,")


# --------------------------------------------------------------------------
# Quality checks


def test_clean_perfect_log_has_no_flags():
    log, timeline = perfect_log()
    assert run_quality_checks(log, timeline) == []


def test_injected_burst_yields_exactly_one_flag():
    log, timeline = perfect_log(days=2)
    span = (T0 + timedelta(hours=6), T0 + timedelta(hours=22))
    faulted = inject_fault(log, AnswerBurst("p0", span))
    flags = [f for f in run_quality_checks(faulted, timeline) if f.kind == "AnswerBurst"]
    assert len(flags) == 1
    assert flags[0].participant == "p0"
    assert len(flags[0].evidence) >= 10


def test_missing_day_flagged():
    log, timeline = perfect_log(days=3)
    faulted = inject_fault(log, BlackoutDay(date(2020, 11, 3)))
    flags = [f for f in run_quality_checks(faulted, timeline) if f.kind == "MissingDay"]
    assert len(flags) == 1
    assert flags[0].participant == "*"
    assert "2020-11-03" in flags[0].detail


def test_implausible_answer_driving_in_the_library():
    log, timeline = perfect_log(days=1)
    stored = next(e for e in log.qa_events() if e.kind == "AnswerStored")
    extra = [
        QAEvent("p0", OccurrenceRef(9, 9, 0), "AnswerStored", stored.at + timedelta(seconds=10),
                payload="University Classroom/library", category="WE"),
        QAEvent("p0", OccurrenceRef(9, 9, 1), "AnswerStored", stored.at + timedelta(seconds=20),
                payload="driving", category="WA"),
    ]
    log2 = EventLog(log.records + extra)
    log2.sort()
    flags = [f for f in run_quality_checks(log2) if f.kind == "ImplausibleAnswer"]
    assert len(flags) == 1
    assert "driving" in flags[0].detail


def test_location_mismatch_detected():
    log, timeline = perfect_log(days=1)
    stored = next(e for e in log.qa_events() if e.kind == "AnswerStored" and e.category == "WE")
    # a contemporaneous location fix disagreeing with the answer
    fake = SensorReading("p0", "Location", stored.at + timedelta(seconds=30), "Restaurant/pub")
    log2 = EventLog(log.records + [fake])
    log2.sort()
    flags = [f for f in run_quality_checks(log2) if f.kind == "LocationMismatch"]
    assert flags and flags[0].participant == "p0"


def test_sensor_gap_flagged():
    plan = helpers.small_sim_plan(days=1)
    people = [ParticipantProfile("p0")]
    timeline = compile_plan(plan, people)
    truth = {"p0": LifeSequence(
        "p0", (SituationalContext("p0-a", T0, T0 + timedelta(days=2), we="Home Apartment/room", wa=("resting",)),)
    )}
    model = BehaviorModel(seed=2, default=CellParams(p_answer=1.0, p_correct=1.0))
    log = run_simulation(timeline, people, truth, model)
    from ilogcal.simulate import SensorDropout

    # the plan starts at 08:00; drop ten full hours of fixes inside it
    faulted = inject_fault(log, SensorDropout("Location", (T0 + timedelta(hours=10), T0 + timedelta(hours=20))))
    flags = [f for f in run_quality_checks(faulted, timeline, gap_threshold=30) if f.kind == "SensorGap"]
    assert len(flags) == 1
    assert "Location" in flags[0].detail


def test_every_flag_evidence_resolves(sim_bundle):
    log = inject_fault(sim_bundle["log"], AnswerBurst("p2", (T0 + timedelta(hours=6), T0 + timedelta(hours=22))))
    flags = run_quality_checks(log, sim_bundle["timeline"])
    for flag in flags:
        assert flag.evidence
        for index in flag.evidence:
            assert 0 <= index < len(log)


# --------------------------------------------------------------------------
# Dashboard summary


def test_summary_progress_mid_experiment():
    # 28-day diary, halfway through day 14: 14 covered, 14 left
    plan = helpers.two_phase_diary_plan()
    now = datetime(2020, 11, 2, 8, 0, tzinfo=UTC) + timedelta(days=13, hours=12)
    summary = dashboard_summary(EventLog([]), plan, PARAMS, now=now)
    assert summary.progress == {"days_covered": 14, "days_left": 14}


def test_researcher_sees_panel_b_participant_does_not(sim_bundle):
    researcher = dashboard_summary(sim_bundle["log"], sim_bundle["plan"], PARAMS, role="Researcher")
    assert researcher.participant_count == 3
    participant = dashboard_summary(
        sim_bundle["log"], sim_bundle["plan"], PARAMS, role="Participant", participant="p0"
    )
    assert participant.participant_count is None


def test_participant_view_requires_identity(sim_bundle):
    with pytest.raises(AuthorizationError):
        dashboard_summary(sim_bundle["log"], sim_bundle["plan"], PARAMS, role="Participant")


def test_delivery_rate_reflects_injected_failures():
    plan = helpers.small_sim_plan(days=3, categories=(QuestionCategory.WE,), with_sensors=False)
    people = [ParticipantProfile(f"p{i}") for i in range(8)]
    timeline = compile_plan(plan, people)
    truth = {
        p.id: LifeSequence(
            p.id,
            (SituationalContext(f"{p.id}-a", T0, T0 + timedelta(days=4),
                                we="Home Apartment/room", wa=("resting",)),),
        )
        for p in people
    }
    model = BehaviorModel(seed=21, default=CellParams(p_answer=1.0, p_correct=1.0), p_deliver=0.95)
    log = run_simulation(timeline, people, truth, model)
    summary = dashboard_summary(log, plan, PARAMS)
    assert summary.delivery_rate == pytest.approx(0.95, abs=0.02)


def test_compliance_snapshot_counts_are_consistent(sim_bundle):
    from ilogcal.quality import compliance_snapshot

    snapshot = compliance_snapshot(sim_bundle["log"], sim_bundle["plan"])
    assert set(snapshot.per_day) == {"p0", "p1", "p2"}
    for days in snapshot.per_day.values():
        for answered, delivered in days.values():
            assert 0 <= answered <= delivered
    assert snapshot.delivery_rate is not None and 0.0 <= snapshot.delivery_rate <= 1.0
    for rate in snapshot.sensor_rates.values():
        assert rate is None or rate >= 0.0
    assert snapshot.days_covered + snapshot.days_left >= 2


def test_participant_summary_contains_only_own_numbers(sim_bundle):
    log = sim_bundle["log"]
    summary = dashboard_summary(
        log, sim_bundle["plan"], PARAMS, role="Participant", participant="p1"
    )
    own = EventLog([r for r in log if r.participant == "p1"])
    stored = sum(1 for e in own.qa_events() if e.kind == "AnswerStored")
    assert summary.answers["answered_total"] == stored
    assert summary.participant == "p1"
