"""End-to-end acceptance suite.

One test per acceptance criterion; each prints a PASS line on success so
the run reads as a checklist (use ``pytest tests/test_acceptance.py -v -s``).
"""

import hashlib
import json
import random
import time
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ilogcal.context import LifeSequence, ParticipantProfile, SituationalContext
from ilogcal.events import EventLog, check_lifecycle, derive_timing
from ilogcal.plan import Frequency, QuestionCategory, RecurrenceRule, validate_plan
from ilogcal.plan_io import diagnose, parse_plan, serialize_plan
from ilogcal.predict import (
    ClassifierSpec,
    assign_folds,
    metrics_from_confusion,
    train_eval,
)
from ilogcal.quality import (
    ParticipantMetrics,
    QualityParameters,
    compliance_heatmap,
    rank_participant,
    run_quality_checks,
)
from ilogcal.schedule import (
    Actor,
    Cancel,
    FrequencyOverride,
    PolicyViolationError,
    Revision,
    RevisionPolicy,
    RevisionTarget,
    Shift,
    apply_revision,
    compile_plan,
    expand,
    replay,
)
from ilogcal.service import Role, create_app
from ilogcal.simulate import (
    AnswerBurst,
    BehaviorModel,
    BlackoutDay,
    CellParams,
    CellRule,
    generate_life_sequence,
    inject_fault,
    run_simulation,
)

import helpers
from test_plan_parser import MUTATIONS

UTC = timezone.utc
T0 = datetime(2020, 11, 2, 0, 0, tzinfo=UTC)
ALL_KINDS = ["RandomForest", "KNearestNeighbors", "LogisticRegression", "GaussianNaiveBayes", "LinearSVM"]


def ok(message: str) -> None:
    print(f"PASS: {message}")


# --------------------------------------------------------------------------
# 1. Recurrence oracle equivalence


def test_recurrence_oracle_equivalence_1000_rules():
    rng = random.Random(2024)
    started = time.monotonic()
    checked = {f: 0 for f in Frequency}
    for _ in range(1000):
        rule, dtstart, dtend = helpers.random_rule_and_window(rng)
        assert expand(rule, dtstart, dtend) == helpers.expand_oracle(rule, dtstart, dtend)
        checked[rule.frequency] += 1
    elapsed = time.monotonic() - started
    assert all(n > 0 for n in checked.values()), "every frequency must be exercised"
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    ok(f"recurrence oracle equivalence on 1000 random rules in {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 2. Paper-anchored expansion


def test_anchored_expansions():
    instants = expand(
        RecurrenceRule(Frequency.MINUTE, 1, 69120), T0, T0 + timedelta(days=48)
    )
    assert len(instants) == 69120

    timeline = compile_plan(helpers.two_phase_diary_plan(), ["p0"])
    counts = {}
    for occ in timeline.for_participant("p0"):
        counts[occ.source.collection_id] = counts.get(occ.source.collection_id, 0) + 1
    assert counts == {1: 672, 2: 336}
    assert sum(counts.values()) == 1008
    ok("anchored expansions: minute-cadence 69120 and two-phase diary 672+336=1008")


# --------------------------------------------------------------------------
# 3. Parser round-trip + golden mutations


def test_parser_roundtrip_500_random_plans(golden_text):
    rng = random.Random(77)
    started = time.monotonic()
    done = 0
    while done < 500:
        plan = helpers.random_plan(rng)
        if any(d.is_error for d in validate_plan(plan)):
            continue
        assert parse_plan(serialize_plan(plan)) == plan
        done += 1
    for needle, replacement in MUTATIONS:
        mutated = golden_text.replace(needle, replacement, 1)
        assert any(d.is_error for d in diagnose(mutated)), needle
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    ok(f"parser round-trip on 500 random plans + {len(MUTATIONS)} golden mutations in {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 4. Lifecycle and timing on a 20 x 28-day simulation


@pytest.fixture(scope="module")
def big_sim():
    plan = helpers.two_phase_diary_plan()
    people = [ParticipantProfile(f"p{i:02d}", timezone="Europe/Rome") for i in range(20)]
    timeline = compile_plan(plan, people)
    truth = {
        p.id: generate_life_sequence(p.id, T0, T0 + timedelta(days=29), seed=404)
        for p in people
    }
    model = BehaviorModel(seed=404, default=CellParams(p_answer=0.9, p_correct=0.5))
    log = run_simulation(timeline, people, truth, model)
    return plan, timeline, log


def test_lifecycle_and_timing_on_20x28_simulation(big_sim):
    _, _, log = big_sim
    groups = {}
    for event in log.qa_events():
        groups.setdefault((event.participant, event.ref), []).append(event)
    assert len(groups) == 20 * 1008, "every question occurrence produced events"

    checked = 0
    for (pid, ref), events in groups.items():
        check_lifecycle(events)
        by_kind = {e.kind: e for e in events}
        timing = derive_timing(EventLog(events), pid, ref)
        delivered = by_kind.get("QuestionDelivered")
        started = by_kind.get("AnswerStarted")
        stored = by_kind.get("AnswerStored")
        expected_reaction = (started.at - delivered.at).total_seconds() if delivered and started else None
        expected_completion = (stored.at - started.at).total_seconds() if started and stored else None
        if delivered is None:
            continue
        assert timing.reaction_time == expected_reaction
        assert timing.completion_time == expected_completion
        checked += 1
    assert checked >= 19000
    ok(f"lifecycle order and brute-force timing equality on {checked} occurrences (20 x 28 days)")


# --------------------------------------------------------------------------
# 5. Behavioral fidelity to the per-location quality shares


def test_behavioral_fidelity_per_location():
    cells = {"Restaurant/pub": 0.2887, "University Classroom/library": 0.5202}
    plan = helpers.small_sim_plan(
        days=14, cadence_minutes=30, categories=(QuestionCategory.WE,), with_sensors=False
    )
    people = [ParticipantProfile(f"p{i}") for i in range(10)]
    timeline = compile_plan(plan, people)
    truth = {}
    for p in people:
        contexts = []
        cursor = T0
        for i in range(15 * 24):
            place = "Restaurant/pub" if i % 2 == 0 else "University Classroom/library"
            contexts.append(
                SituationalContext(f"{p.id}-c{i}", cursor, cursor + timedelta(hours=1),
                                   we=place, wa=("eating",)))
            cursor += timedelta(hours=1)
        truth[p.id] = LifeSequence(p.id, tuple(contexts))
    model = BehaviorModel(
        seed=505,
        default=CellParams(p_answer=1.0),
        rules=tuple(CellRule(we=place, params={"p_correct": share}) for place, share in cells.items()),
    )
    log = run_simulation(timeline, people, truth, model)

    delivered_by_place = {place: [] for place in cells}
    stored = {
        (e.participant, e.ref): e for e in log.qa_events() if e.kind == "AnswerStored"
    }
    for e in log.qa_events():
        if e.kind != "QuestionDelivered":
            continue
        ctx = truth[e.participant].contexts[0]
        hour = int((e.at - T0).total_seconds() // 3600)
        place = "Restaurant/pub" if hour % 2 == 0 else "University Classroom/library"
        answer = stored.get((e.participant, e.ref))
        high = answer is not None and (answer.at - e.at).total_seconds() <= 1800
        delivered_by_place[place].append(high)
    for place, share in cells.items():
        outcomes = delivered_by_place[place]
        assert len(outcomes) >= 2000, f"{place}: only {len(outcomes)} questions"
        rate = sum(outcomes) / len(outcomes)
        assert abs(rate - share) <= 0.05, f"{place}: {rate:.4f} vs {share}"
    ok(
        "behavioral fidelity: per-location high-quality rates within +/-0.05 of "
        f"configured shares at n>={min(len(v) for v in delivered_by_place.values())} per cell"
    )


# --------------------------------------------------------------------------
# 6. Quality monitor: blackout, burst, ranking monotonicity


def test_quality_monitor_blackout_burst_and_monotonicity():
    plan = helpers.small_sim_plan(days=4, categories=(QuestionCategory.WE,), with_sensors=False)
    people = [ParticipantProfile(f"p{i}") for i in range(3)]
    timeline = compile_plan(plan, people)
    truth = {
        p.id: LifeSequence(
            p.id,
            (SituationalContext(f"{p.id}-a", T0, T0 + timedelta(days=5),
                                we="Home Apartment/room", wa=("resting",)),),
        )
        for p in people
    }
    model = BehaviorModel(seed=6, default=CellParams(p_answer=1.0, p_correct=1.0))
    log = run_simulation(timeline, people, truth, model)

    blackout = date(2020, 11, 4)
    faulted = inject_fault(log, BlackoutDay(blackout))
    heatmap = compliance_heatmap(faulted)
    assert blackout in heatmap.flagged_days
    assert all(heatmap.rate(pid, blackout) is None for pid in heatmap.participants)
    flags = run_quality_checks(faulted, timeline)
    assert sum(1 for f in flags if f.kind == "MissingDay") == 1

    burst_span = (T0 + timedelta(days=1, hours=9), T0 + timedelta(days=1, hours=21))
    bursty = inject_fault(log, AnswerBurst("p1", burst_span))
    burst_flags = [f for f in run_quality_checks(bursty, timeline) if f.kind == "AnswerBurst"]
    assert len(burst_flags) == 1 and burst_flags[0].participant == "p1"

    params = QualityParameters(max_unanswered=10, max_avg_completion_time=120.0,
                               max_avg_response_time=300.0, medium_band=(0.0, 0.5))
    order = {"Good": 0, "Medium": 1, "Poor": 2}
    rng = random.Random(123)
    for _ in range(1000):
        base = ParticipantMetrics(
            "x", rng.randint(0, 30), rng.uniform(0.0, 700.0), rng.uniform(0.0, 350.0)
        )
        worse = ParticipantMetrics(
            "x",
            base.unanswered_count + rng.randint(0, 15),
            base.avg_reaction + rng.uniform(0.0, 300.0),
            base.avg_completion + rng.uniform(0.0, 150.0),
        )
        assert order[rank_participant(worse, params).verdict] >= order[rank_participant(base, params).verdict]
    ok("quality monitor: blackout flagged, exactly one burst flag, ranking monotone over 1000 sweeps")


# --------------------------------------------------------------------------
# 7. Predictor correctness


def _synthetic_rows(n, rng, label_rule=None):
    from ilogcal.predict import FeatureVector

    rows = []
    for i in range(n):
        weekday = rng.randint(1, 7)
        period = rng.choice(["Morning", "Afternoon", "Evening", "Night"])
        label = label_rule(weekday, period) if label_rule else rng.randint(0, 1)
        rows.append(
            FeatureVector(
                row_id=f"r{i}", participant="p0", delivered_at=T0 + timedelta(minutes=30 * i),
                weekday=weekday, day_period=period,
                we_label="Home Apartment/room", wa_label="resting", wo_label="Alone",
                gender="Female", degree="BSc", department="Information Science",
                label=label,
            )
        )
    return rows


def test_predictor_correctness():
    rng = random.Random(31)

    planted = _synthetic_rows(2000, rng, label_rule=lambda wd, period: int(period == "Morning"))
    for kind in ALL_KINDS:
        report = train_eval(planted, ClassifierSpec(kind=kind, seed=1))
        matrix = np.array(report.confusion, dtype=float)
        recomputed = metrics_from_confusion(matrix)
        for key in ("accuracy", "kappa", "precision", "recall", "f1"):
            assert abs(getattr(report, key) - recomputed[key]) <= 1e-9
        assert report.accuracy >= 0.95, (kind, report.accuracy)

    noise = _synthetic_rows(5000, rng)
    for kind in ALL_KINDS:
        report = train_eval(noise, ClassifierSpec(kind=kind, seed=2))
        matrix = np.array(report.confusion, dtype=float)
        recomputed = metrics_from_confusion(matrix)
        for key in ("accuracy", "kappa", "precision", "recall", "f1"):
            assert abs(getattr(report, key) - recomputed[key]) <= 1e-9
        assert abs(report.kappa) <= 0.1, (kind, report.kappa)

    for n in (10, 503, 5000):
        rows = _synthetic_rows(n, rng)
        assignment = assign_folds(rows, 5, seed=3)
        sizes = [assignment.count(f) for f in range(5)]
        assert sum(sizes) == n and max(sizes) - min(sizes) <= 1
    ok(
        "predictor: metric identities to 1e-9, planted-pattern accuracy >= 0.95 for all five, "
        "|kappa| <= 0.1 on random labels at n=5000, folds disjoint/covering/balanced"
    )


# --------------------------------------------------------------------------
# 8. Replay determinism across a service restart


def test_replay_determinism_service_restart(tmp_path, sim_bundle):
    tokens = {"tok": Role("alice", "Researcher")}
    headers = {"Authorization": "Bearer tok"}
    data_dir = tmp_path / "replay-data"

    client = TestClient(create_app(data_dir, tokens))
    plan_text = serialize_plan(sim_bundle["plan"])
    assert client.put("/experiments/e/plan", content=plan_text, headers=headers).status_code == 200
    records = [r.to_record() for r in sim_bundle["log"].records]
    half = len(records) // 2
    for name, chunk in (("first", records[:half]), ("second", records[half:])):
        response = client.post(
            "/experiments/e/events", json={"batch_id": name, "records": chunk}, headers=headers
        )
        assert response.status_code == 200
    rev = {
        "actor": "Researcher",
        "target": {"day": "2020-11-03"},
        "change": {"kind": "cancel"},
        "issued_at": "2020-11-02T06:00:00.000Z",
    }
    assert client.post("/experiments/e/revisions", json=rev, headers=headers).status_code == 200

    def state_digest(c):
        parts = [
            c.get("/experiments/e/summary", headers=headers).json(),
            c.get("/experiments/e/rankings", headers=headers).json(),
            c.get("/experiments/e/timeline", params={"participant": "p0"}, headers=headers).json(),
        ]
        return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()

    before = state_digest(client)
    restarted = TestClient(create_app(data_dir, tokens))  # fresh process state, same logs
    after = state_digest(restarted)
    assert before == after
    version = restarted.get(
        "/experiments/e/timeline", params={"participant": "p0"}, headers=headers
    ).json()["version"]
    assert version == 1
    ok("replay determinism: restart reproduces summary/rankings/timeline digests and version")


# --------------------------------------------------------------------------
# 9. Revision hierarchy: all actor x bound combinations


def test_revision_hierarchy_grid():
    plan = helpers.small_sim_plan(days=2, with_sensors=False)
    timeline = compile_plan(plan, ["p0", "p1"])
    policy = RevisionPolicy(
        max_participant_shift=timedelta(minutes=60),
        max_participant_cancels_per_day=1,
        platform_shift_window=timedelta(minutes=30),
        frozen_collections=frozenset({(1, 2)}),
    )
    issue = T0 + timedelta(hours=7)

    def occurrence(tl, collection, offset=0, pid="p0"):
        occs = [
            o for o in tl.for_participant(pid)
            if o.source.collection_id == collection and o.scheduled_at > issue + timedelta(hours=1)
        ]
        return occs[offset]

    def target(occ, pid=None):
        return RevisionTarget(occ.source.calendar_id, occ.source.collection_id,
                              occ.source.kind, occ.seq_no, participant=pid)

    current = timeline
    applied = 0

    # researcher x {shift beyond participant bound, mass cancel, frozen target}
    for change, tgt in [
        (Shift(timedelta(hours=3)), target(occurrence(current, 1))),
        (Cancel(), RevisionTarget(day=date(2020, 11, 3))),
        (Shift(timedelta(minutes=90)), target(occurrence(current, 2, offset=1))),
    ]:
        current = apply_revision(current, Revision(Actor.RESEARCHER, tgt, change, issue), policy)
        applied += 1

    # participant within bounds: applies
    current = apply_revision(
        current,
        Revision(Actor.PARTICIPANT, target(occurrence(current, 1, offset=3), "p0"), Shift(timedelta(minutes=30)), issue),
        policy,
    )
    applied += 1
    current = apply_revision(
        current,
        Revision(Actor.PARTICIPANT, target(occurrence(current, 1, offset=4), "p0"), Cancel(), issue),
        policy,
    )
    applied += 1
    # platform within window: applies
    current = apply_revision(
        current,
        Revision(Actor.PLATFORM, target(occurrence(current, 3, offset=1), "p1"), Shift(timedelta(minutes=-20)), issue),
        policy,
    )
    applied += 1

    # out-of-bounds grid: (actor, change, target) -> rejected
    rejected_cases = [
        (Actor.PARTICIPANT, Shift(timedelta(minutes=120)), target(occurrence(current, 1, offset=5), "p0")),
        (Actor.PARTICIPANT, Cancel(), target(occurrence(current, 1, offset=6), "p0")),  # quota spent
        (Actor.PARTICIPANT, Shift(timedelta(minutes=10)), target(occurrence(current, 2, offset=2), "p0")),  # frozen
        (Actor.PLATFORM, Shift(timedelta(minutes=45)), target(occurrence(current, 1, offset=7), "p1")),
        (Actor.PLATFORM, Cancel(), target(occurrence(current, 3, offset=2), "p1")),
        (Actor.PLATFORM, Shift(timedelta(minutes=10)), target(occurrence(current, 2, offset=3), "p1")),  # frozen
        (Actor.PLATFORM, FrequencyOverride(RecurrenceRule(Frequency.HOUR, 1, 10)),
         RevisionTarget(1, 1, "question", participant="p1")),
        (Actor.PARTICIPANT, FrequencyOverride(RecurrenceRule(Frequency.HOUR, 1, 10)),
         RevisionTarget(1, 1, "question", participant="p0")),
    ]
    for actor, change, tgt in rejected_cases:
        with pytest.raises(PolicyViolationError):
            apply_revision(current, Revision(actor, tgt, change, issue), policy)

    assert current.version == applied == 6
    rebuilt = replay(timeline, current.audit, policy)
    assert rebuilt == current
    ok(
        "revision hierarchy: researcher always applies, participant/platform bounded "
        f"({len(rejected_cases)} out-of-bounds rejections), audit replay reproduces the timeline"
    )
