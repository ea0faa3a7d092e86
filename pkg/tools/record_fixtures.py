"""Record service responses as JSON fixtures for the dashboard tests.

Boots the real service in-process, drives it with simulated data, and
dumps selected responses under frontend/fixtures/. Rerun after changing
any wire format:

    python3 tools/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from datetime import datetime, timedelta, timezone
from pathlib import Path

from fastapi.testclient import TestClient

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

import helpers  # noqa: E402

from ilogcal.context import LifeSequence, ParticipantProfile, SituationalContext  # noqa: E402
from ilogcal.events import EventLog, OccurrenceRef, QAEvent  # noqa: E402
from ilogcal.plan import QuestionCategory  # noqa: E402
from ilogcal.plan_io import serialize_plan  # noqa: E402
from ilogcal.schedule import compile_plan  # noqa: E402
from ilogcal.service import Role, create_app  # noqa: E402
from ilogcal.simulate import (  # noqa: E402
    AnswerBurst,
    BehaviorModel,
    BlackoutDay,
    CellParams,
    generate_life_sequence,
    inject_fault,
    run_simulation,
)

UTC = timezone.utc
T0 = datetime(2020, 11, 2, 0, 0, tzinfo=UTC)
FIXTURES = REPO / "frontend" / "fixtures"

TOKENS = {
    "tok-res": Role("alice", "Researcher"),
    "tok-p00": Role("p00", "Participant", participant="p00"),
}
RES = {"Authorization": "Bearer tok-res"}
P00 = {"Authorization": "Bearer tok-p00"}


def dump(name: str, payload) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / name).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(f"wrote {name}")


def ingest(client, experiment, log, chunk=2000):
    records = [r.to_record() for r in log.records]
    for i in range(0, len(records), chunk):
        response = client.post(
            f"/experiments/{experiment}/events",
            json={"batch_id": f"fix-{i}", "records": records[i : i + chunk]},
            headers=RES,
        )
        assert response.status_code == 200, response.text


def main() -> None:
    tmp = tempfile.mkdtemp(prefix="ilog-fixtures-")
    client = TestClient(create_app(tmp, TOKENS))

    # -- small live experiment: 4 participants, 4 days, faults injected
    plan = helpers.small_sim_plan(days=4, cadence_minutes=30)
    profiles = [
        ParticipantProfile(f"p{i:02d}", gender="Female" if i % 2 else "Male",
                           degree="BSc", department="Information Science", timezone="Europe/Rome")
        for i in range(4)
    ]
    timeline = compile_plan(plan, profiles)
    truth = {p.id: generate_life_sequence(p.id, T0, T0 + timedelta(days=5), seed=99) for p in profiles}
    model = BehaviorModel(seed=99, default=CellParams(p_answer=0.9, p_correct=0.55), p_deliver=0.97)
    log = run_simulation(timeline, profiles, truth, model)
    log = inject_fault(log, AnswerBurst("p01", (T0 + timedelta(days=1, hours=9), T0 + timedelta(days=1, hours=21))))

    assert client.put("/experiments/demo/plan", content=serialize_plan(plan), headers=RES).status_code == 200
    ingest(client, "demo", log)

    dump("summary-researcher.json", client.get("/experiments/demo/summary", headers=RES).json())
    dump("summary-participant.json", client.get("/experiments/demo/summary", headers=P00).json())
    dump("heatmap-small.json", client.get("/experiments/demo/heatmap", headers=RES).json())
    dump("quality-params.json", client.get("/experiments/demo/quality-params", headers=RES).json())
    dump(
        "compare.json",
        client.get("/experiments/demo/compare", params={"pids": "p00,p01,p02,p03"}, headers=RES).json(),
    )
    dump("participant-data.json", client.get("/experiments/demo/participants/p00/data", headers=P00).json())
    dump(
        "timeline-p00.json",
        client.get("/experiments/demo/timeline", params={"participant": "p00"}, headers=RES).json(),
    )
    stream = client.get("/experiments/demo/stream", params={"offset": 0}, headers=RES).json()
    events = [r for r in stream["records"] if r["type"] == "event"]
    flags = [r for r in stream["records"] if r["type"] == "flag"]
    bursts = [r for r in flags if r["body"]["kind"] == "AnswerBurst"]
    assert bursts, "expected the injected burst to be flagged"
    keep = sorted(events[-20:] + bursts + flags[:3], key=lambda r: r["offset"])
    dump("stream-tail.json", {"records": keep, "next_offset": stream["next_offset"]})

    # -- a policy violation problem document, verbatim from the service
    too_far = {
        "actor": "Participant",
        "target": {"calendar_id": 1, "collection_id": 1, "kind": "question", "seq_no": 120, "participant": "p00"},
        "change": {"kind": "shift", "delta_s": 7200},
        "issued_at": "2020-11-02T00:00:00.000Z",
    }
    response = client.post("/experiments/demo/revisions", json=too_far, headers=P00)
    assert response.status_code == 403
    dump("policy-violation.json", {"status": response.status_code, "body": response.json()})

    # -- cohort-scale heatmap: 170 participants x 28 days, one QA pair per day
    cohort = TestClient(create_app(tempfile.mkdtemp(prefix="ilog-cohort-"), TOKENS))
    cohort_plan = helpers.small_sim_plan(days=28, cadence_minutes=24 * 60,
                                         categories=(QuestionCategory.WE,), with_sensors=False)
    assert cohort.put("/experiments/cohort/plan", content=serialize_plan(cohort_plan), headers=RES).status_code == 200
    records = EventLog()
    blackout = (T0 + timedelta(days=11)).date()
    for i in range(170):
        pid = f"s{i:03d}"
        for day in range(28):
            at = T0 + timedelta(days=day, hours=9)
            if at.date() == blackout:
                continue
            ref = OccurrenceRef(1, 1, day)
            records.records.append(QAEvent(pid, ref, "QuestionDelivered", at, category="WE"))
            if (i + day) % 5 != 0:  # ~80% answer rate
                records.records.append(
                    QAEvent(pid, ref, "AnswerStored", at + timedelta(minutes=2 + (i % 9)),
                            payload="Home Apartment/room", category="WE")
                )
    records.sort()
    ingest(cohort, "cohort", records)
    dump("heatmap-cohort.json", cohort.get("/experiments/cohort/heatmap", headers=RES).json())


if __name__ == "__main__":
    main()
