from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from ilogcal.context import ParticipantProfile
from ilogcal.plan_io import parse_plan
from ilogcal.schedule import compile_plan
from ilogcal.simulate import BehaviorModel, CellParams, generate_life_sequence, run_simulation

import helpers

DATA_DIR = Path(__file__).parent / "data"
UTC = timezone.utc


@pytest.fixture(scope="session")
def golden_text() -> str:
    return (DATA_DIR / "golden.ilogcal").read_text()


@pytest.fixture(scope="session")
def golden_plan(golden_text):
    return parse_plan(golden_text)


@pytest.fixture(scope="session")
def sim_bundle():
    """A small seeded end-to-end run: plan, timeline, truth, profiles, log."""
    plan = helpers.small_sim_plan(days=2, cadence_minutes=30)
    profiles = [
        ParticipantProfile(f"p{i}", gender="Female" if i % 2 else "Male",
                           degree="BSc", department="Information Science", timezone="Europe/Rome")
        for i in range(3)
    ]
    timeline = compile_plan(plan, profiles)
    start = datetime(2020, 11, 2, 0, 0, tzinfo=UTC)
    end = start + timedelta(days=3)
    truth = {p.id: generate_life_sequence(p.id, start, end, seed=11) for p in profiles}
    model = BehaviorModel(seed=7, default=CellParams(p_answer=0.85, p_correct=0.6))
    log = run_simulation(timeline, profiles, truth, model)
    return {
        "plan": plan,
        "profiles": profiles,
        "timeline": timeline,
        "truth": truth,
        "model": model,
        "log": log,
    }
