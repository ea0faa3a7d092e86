"""File-backed, event-sourced experiment store.

One directory per experiment::

    <root>/<experiment id>/
        plan.ilogcal       the current plan document
        events.log         append-only event records (offset = line index)
        audit.log          append-only revision records
        batches.log        append-only ingest acknowledgements
        profiles.ndjson    optional participant demographics
        quality-params.json
        snapshots/         derived aggregates, each citing its log offset

The two logs are the source of truth: every derived value (timelines,
summaries, rankings, flags, reports) is recomputed from them, and the
store rebuilds its in-memory state by replaying the files on open, so a
crash/restart reproduces the same answers.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Mapping, Optional

from .context import ParticipantProfile, read_profiles
from .events import (
    EventLog,
    LifecycleError,
    QAEvent,
    check_lifecycle,
    record_from_dict,
    EVENT_LOG_SCHEMA,
)
from .plan import ExperimentPlan
from .plan_io import parse_plan
from .predict import ClassifierSpec, extract_features, train_eval
from .quality import (
    QualityParameters,
    compliance_heatmap,
    dashboard_summary,
    rank_all,
    run_quality_checks,
)
from .schedule import (
    AuditEntry,
    Revision,
    RevisionPolicy,
    Timeline,
    apply_revision,
    compile_plan,
    replay,
    revision_from_record,
    revision_to_record,
)


class NotFoundError(KeyError):
    pass


class SchemaValidationError(ValueError):
    pass


@dataclass
class IngestAck:
    offset: int
    appended: int
    duplicate: bool


class _Experiment:
    def __init__(self, root: Path):
        self.root = root
        self.lock = threading.RLock()
        self.new_data = threading.Condition(self.lock)
        self.log = EventLog()
        self.audit: list[AuditEntry] = []
        self.batch_acks: dict[str, int] = {}
        self._load()

    # -- persistence -------------------------------------------------------

    def _load(self) -> None:
        events_path = self.root / "events.log"
        if events_path.exists():
            with events_path.open() as fh:
                self.log = EventLog.read(fh)
        audit_path = self.root / "audit.log"
        if audit_path.exists():
            for line in audit_path.read_text().splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                self.audit.append(AuditEntry(revision_from_record(record), record.get("note")))
        batches_path = self.root / "batches.log"
        if batches_path.exists():
            for line in batches_path.read_text().splitlines():
                if line.strip():
                    record = json.loads(line)
                    self.batch_acks[record["batch"]] = record["offset"]

    def _append_events(self, records) -> None:
        events_path = self.root / "events.log"
        new_file = not events_path.exists()
        with events_path.open("a") as fh:
            if new_file:
                fh.write(json.dumps({"schema": EVENT_LOG_SCHEMA}) + "\n")
            for record in records:
                fh.write(json.dumps(record.to_record()) + "\n")
        self.log.records.extend(records)

    def _append_audit(self, entry: AuditEntry) -> None:
        with (self.root / "audit.log").open("a") as fh:
            fh.write(json.dumps(revision_to_record(entry.revision, entry.note)) + "\n")
        self.audit.append(entry)

    def _append_batch_ack(self, batch_id: str, offset: int) -> None:
        with (self.root / "batches.log").open("a") as fh:
            fh.write(json.dumps({"batch": batch_id, "offset": offset}) + "\n")
        self.batch_acks[batch_id] = offset


class ExperimentStore:
    """Registry of experiments under one data directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._experiments: dict[str, _Experiment] = {}
        self._registry_lock = threading.Lock()

    # -- experiment lookup ---------------------------------------------------

    def _experiment(self, experiment_id: str, create: bool = False) -> _Experiment:
        with self._registry_lock:
            if experiment_id in self._experiments:
                return self._experiments[experiment_id]
            path = self.root / experiment_id
            if not path.exists():
                if not create:
                    raise NotFoundError(experiment_id)
                path.mkdir(parents=True)
                (path / "snapshots").mkdir(exist_ok=True)
            exp = _Experiment(path)
            self._experiments[experiment_id] = exp
            return exp

    def experiment_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    # -- plan ----------------------------------------------------------------

    def put_plan(self, experiment_id: str, text: str) -> ExperimentPlan:
        plan = parse_plan(text)  # raises on any error diagnostic
        exp = self._experiment(experiment_id, create=True)
        with exp.lock:
            (exp.root / "plan.ilogcal").write_text(text, newline="")
            (exp.root / "snapshots").mkdir(exist_ok=True)
        return plan

    def plan_text(self, experiment_id: str) -> str:
        exp = self._experiment(experiment_id)
        path = exp.root / "plan.ilogcal"
        if not path.exists():
            raise NotFoundError(f"{experiment_id}: no plan uploaded")
        return path.read_bytes().decode("utf-8")  # keep CRLF endings intact

    def plan(self, experiment_id: str) -> ExperimentPlan:
        return parse_plan(self.plan_text(experiment_id))

    # -- participants ----------------------------------------------------------

    def profiles(self, experiment_id: str) -> list[ParticipantProfile]:
        exp = self._experiment(experiment_id)
        path = exp.root / "profiles.ndjson"
        if path.exists():
            with path.open() as fh:
                return read_profiles(fh)
        with exp.lock:
            pids = sorted({r.participant for r in exp.log})
        return [ParticipantProfile(pid) for pid in pids]

    def put_profiles(self, experiment_id: str, text: str) -> int:
        exp = self._experiment(experiment_id, create=True)
        with exp.lock:
            (exp.root / "profiles.ndjson").write_text(text)
        return len(read_profiles(text.splitlines()))

    # -- quality parameters / policy -------------------------------------------

    def quality_params(self, experiment_id: str) -> QualityParameters:
        exp = self._experiment(experiment_id)
        path = exp.root / "quality-params.json"
        if not path.exists():
            return QualityParameters()
        raw = json.loads(path.read_text())
        return QualityParameters(
            max_unanswered=raw["max_unanswered"],
            max_avg_completion_time=raw["max_avg_completion_time"],
            max_avg_response_time=raw["max_avg_response_time"],
            medium_band=tuple(raw.get("medium_band", (0.0, 0.5))),
        )

    def put_quality_params(self, experiment_id: str, params: QualityParameters) -> None:
        params.validate()
        exp = self._experiment(experiment_id, create=True)
        with exp.lock:
            (exp.root / "quality-params.json").write_text(
                json.dumps(
                    {
                        "max_unanswered": params.max_unanswered,
                        "max_avg_completion_time": params.max_avg_completion_time,
                        "max_avg_response_time": params.max_avg_response_time,
                        "medium_band": list(params.medium_band),
                    }
                )
            )

    def revision_policy(self, experiment_id: str) -> RevisionPolicy:
        exp = self._experiment(experiment_id)
        path = exp.root / "policy.json"
        if not path.exists():
            return RevisionPolicy()
        raw = json.loads(path.read_text())
        from datetime import timedelta

        return RevisionPolicy(
            max_participant_shift=timedelta(seconds=raw.get("max_participant_shift_s", 3600)),
            max_participant_cancels_per_day=raw.get("max_participant_cancels_per_day", 4),
            platform_shift_window=timedelta(seconds=raw.get("platform_shift_window_s", 1800)),
            frozen_collections=frozenset(tuple(x) for x in raw.get("frozen_collections", [])),
            participant_platform_windows={
                k: timedelta(seconds=v) for k, v in raw.get("participant_platform_windows_s", {}).items()
            },
            allow_platform_frequency_override=raw.get("allow_platform_frequency_override", False),
        )

    # -- events ------------------------------------------------------------------

    def ingest_events(self, experiment_id: str, batch_id: str, records: list[dict]) -> IngestAck:
        exp = self._experiment(experiment_id)
        parsed = []
        for i, raw in enumerate(records):
            try:
                parsed.append(record_from_dict(raw))
            except (KeyError, ValueError) as err:
                raise SchemaValidationError(f"record {i}: {err}") from err
        with exp.lock:
            if batch_id in exp.batch_acks:
                return IngestAck(exp.batch_acks[batch_id], 0, True)
            self._validate_batch(exp, parsed)
            self._validate_lifecycle(exp, parsed)
            self._append_events(exp, parsed)
            offset = len(exp.log)
            exp._append_batch_ack(batch_id, offset)
            exp.new_data.notify_all()
            return IngestAck(offset, len(parsed), False)

    @staticmethod
    def _validate_batch(exp: _Experiment, parsed) -> None:
        last_at: dict[str, datetime] = {}
        for record in parsed:
            previous = last_at.get(record.participant)
            if previous is not None and record.at < previous:
                raise SchemaValidationError(
                    f"participant {record.participant}: timestamps regress within the batch"
                )
            last_at[record.participant] = record.at

    @staticmethod
    def _validate_lifecycle(exp: _Experiment, parsed) -> None:
        touched = {(r.participant, r.ref) for r in parsed if isinstance(r, QAEvent)}
        if not touched:
            return
        merged: dict[tuple, list[QAEvent]] = {key: [] for key in touched}
        for record in exp.log.qa_events():
            key = (record.participant, record.ref)
            if key in merged:
                merged[key].append(record)
        for record in parsed:
            if isinstance(record, QAEvent):
                merged[(record.participant, record.ref)].append(record)
        for (participant, ref), events in merged.items():
            try:
                check_lifecycle(events)
            except LifecycleError as err:
                raise SchemaValidationError(
                    f"occurrence {ref.calendar_id}/{ref.collection_id}/{ref.seq_no} "
                    f"of {participant}: {err}"
                ) from err

    @staticmethod
    def _append_events(exp: _Experiment, parsed) -> None:
        exp._append_events(parsed)

    def event_count(self, experiment_id: str) -> int:
        exp = self._experiment(experiment_id)
        with exp.lock:
            return len(exp.log)

    def log_snapshot(self, experiment_id: str) -> EventLog:
        exp = self._experiment(experiment_id)
        with exp.lock:
            return EventLog(list(exp.log.records))

    # -- timeline & revisions -------------------------------------------------------

    def _participants(self, experiment_id: str) -> list[str]:
        return [p.id for p in self.profiles(experiment_id)]

    def base_timeline(self, experiment_id: str, participants: Optional[list[str]] = None) -> Timeline:
        plan = self.plan(experiment_id)
        pids = participants if participants is not None else self._participants(experiment_id)
        return compile_plan(plan, pids)

    def timeline(self, experiment_id: str, participant: Optional[str] = None) -> Timeline:
        exp = self._experiment(experiment_id)
        with exp.lock:
            entries = list(exp.audit)
        pids = [participant] if participant is not None else None
        base = self.base_timeline(experiment_id, pids)
        policy = self.revision_policy(experiment_id)
        if participant is not None:
            entries = [
                e for e in entries
                if e.revision.target.participant in (None, participant)
            ]
        return replay(base, entries, policy)

    def timeline_version(self, experiment_id: str) -> int:
        exp = self._experiment(experiment_id)
        with exp.lock:
            return len(exp.audit)

    def post_revision(self, experiment_id: str, revision: Revision) -> int:
        exp = self._experiment(experiment_id)
        policy = self.revision_policy(experiment_id)
        with exp.lock:
            participants = self._participants(experiment_id)
            if revision.target.participant is not None and revision.target.participant not in participants:
                participants.append(revision.target.participant)
            base = self.base_timeline(experiment_id, participants)
            current = replay(base, exp.audit, policy)
            revised = apply_revision(current, revision, policy)
            exp._append_audit(revised.audit[-1])
            exp.new_data.notify_all()
            return len(exp.audit)

    # -- derived views -----------------------------------------------------------

    def summary(self, experiment_id: str, role: str = "Researcher", participant: Optional[str] = None) -> dict:
        log = self.log_snapshot(experiment_id)
        plan = self.plan(experiment_id)
        params = self.quality_params(experiment_id)
        summary = dashboard_summary(log, plan, params, role=role, participant=participant)
        payload = summary.to_dict()
        payload["offset"] = len(log)
        payload["timeline_version"] = self.timeline_version(experiment_id)
        self._write_snapshot(experiment_id, "summary", len(log), payload, role, participant)
        return payload

    def heatmap(
        self,
        experiment_id: str,
        window: Optional[tuple[date, date]] = None,
        participant: Optional[str] = None,
    ) -> dict:
        log = self.log_snapshot(experiment_id)
        if participant is not None:
            log = EventLog([r for r in log if r.participant == participant])
        hm = compliance_heatmap(log, window)
        return {
            "offset": len(log),
            "participants": hm.participants,
            "days": [d.isoformat() for d in hm.days],
            "cells": [
                [hm.rate(pid, day) for day in hm.days] for pid in hm.participants
            ],
            "counts": [
                [list(hm.counts[(pid, day)]) for day in hm.days] for pid in hm.participants
            ],
            "flagged_days": [d.isoformat() for d in hm.flagged_days],
        }

    def rankings(self, experiment_id: str) -> dict:
        log = self.log_snapshot(experiment_id)
        params = self.quality_params(experiment_id)
        rankings = rank_all(log, params)
        payload = {
            "offset": len(log),
            "rankings": [
                {
                    "participant": r.participant,
                    "verdict": r.verdict,
                    "unanswered_count": r.unanswered_count,
                    "avg_reaction": r.avg_reaction,
                    "avg_completion": r.avg_completion,
                }
                for r in rankings
            ],
        }
        self._write_snapshot(experiment_id, "rankings", len(log), payload)
        return payload

    def flags(self, experiment_id: str) -> list[dict]:
        log = self.log_snapshot(experiment_id)
        timeline = None
        try:
            timeline = self.timeline(experiment_id)
        except NotFoundError:
            pass
        found = run_quality_checks(log, timeline)
        return [
            {
                "participant": f.participant,
                "kind": f.kind,
                "evidence": list(f.evidence),
                "at": f.at.isoformat(),
                "detail": f.detail,
                "position": max(f.evidence),
            }
            for f in found
        ]

    def stream(
        self,
        experiment_id: str,
        offset: int,
        participant: Optional[str] = None,
        wait_s: float = 0.0,
    ) -> dict:
        exp = self._experiment(experiment_id)
        with exp.lock:
            if wait_s > 0 and len(exp.log) <= offset:
                exp.new_data.wait(timeout=wait_s)
            current = len(exp.log)
            records = [
                {"offset": i, "type": "event", "body": exp.log.records[i].to_record()}
                for i in range(offset, current)
                if participant is None or exp.log.records[i].participant == participant
            ]
        for flag in self.flags(experiment_id):
            if offset < flag["position"] + 1 <= current:
                if participant is None or flag["participant"] in (participant, "*"):
                    records.append({"offset": flag["position"], "type": "flag", "body": flag})
        records.sort(key=lambda r: (r["offset"], 0 if r["type"] == "event" else 1))
        return {"records": records, "next_offset": current}

    def compare(self, experiment_id: str, pids: list[str]) -> dict:
        log = self.log_snapshot(experiment_id)
        series = {}
        for pid in pids:
            daily_answers: dict[str, int] = {}
            daily_reactions: dict[str, list[float]] = {}
            delivered_at = {}
            for e in log.qa_events():
                if e.participant != pid:
                    continue
                day = e.at.astimezone(timezone.utc).date().isoformat()
                if e.kind == "QuestionDelivered":
                    delivered_at[e.ref] = e.at
                elif e.kind == "AnswerStarted" and e.ref in delivered_at:
                    daily_reactions.setdefault(day, []).append(
                        (e.at - delivered_at[e.ref]).total_seconds()
                    )
                elif e.kind == "AnswerStored":
                    daily_answers[day] = daily_answers.get(day, 0) + 1
            days = sorted(set(daily_answers) | set(daily_reactions))
            cumulative = []
            total = 0
            for day in days:
                total += daily_answers.get(day, 0)
                cumulative.append(total)
            series[pid] = {
                "days": days,
                "cumulative_answers": cumulative,
                "avg_reaction_s": [
                    (sum(daily_reactions[day]) / len(daily_reactions[day])) if day in daily_reactions else None
                    for day in days
                ],
            }
        return {"offset": len(log), "series": series}

    def participant_data(self, experiment_id: str, participant: str) -> dict:
        log = self.log_snapshot(experiment_id)
        days: dict[str, dict[str, list[str]]] = {}
        for e in log.qa_events():
            if e.participant != participant or e.kind != "AnswerStored" or e.payload is None:
                continue
            day = e.at.astimezone(timezone.utc).date().isoformat()
            days.setdefault(day, {}).setdefault(e.category or "?", []).append(e.payload)
        return {"participant": participant, "days": days}

    def reports(
        self,
        experiment_id: str,
        classifier: str = "RandomForest",
        protocol: str = "five_fold_cv",
        participant: Optional[str] = None,
        seed: int = 0,
    ) -> dict:
        log = self.log_snapshot(experiment_id)
        profiles = self.profiles(experiment_id)
        if participant is not None:
            profiles = [p for p in profiles if p.id == participant]
        rows = []
        for profile in profiles:
            rows.extend(extract_features(log, None, profile))
        spec = ClassifierSpec(kind=classifier, seed=seed)
        report = train_eval(rows, spec, protocol=protocol)
        payload = {"offset": len(log), "report": report.to_dict()}
        self._write_snapshot(experiment_id, f"report-{classifier}", len(log), payload)
        return payload

    # -- snapshots ---------------------------------------------------------------

    def _write_snapshot(self, experiment_id: str, kind: str, offset: int, payload: dict, *extra) -> None:
        exp = self._experiment(experiment_id)
        snapdir = exp.root / "snapshots"
        snapdir.mkdir(exist_ok=True)
        suffix = "-".join(str(x) for x in extra if x)
        name = f"{kind}{'-' + suffix if suffix else ''}@{offset}.json"
        with exp.lock:
            (snapdir / name).write_text(json.dumps(payload, sort_keys=True))
