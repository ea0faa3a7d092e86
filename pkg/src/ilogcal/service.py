"""HTTP/JSON service over the experiment store.

Bearer tokens map to roles (researcher, participant bound to one id, or
platform); every endpoint scopes its response to the caller's role.
Errors come back as problem records ``{"code": ..., "message": ...}``
with stable machine-readable codes.  The stream endpoint long-polls an
offset cursor: clients pass the last offset they saw and get at-least-once
delivery of newer events and quality flags.

Configuration: data directory and bind address come from flags or the
environment variables ``ILOG_DATA_DIR`` and ``ILOG_BIND``; the token map
lives in ``tokens.json`` inside the data directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Mapping, Optional

from fastapi import Depends, FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .plan import PlanError, PlanSyntaxError, PlanValidationError
from .quality import AuthorizationError, QualityParameters
from .schedule import (
    Actor,
    ImmutablePastError,
    PolicyViolationError,
    revision_from_record,
    timeline_to_ndjson,
    timeline_to_vevents,
    occurrence_record,
)
from .store import ExperimentStore, NotFoundError, SchemaValidationError


class RoleMismatchError(PermissionError):
    pass


class UnauthenticatedError(PermissionError):
    pass


@dataclass(frozen=True)
class Role:
    principal: str
    kind: str  # "Researcher" | "Participant" | "Platform"
    participant: Optional[str] = None

    @property
    def is_researcher(self) -> bool:
        return self.kind == "Researcher"

    @property
    def is_participant(self) -> bool:
        return self.kind == "Participant"


def load_tokens(path: Path) -> dict[str, Role]:
    raw = json.loads(path.read_text())
    roles = {}
    for token, spec in raw.get("tokens", {}).items():
        roles[token] = Role(
            principal=spec.get("principal", token),
            kind=spec["role"],
            participant=spec.get("participant"),
        )
    return roles


_PROBLEMS = {
    UnauthenticatedError: (401, "unauthenticated"),
    AuthorizationError: (403, "authorization"),
    RoleMismatchError: (403, "role-mismatch"),
    PolicyViolationError: (403, "policy-violation"),
    ImmutablePastError: (409, "immutable-past"),
    NotFoundError: (404, "not-found"),
    SchemaValidationError: (400, "schema-error"),
    PlanSyntaxError: (400, "syntax-error"),
    PlanValidationError: (400, "validation-error"),
}


def _problem(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message, **extra})


def create_app(data_dir: str | Path, tokens: Optional[Mapping[str, Role]] = None) -> FastAPI:
    store = ExperimentStore(data_dir)
    if tokens is None:
        token_path = Path(data_dir) / "tokens.json"
        tokens = load_tokens(token_path) if token_path.exists() else {}
    app = FastAPI(title="ilogcal service", version="0.1.0")
    app.state.store = store
    app.state.tokens = dict(tokens)

    def role_of(request: Request) -> Role:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise UnauthenticatedError("missing bearer token")
        token = header[7:].strip()
        role = app.state.tokens.get(token)
        if role is None:
            raise UnauthenticatedError("unknown token")
        return role

    for exc_type, (status, code) in _PROBLEMS.items():
        def handler(request, exc, status=status, code=code):
            extra = {}
            if isinstance(exc, PlanValidationError):
                extra["diagnostics"] = [
                    {"severity": d.severity, "path": d.path, "message": d.message, "code": d.code}
                    for d in exc.diagnostics
                ]
            return _problem(status, code, str(exc), **extra)

        app.add_exception_handler(exc_type, handler)

    def scope_participant(role: Role, requested: Optional[str]) -> Optional[str]:
        """Resolve the participant filter a caller is allowed to use."""
        if role.is_participant:
            if requested is not None and requested != role.participant:
                raise AuthorizationError("participants may only access their own data")
            return role.participant
        return requested

    # -- plan ---------------------------------------------------------------

    @app.get("/experiments/{experiment_id}/plan")
    def get_plan(experiment_id: str, role: Role = Depends(role_of)):
        return PlainTextResponse(store.plan_text(experiment_id), media_type="text/calendar")

    @app.put("/experiments/{experiment_id}/plan")
    async def put_plan(experiment_id: str, request: Request, role: Role = Depends(role_of)):
        if not role.is_researcher:
            raise AuthorizationError("only the researcher edits the plan")
        text = (await request.body()).decode("utf-8")
        plan = store.put_plan(experiment_id, text)
        return {"experiment": experiment_id, "calendars": len(plan.calendars), "user": plan.user}

    # -- timeline ------------------------------------------------------------

    @app.get("/experiments/{experiment_id}/timeline")
    def get_timeline(
        experiment_id: str,
        participant: Optional[str] = None,
        format: str = "json",
        role: Role = Depends(role_of),
    ):
        participant = scope_participant(role, participant)
        timeline = store.timeline(experiment_id, participant)
        pids = [participant] if participant is not None else timeline.participants
        if format == "vevent":
            if len(pids) != 1:
                raise SchemaValidationError("vevent export needs a single participant")
            return PlainTextResponse(timeline_to_vevents(timeline, pids[0]), media_type="text/calendar")
        if format == "ndjson":
            return PlainTextResponse(
                timeline_to_ndjson(timeline, participant), media_type="application/x-ndjson"
            )
        return {
            "version": store.timeline_version(experiment_id),
            "occurrences": [
                occurrence_record(pid, occ) for pid in pids for occ in timeline.for_participant(pid)
            ],
        }

    # -- events ----------------------------------------------------------------

    @app.post("/experiments/{experiment_id}/events")
    async def post_events(experiment_id: str, request: Request, role: Role = Depends(role_of)):
        body = await request.json()
        batch_id = body.get("batch_id")
        records = body.get("records")
        if not isinstance(batch_id, str) or not isinstance(records, list):
            raise SchemaValidationError("body must carry batch_id and records[]")
        if role.is_participant:
            outsiders = {r.get("participant") for r in records} - {role.participant}
            if outsiders:
                raise AuthorizationError("participants may only upload their own events")
        ack = store.ingest_events(experiment_id, batch_id, records)
        return {"offset": ack.offset, "appended": ack.appended, "duplicate": ack.duplicate}

    # -- monitoring ---------------------------------------------------------------

    @app.get("/experiments/{experiment_id}/summary")
    def get_summary(experiment_id: str, role: Role = Depends(role_of)):
        return store.summary(experiment_id, role=role.kind, participant=role.participant)

    @app.get("/experiments/{experiment_id}/heatmap")
    def get_heatmap(
        experiment_id: str,
        role: Role = Depends(role_of),
        from_day: Optional[str] = Query(default=None, alias="from"),
        to_day: Optional[str] = Query(default=None, alias="to"),
    ):
        window = None
        if from_day and to_day:
            window = (date.fromisoformat(from_day), date.fromisoformat(to_day))
        participant = role.participant if role.is_participant else None
        return store.heatmap(experiment_id, window, participant)

    @app.get("/experiments/{experiment_id}/rankings")
    def get_rankings(experiment_id: str, role: Role = Depends(role_of)):
        if role.is_participant:
            raise AuthorizationError("rankings are researcher-facing")
        return store.rankings(experiment_id)

    @app.get("/experiments/{experiment_id}/participants/{pid}/data")
    def get_participant_data(experiment_id: str, pid: str, role: Role = Depends(role_of)):
        pid = scope_participant(role, pid)
        return store.participant_data(experiment_id, pid)

    @app.get("/experiments/{experiment_id}/compare")
    def get_compare(experiment_id: str, pids: str, role: Role = Depends(role_of)):
        if role.is_participant:
            raise AuthorizationError("comparison views are researcher-facing")
        wanted = [p for p in pids.split(",") if p]
        return store.compare(experiment_id, wanted)

    # -- revisions -----------------------------------------------------------------

    @app.post("/experiments/{experiment_id}/revisions")
    async def post_revision(experiment_id: str, request: Request, role: Role = Depends(role_of)):
        record = await request.json()
        try:
            revision = revision_from_record(record)
        except (KeyError, ValueError) as err:
            raise SchemaValidationError(str(err)) from err
        if revision.actor.value != role.kind:
            raise RoleMismatchError(f"{role.kind} token cannot issue {revision.actor.value} revisions")
        if role.is_participant and revision.target.participant != role.participant:
            raise AuthorizationError("participants may only revise their own timeline")
        version = store.post_revision(experiment_id, revision)
        return {"version": version}

    # -- stream ----------------------------------------------------------------------

    @app.get("/experiments/{experiment_id}/stream")
    def get_stream(
        experiment_id: str,
        offset: int = 0,
        wait_s: float = 0.0,
        role: Role = Depends(role_of),
    ):
        participant = role.participant if role.is_participant else None
        return store.stream(experiment_id, offset, participant, min(wait_s, 25.0))

    # -- quality parameters -------------------------------------------------------------

    @app.get("/experiments/{experiment_id}/quality-params")
    def get_quality_params(experiment_id: str, role: Role = Depends(role_of)):
        params = store.quality_params(experiment_id)
        return {
            "max_unanswered": params.max_unanswered,
            "max_avg_completion_time": params.max_avg_completion_time,
            "max_avg_response_time": params.max_avg_response_time,
            "medium_band": list(params.medium_band),
        }

    @app.put("/experiments/{experiment_id}/quality-params")
    async def put_quality_params(experiment_id: str, request: Request, role: Role = Depends(role_of)):
        if not role.is_researcher:
            raise AuthorizationError("only the researcher sets quality parameters")
        raw = await request.json()
        try:
            params = QualityParameters(
                max_unanswered=raw["max_unanswered"],
                max_avg_completion_time=raw["max_avg_completion_time"],
                max_avg_response_time=raw["max_avg_response_time"],
                medium_band=tuple(raw.get("medium_band", (0.0, 0.5))),
            )
            params.validate()
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaValidationError(str(err)) from err
        store.put_quality_params(experiment_id, params)
        return {"ok": True}

    # -- reports ---------------------------------------------------------------------------

    @app.get("/experiments/{experiment_id}/reports")
    def get_reports(
        experiment_id: str,
        classifier: str = "RandomForest",
        protocol: str = "five_fold_cv",
        participant: Optional[str] = None,
        role: Role = Depends(role_of),
    ):
        participant = scope_participant(role, participant)
        if role.is_participant:
            protocol = "per_participant_split" if protocol == "per_participant_split" else protocol
        try:
            return store.reports(experiment_id, classifier, protocol, participant)
        except ValueError as err:
            raise SchemaValidationError(str(err)) from err

    return app


def serve(data_dir: Optional[str] = None, bind: Optional[str] = None) -> None:
    """Run the service with uvicorn; honours ILOG_DATA_DIR / ILOG_BIND."""
    import uvicorn

    data_dir = data_dir or os.environ.get("ILOG_DATA_DIR", "./ilog-data")
    bind = bind or os.environ.get("ILOG_BIND", "127.0.0.1:8080")
    host, _, port = bind.partition(":")
    app = create_app(data_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="info")
