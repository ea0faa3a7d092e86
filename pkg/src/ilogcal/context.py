"""Situational-context data model.

A person's stretch of life is recorded as a :class:`LifeSequence`: a
time-ordered, non-overlapping run of :class:`SituationalContext` values.
Each context is a five-dimensional snapshot of the situation at data
collection time:

* ``we``  -- spatial context, the single place the person is at,
* ``wa``  -- activity context, one or more activities in progress,
* ``wi``  -- internal context, the current mood (one label at a time),
* ``wo``  -- social context, the people around (empty means alone),
* ``wu``  -- material context, the tools in use (empty means none).

Context intervals are half-open ``[start, end)`` so that two contiguous
contexts share a boundary instant unambiguously.  All instants are UTC;
participant-local time only enters at feature extraction / display.

A context can also be rendered as a small knowledge graph
(:class:`ContextGraph`): one node per entity involved, one edge per
relation, with the person node carrying the mood as an attribute.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Optional


class OrderError(ValueError):
    """A context interval is empty or inverted (start >= end)."""


class OverlapError(ValueError):
    """A context would overlap an earlier one in the sequence."""


class DanglingEdgeError(ValueError):
    """A graph relation names an entity that was never declared."""


def _require_utc(value: datetime, what: str) -> datetime:
    if value.tzinfo is None or value.utcoffset() != timezone.utc.utcoffset(None):
        raise ValueError(f"{what} must be timezone-aware UTC, got {value!r}")
    return value


def parse_instant(text: str) -> datetime:
    """Parse an ISO-8601 UTC instant (trailing 'Z' accepted)."""
    return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)


def format_instant(value: datetime) -> str:
    """Render an instant as ISO-8601 UTC with millisecond precision."""
    value = value.astimezone(timezone.utc)
    return value.strftime("%Y-%m-%dT%H:%M:%S.") + f"{value.microsecond // 1000:03d}Z"


@dataclass(frozen=True)
class SituationalContext:
    """One closed interval of situated life: where/what/mood/who/tools."""

    id: str
    start: datetime
    end: datetime
    we: Optional[str] = None
    wa: tuple[str, ...] = ()
    wi: Optional[str] = None
    wo: tuple[str, ...] = ()
    wu: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _require_utc(self.start, "start")
        _require_utc(self.end, "end")
        if self.start >= self.end:
            raise OrderError(f"context {self.id}: start {self.start} >= end {self.end}")
        # Normalise list-ish inputs so equality and hashing behave.
        for name in ("wa", "wo", "wu"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    @property
    def duration(self) -> float:
        """Length of the interval in seconds."""
        return (self.end - self.start).total_seconds()

    def contains(self, t: datetime) -> bool:
        """Half-open membership test: start <= t < end."""
        return self.start <= t < self.end

    def label_for(self, category: str) -> Optional[str]:
        """Ground-truth label for a question category (WE/WA/WI/WO/WU).

        Multi-valued dimensions collapse to their first label; an empty
        social/material dimension yields the conventional 'Alone'/'None'.
        """
        category = category.upper()
        if category == "WE":
            return self.we
        if category == "WA":
            return self.wa[0] if self.wa else None
        if category == "WI":
            return self.wi
        if category == "WO":
            return self.wo[0] if self.wo else "Alone"
        if category == "WU":
            return self.wu[0] if self.wu else None
        raise ValueError(f"unknown question category {category!r}")


@dataclass(frozen=True)
class LifeSequence:
    """Time-ordered, non-overlapping contexts bound by a shared purpose."""

    person: str
    contexts: tuple[SituationalContext, ...] = ()
    purpose: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.contexts, tuple):
            object.__setattr__(self, "contexts", tuple(self.contexts))
        previous = None
        for ctx in self.contexts:
            if previous is not None and ctx.start < previous.end:
                raise OverlapError(
                    f"context {ctx.id} starts {ctx.start} before {previous.id} ends {previous.end}"
                )
            previous = ctx

    @property
    def span(self) -> Optional[tuple[datetime, datetime]]:
        if not self.contexts:
            return None
        return self.contexts[0].start, self.contexts[-1].end


def append_context(seq: LifeSequence, ctx: SituationalContext) -> LifeSequence:
    """Return a new sequence with ``ctx`` appended at the tail.

    The new context may start exactly when the previous one ends
    (contiguous boundary) but must not reach back into it.
    """
    if seq.contexts and ctx.start < seq.contexts[-1].end:
        last = seq.contexts[-1]
        raise OverlapError(
            f"context {ctx.id} starts {ctx.start} before {last.id} ends {last.end}"
        )
    return LifeSequence(seq.person, seq.contexts + (ctx,), seq.purpose)


def context_at(seq: LifeSequence, t: datetime) -> Optional[SituationalContext]:
    """The unique context containing ``t``, or None during elapsed time."""
    lo, hi = 0, len(seq.contexts) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        ctx = seq.contexts[mid]
        if t < ctx.start:
            hi = mid - 1
        elif t >= ctx.end:
            lo = mid + 1
        else:
            return ctx
    return None


# --------------------------------------------------------------------------
# Knowledge-graph rendering


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: str
    attributes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", tuple(sorted(self.attributes)))

    def attribute_map(self) -> dict[str, str]:
        return dict(self.attributes)


@dataclass(frozen=True)
class GraphEdge:
    source: str
    label: str
    target: str


@dataclass(frozen=True)
class ContextGraph:
    """Entity/relation rendering of a single situational context."""

    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise ValueError("node ids must be unique within a graph")
        known = set(ids)
        for edge in self.edges:
            if edge.source not in known or edge.target not in known:
                raise DanglingEdgeError(
                    f"edge {edge.label}({edge.source}, {edge.target}) references unknown node"
                )

    def node(self, node_id: str) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


def context_to_graph(
    ctx: SituationalContext,
    entities: Iterable[tuple[str, str, dict[str, str]]] = (),
    relations: Iterable[tuple[str, str, str]] = (),
    person: str = "me",
) -> ContextGraph:
    """Build the knowledge graph of a context.

    ``entities`` are (kind, name, attributes) triples; ``relations`` are
    (source-name, label, target-name) triples whose endpoints must name a
    declared entity or the person.  The person node always exists and
    carries the context mood as its ``Mood`` attribute.
    """
    person_attrs: list[tuple[str, str]] = [("Name", person)]
    if ctx.wi is not None:
        person_attrs.append(("Mood", ctx.wi))
    nodes = [GraphNode(person, "Person", tuple(person_attrs))]
    seen = {person}
    for kind, name, attributes in entities:
        if name in seen:
            raise ValueError(f"duplicate entity name {name!r}")
        seen.add(name)
        nodes.append(GraphNode(name, kind, tuple(sorted(attributes.items()))))
    edges = []
    for source, label, target in relations:
        if source not in seen or target not in seen:
            missing = source if source not in seen else target
            raise DanglingEdgeError(f"relation {label!r} names undeclared entity {missing!r}")
        edges.append(GraphEdge(source, label, target))
    return ContextGraph(tuple(nodes), tuple(edges))


# --------------------------------------------------------------------------
# Line-delimited serialization (one record per context / node / edge)

LIFE_SEQUENCE_SCHEMA = "ilog-life-sequence/1"
GRAPH_SCHEMA = "ilog-context-graph/1"


def write_life_sequence(seq: LifeSequence, out: IO[str]) -> None:
    out.write(json.dumps({"schema": LIFE_SEQUENCE_SCHEMA, "person": seq.person, "purpose": seq.purpose}) + "\n")
    for ctx in seq.contexts:
        record = {
            "record": "context",
            "id": ctx.id,
            "start": format_instant(ctx.start),
            "end": format_instant(ctx.end),
            "we": ctx.we,
            "wa": list(ctx.wa),
            "wi": ctx.wi,
            "wo": list(ctx.wo),
            "wu": list(ctx.wu),
        }
        out.write(json.dumps(record) + "\n")


def read_life_sequence(lines: Iterable[str]) -> LifeSequence:
    it = iter(lines)
    header = json.loads(next(it))
    if header.get("schema") != LIFE_SEQUENCE_SCHEMA:
        raise ValueError(f"unexpected schema {header.get('schema')!r}")
    contexts = []
    for line in it:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        contexts.append(
            SituationalContext(
                id=rec["id"],
                start=parse_instant(rec["start"]),
                end=parse_instant(rec["end"]),
                we=rec.get("we"),
                wa=tuple(rec.get("wa") or ()),
                wi=rec.get("wi"),
                wo=tuple(rec.get("wo") or ()),
                wu=tuple(rec.get("wu") or ()),
            )
        )
    return LifeSequence(header["person"], tuple(contexts), header.get("purpose", ""))


def write_graph(graph: ContextGraph, out: IO[str]) -> None:
    out.write(json.dumps({"schema": GRAPH_SCHEMA}) + "\n")
    for node in graph.nodes:
        out.write(
            json.dumps(
                {"record": "node", "id": node.id, "kind": node.kind, "attributes": dict(node.attributes)}
            )
            + "\n"
        )
    for edge in graph.edges:
        out.write(
            json.dumps({"record": "edge", "source": edge.source, "label": edge.label, "target": edge.target})
            + "\n"
        )


def read_graph(lines: Iterable[str]) -> ContextGraph:
    it = iter(lines)
    header = json.loads(next(it))
    if header.get("schema") != GRAPH_SCHEMA:
        raise ValueError(f"unexpected schema {header.get('schema')!r}")
    nodes, edges = [], []
    for line in it:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec["record"] == "node":
            nodes.append(GraphNode(rec["id"], rec["kind"], tuple(sorted(rec["attributes"].items()))))
        elif rec["record"] == "edge":
            edges.append(GraphEdge(rec["source"], rec["label"], rec["target"]))
        else:
            raise ValueError(f"unknown record type {rec['record']!r}")
    return ContextGraph(tuple(nodes), tuple(edges))


@dataclass(frozen=True)
class ParticipantProfile:
    """Demographic record used for scheduling and feature extraction."""

    id: str
    gender: str = "Unknown"
    degree: str = "Unknown"
    department: str = "Unknown"
    timezone: str = "UTC"


def write_profiles(profiles: Iterable[ParticipantProfile], out: IO[str]) -> None:
    for p in profiles:
        out.write(
            json.dumps(
                {
                    "id": p.id,
                    "gender": p.gender,
                    "degree": p.degree,
                    "department": p.department,
                    "timezone": p.timezone,
                }
            )
            + "\n"
        )


def read_profiles(lines: Iterable[str]) -> list[ParticipantProfile]:
    profiles = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        profiles.append(
            ParticipantProfile(
                id=rec["id"],
                gender=rec.get("gender", "Unknown"),
                degree=rec.get("degree", "Unknown"),
                department=rec.get("department", "Unknown"),
                timezone=rec.get("timezone", "UTC"),
            )
        )
    return profiles
