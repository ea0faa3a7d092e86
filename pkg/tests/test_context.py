import io
import random
from datetime import datetime, timedelta, timezone

import pytest

from ilogcal.context import (
    ContextGraph,
    DanglingEdgeError,
    GraphEdge,
    GraphNode,
    LifeSequence,
    OrderError,
    OverlapError,
    SituationalContext,
    append_context,
    context_at,
    context_to_graph,
    read_graph,
    read_life_sequence,
    write_graph,
    write_life_sequence,
)

UTC = timezone.utc


def t(hour, minute=0):
    return datetime(2020, 11, 2, hour, minute, tzinfo=UTC)


def ctx(cid, start, end, **kw):
    kw.setdefault("we", "office")
    kw.setdefault("wa", ("meeting",))
    return SituationalContext(id=cid, start=start, end=end, **kw)


def brute_force_overlaps(seq: LifeSequence) -> int:
    n = 0
    cs = seq.contexts
    for i in range(len(cs)):
        for j in range(i + 1, len(cs)):
            if cs[i].start < cs[j].end and cs[j].start < cs[i].end:
                n += 1
    return n


def test_append_to_empty_sequence():
    seq = append_context(LifeSequence("me"), ctx("c1", t(12), t(13)))
    assert len(seq.contexts) == 1


def test_append_contiguous_boundary_allowed():
    seq = append_context(LifeSequence("me"), ctx("c1", t(12), t(13)))
    seq = append_context(seq, ctx("c2", t(13), t(13, 30)))
    assert len(seq.contexts) == 2
    assert brute_force_overlaps(seq) == 0


def test_append_overlap_rejected():
    seq = append_context(LifeSequence("me"), ctx("c1", t(12), t(13)))
    with pytest.raises(OverlapError):
        append_context(seq, ctx("c2", t(12, 50), t(13, 30)))


def test_inverted_interval_rejected():
    with pytest.raises(OrderError):
        ctx("bad", t(14), t(13))


def test_random_append_sequences_never_overlap():
    rng = random.Random(5)
    for _ in range(50):
        seq = LifeSequence("me")
        cursor = t(0)
        for i in range(rng.randint(1, 20)):
            if rng.random() < 0.3:
                cursor += timedelta(minutes=rng.randint(1, 30))
            end = cursor + timedelta(minutes=rng.randint(1, 120))
            seq = append_context(seq, ctx(f"c{i}", cursor, end))
            cursor = end
        assert brute_force_overlaps(seq) == 0
        first, last = seq.contexts[0].start, seq.contexts[-1].end
        assert sum(c.duration for c in seq.contexts) <= (last - first).total_seconds()


def everyday_sequence():
    """Lunch at a pizzeria, a drive, then an office meeting."""
    pizzeria = SituationalContext(
        "t1", t(12), t(13), we="pizzeria", wa=("having lunch",), wi="happy", wo=("John",)
    )
    driving = SituationalContext(
        "t2", t(13), t(13, 30), we="car", wa=("driving",), wi="worried", wo=(), wu=("car",)
    )
    meeting = SituationalContext(
        "t3", t(13, 30), t(14, 30), we="office", wa=("meeting",), wi="neutral", wo=("Bob",),
        wu=("projector", "laptop"),
    )
    seq = LifeSequence("me")
    for c in (pizzeria, driving, meeting):
        seq = append_context(seq, c)
    return seq


def test_context_at_hits_the_meeting():
    seq = everyday_sequence()
    found = context_at(seq, t(14))
    assert found is not None and found.id == "t3" and found.wa == ("meeting",)


def test_context_at_gap_returns_none():
    seq = append_context(LifeSequence("me"), ctx("c1", t(12), t(13)))
    seq = append_context(seq, ctx("c2", t(14), t(15)))
    assert context_at(seq, t(13, 30)) is None


def test_context_at_half_open_boundary():
    seq = everyday_sequence()

    def brute(at):
        hits = [c for c in seq.contexts if c.start <= at < c.end]
        assert len(hits) <= 1
        return hits[0] if hits else None

    for probe in (t(12), t(13), t(13, 30), t(14, 30), t(11, 59), t(15)):
        assert context_at(seq, probe) == brute(probe)
    # end instant belongs to the successor, or to nothing
    assert context_at(seq, t(14, 30)) is None


def test_context_at_matches_brute_force_on_random_probes():
    seq = everyday_sequence()
    rng = random.Random(3)
    for _ in range(200):
        probe = t(11) + timedelta(seconds=rng.randint(0, 5 * 3600))
        hits = [c for c in seq.contexts if c.start <= probe < c.end]
        assert len(hits) <= 1
        assert context_at(seq, probe) == (hits[0] if hits else None)


# --------------------------------------------------------------------------
# Graphs


def test_office_meeting_graph():
    meeting = everyday_sequence().contexts[-1]
    graph = context_to_graph(
        meeting,
        entities=[
            ("Person", "Bob", {"Name": "Bob"}),
            ("Room", "office", {"Kind": "workplace room"}),
            ("Room", "workplace", {}),
            ("Furniture", "office table", {}),
        ],
        relations=[
            ("office", "PartOf", "workplace"),
            ("Bob", "in", "office"),
            ("office table", "in", "office"),
            ("me", "in", "office"),
        ],
    )
    assert len(graph.nodes) == 5
    assert GraphEdge("office", "PartOf", "workplace") in graph.edges
    assert graph.node("me").attribute_map()["Mood"] == "neutral"


def test_graph_with_zero_entities():
    graph = context_to_graph(everyday_sequence().contexts[0])
    assert len(graph.nodes) == 1 and len(graph.edges) == 0
    assert graph.nodes[0].kind == "Person"


def test_dangling_relation_rejected():
    with pytest.raises(DanglingEdgeError):
        context_to_graph(
            everyday_sequence().contexts[0],
            entities=[("Room", "office", {})],
            relations=[("office", "PartOf", "kitchen")],
        )


def test_graph_roundtrip_is_isomorphic():
    meeting = everyday_sequence().contexts[-1]
    graph = context_to_graph(
        meeting,
        entities=[("Person", "Bob", {"Name": "Bob"}), ("Room", "office", {"Kind": "room"})],
        relations=[("Bob", "in", "office")],
    )
    buffer = io.StringIO()
    write_graph(graph, buffer)
    reread = read_graph(io.StringIO(buffer.getvalue()))
    assert set(reread.nodes) == set(graph.nodes)
    assert set(reread.edges) == set(graph.edges)


def test_life_sequence_roundtrip():
    seq = everyday_sequence()
    buffer = io.StringIO()
    write_life_sequence(seq, buffer)
    reread = read_life_sequence(io.StringIO(buffer.getvalue()))
    assert reread == seq
