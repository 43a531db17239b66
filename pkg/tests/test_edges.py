from __future__ import annotations

import collections
import math

import pytest

from callranker.edges import (
    CallEdgeSet,
    SpanIndex,
    ingest_static_edges,
    merge_edge_sets,
    read_edge_records,
    resolve_records,
    sample_negatives,
    write_edge_file,
)
from callranker.errors import DataError
from conftest import build_linked


@pytest.fixture()
def call_graph(make_project):
    return build_linked(
        make_project(
            {
                "a.js": "function f(x) { return x; }\nfunction g(y) { return f(y); }\n",
                "b.js": "var z = g(f(1));\n",
            }
        )
    )


def record_for(graph, callsite, callee, provenance="static", count=0):
    cs, fn = graph.node(callsite), graph.node(callee)
    return {
        "caller": {"file": cs.file, "start": cs.start, "end": cs.end},
        "callee": {"file": fn.file, "start": fn.start, "end": fn.end},
        "provenance": provenance,
        "count": count,
    }


def test_empty_export(tmp_path, call_graph):
    path = tmp_path / "edges.ndjson"
    path.write_text("", encoding="utf-8")
    result = ingest_static_edges(path, call_graph)
    assert len(result.edges) == 0
    assert result.diagnostics == []


def test_exact_span_record_resolves(tmp_path, call_graph):
    cs = call_graph.call_sites()[0]
    fn = call_graph.function_defs()[0]
    result = resolve_records([record_for(call_graph, cs, fn)], call_graph)
    assert result.edges.pairs() == {(cs, fn)}
    assert result.unresolved == 0


def test_position_inside_argument_resolves_to_smallest_enclosing(call_graph):
    # b.js: g(f(1)) — a point inside f's argument list must land on f's call,
    # cross-checked against a brute-force scan over all call-site spans.
    source = call_graph.sources["b.js"].decode()
    inner_start = source.index("f(1)")
    point = inner_start + 2  # inside f's argument list
    index = SpanIndex(call_graph, call_graph.call_sites())
    resolved = index.smallest_enclosing("b.js", point)

    containing = [
        call_graph.node(i)
        for i in call_graph.call_sites()
        if call_graph.node(i).file == "b.js"
        and call_graph.node(i).start <= point < call_graph.node(i).end
    ]
    best = min(containing, key=lambda n: n.end - n.start)
    assert call_graph.node(resolved).start == best.start == inner_start


def test_malformed_records_and_hard_error(tmp_path, call_graph):
    cs, fn = call_graph.call_sites()[0], call_graph.function_defs()[0]
    good = record_for(call_graph, cs, fn)
    path = tmp_path / "edges.ndjson"
    import json

    path.write_text(
        json.dumps(good) + "\n" + "{not json}\n" + json.dumps({"caller": 1}) + "\n",
        encoding="utf-8",
    )
    result = ingest_static_edges(path, call_graph)
    assert len(result.edges) == 1
    assert len(result.diagnostics) == 2

    # >50% unresolvable -> hard error
    bad = dict(good, callee={"file": "missing.js", "start": 0, "end": 1})
    path.write_text(json.dumps(bad) + "\n", encoding="utf-8")
    with pytest.raises(DataError):
        ingest_static_edges(path, call_graph)


def test_round_trip_through_edge_file(tmp_path, call_graph):
    edges = CallEdgeSet()
    call_sites = call_graph.call_sites()
    fn_defs = call_graph.function_defs()
    edges.add(call_sites[0], fn_defs[0], "static")
    edges.add(call_sites[1], fn_defs[1], "dynamic", count=4)
    path = tmp_path / "edges.ndjson"
    write_edge_file(path, edges, call_graph, meta={"tool_version": "t", "seed": 0})
    result = ingest_static_edges(path, call_graph)
    assert result.edges == edges
    records, diags = read_edge_records(path)
    assert diags == []
    assert len(records) == 2  # meta line skipped


def test_merge_identity_and_doubling(call_graph):
    cs, fn = call_graph.call_sites()[0], call_graph.function_defs()[0]
    s = CallEdgeSet()
    s.add(cs, fn, "dynamic", count=2)
    assert merge_edge_sets(call_graph, [s, CallEdgeSet()]) == s
    doubled = merge_edge_sets(call_graph, [s, s])
    assert doubled.get((cs, fn)).count == 4
    assert doubled.get((cs, fn)).provenances == frozenset({"dynamic"})


def test_merge_disjoint_sizes_and_provenance_union(call_graph):
    call_sites, fn_defs = call_graph.call_sites(), call_graph.function_defs()
    a, b = CallEdgeSet(), CallEdgeSet()
    a.add(call_sites[0], fn_defs[0], "static")
    b.add(call_sites[1], fn_defs[1], "dynamic", count=1)
    merged = merge_edge_sets(call_graph, [a, b])
    assert len(merged) == 2
    both = CallEdgeSet()
    both.add(call_sites[0], fn_defs[0], "dynamic", count=1)
    merged2 = merge_edge_sets(call_graph, [a, both])
    assert merged2.get((call_sites[0], fn_defs[0])).provenances == frozenset(
        {"static", "dynamic"}
    )


def test_merge_unknown_node_is_error(call_graph):
    s = CallEdgeSet()
    s.add(99999, 99998, "static")
    with pytest.raises(DataError):
        merge_edge_sets(call_graph, [s])


def test_sample_negatives_trivial_and_forced(make_project):
    graph = build_linked(
        make_project({"x.js": "function a() {}\nfunction b() {}\na();\n"})
    )
    positives = CallEdgeSet()
    assert sample_negatives(graph, positives, 0, seed=1) == []
    cs = graph.call_sites()[0]
    d1, d2 = sorted(graph.function_defs())
    positives.add(cs, d1, "static")
    assert sample_negatives(graph, positives, 1, seed=5) == [(cs, d2)]
    with pytest.raises(DataError):
        sample_negatives(graph, positives, 2, seed=5)


def test_sample_negatives_deterministic_and_clean(call_graph):
    positives = CallEdgeSet()
    cs = call_graph.call_sites()[0]
    fn = call_graph.function_defs()[0]
    positives.add(cs, fn, "static")
    a = sample_negatives(call_graph, positives, 3, seed=42)
    b = sample_negatives(call_graph, positives, 3, seed=42)
    assert a == b
    assert len(set(a)) == 3
    for seed in range(30):
        for pair in sample_negatives(call_graph, positives, 4, seed=seed):
            assert pair not in positives.pairs()


def test_sample_negatives_uniform_within_3_sigma(make_project):
    defs = "\n".join(f"function d{i}() {{}}" for i in range(6))
    calls = "\n".join(f"d{i}();" for i in range(5))
    graph = build_linked(make_project({"x.js": defs + "\n" + calls + "\n"}))
    positives = CallEdgeSet()
    n_draw, reseeds = 10, 50
    counts = collections.Counter()
    for seed in range(reseeds):
        for pair in sample_negatives(graph, positives, n_draw, seed=seed):
            counts[pair] += 1
    total_pairs = len(graph.call_sites()) * len(graph.function_defs())
    p = n_draw / total_pairs  # per-reseed inclusion probability (no replacement)
    sigma = math.sqrt(reseeds * p * (1 - p))
    expected = reseeds * p
    for pair_count in counts.values():
        assert abs(pair_count - expected) <= 3 * sigma + 1e-9
