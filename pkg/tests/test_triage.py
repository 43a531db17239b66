from __future__ import annotations

import json
import random
import threading
import urllib.request

import pytest

from callranker.edges import ingest_static_edges, write_edge_file
from callranker.features import compute_features
from callranker.heuristic import heuristic_static_resolve
from callranker.model import Hyperparams, Scorer, init_model
from callranker.ranking import rank_callsite
from callranker.triage import (
    DecisionLog,
    TriageDecision,
    TriageService,
    accepted_edges,
    export_augmented,
    list_unresolved,
    make_server,
)
from conftest import build_linked


@pytest.fixture()
def triage_setup(make_project, tmp_path):
    project = make_project(
        {
            "a.js": "function local(){}\nlocal();\nfunction helper(x){ return x; }\n",
            "b.js": "var fn = unresolved_call();\nhelper(fn);\n",
        }
    )
    graph = build_linked(project)
    static_edges = heuristic_static_resolve(graph)
    hp = Hyperparams(hidden_dim=8, layers=2, name_buckets=16, seed=4)
    scorer = Scorer.for_graph(init_model(hp).eval(), graph, compute_features(graph))
    log = DecisionLog(tmp_path / "decisions.ndjson")
    return graph, scorer, static_edges, log


def test_list_unresolved_set_difference(triage_setup):
    graph, _scorer, static_edges, _log = triage_setup
    unresolved = list_unresolved(graph, static_edges)
    resolved_sites = {e.callsite for e in static_edges}
    assert len(unresolved) == len(graph.call_sites()) - len(resolved_sites)
    assert set(unresolved).isdisjoint(resolved_sites)
    # ordered by (file, span)
    keys = [(graph.node(i).file, graph.node(i).start) for i in unresolved]
    assert keys == sorted(keys)


def test_all_resolved_gives_empty_list(make_project):
    graph = build_linked(make_project({"x.js": "function f(){}\nf();\n"}))
    static_edges = heuristic_static_resolve(graph)
    assert list_unresolved(graph, static_edges) == []


def test_figs_unresolved_contains_show_position(figs_graph):
    static_edges = heuristic_static_resolve(figs_graph)
    unresolved = list_unresolved(figs_graph, static_edges)
    source = figs_graph.sources["caller.js"].decode()
    target = source.index("lexer.showPosition()")
    assert any(
        figs_graph.node(i).file == "caller.js" and figs_graph.node(i).start == target
        for i in unresolved
    )


def test_accept_then_export_and_supersession(triage_setup):
    graph, _scorer, static_edges, log = triage_setup
    unresolved = list_unresolved(graph, static_edges)
    fn_defs = sorted(graph.function_defs())
    site = unresolved[0]

    merged, analyst = export_augmented(graph, static_edges, log)
    assert merged == static_edges and len(analyst) == 0

    log.append(TriageDecision(site, fn_defs[0], "accepted", "a1"))
    merged, analyst = export_augmented(graph, static_edges, log)
    assert len(merged) == len(static_edges) + 1
    assert analyst.pairs() == {(site, fn_defs[0])}
    edge = analyst.get((site, fn_defs[0]))
    assert edge.provenances == frozenset({"analyst"})

    # accept a different callee for the same site: only the later one survives
    log.append(TriageDecision(site, fn_defs[1], "accepted", "a1"))
    _merged, analyst = export_augmented(graph, static_edges, log)
    assert analyst.pairs() == {(site, fn_defs[1])}

    # reject-all supersedes the accept
    log.append(TriageDecision(site, None, "rejected", "a1"))
    merged, analyst = export_augmented(graph, static_edges, log)
    assert len(analyst) == 0 and merged == static_edges


def test_export_round_trips_through_ingest(triage_setup, tmp_path):
    graph, _scorer, static_edges, log = triage_setup
    unresolved = list_unresolved(graph, static_edges)
    fn_defs = sorted(graph.function_defs())
    log.append(TriageDecision(unresolved[0], fn_defs[0], "accepted", "a"))
    merged, _analyst = export_augmented(graph, static_edges, log)
    path = tmp_path / "export.ndjson"
    write_edge_file(path, merged, graph)
    result = ingest_static_edges(path, graph)
    assert result.edges.pairs() == merged.pairs()


def test_random_decision_log_replay_matches_reference_fold(triage_setup):
    graph, _scorer, static_edges, log = triage_setup
    rng = random.Random(9)
    sites = graph.call_sites()
    fn_defs = sorted(graph.function_defs())
    reference: dict[int, tuple] = {}
    for _ in range(100):
        site = rng.choice(sites)
        verdict = rng.choice(["accepted", "rejected", "skipped"])
        callee = rng.choice(fn_defs) if verdict == "accepted" else None
        log.append(TriageDecision(site, callee, verdict, "bot"))
        reference[site] = (verdict, callee)
    expected = {
        (site, callee)
        for site, (verdict, callee) in reference.items()
        if verdict == "accepted"
    }
    assert accepted_edges(graph, log).pairs() == expected

    # a fresh log object folding the same file reaches the same state
    replayed = DecisionLog(log.path)
    assert accepted_edges(graph, replayed).pairs() == expected


# -- live service ----------------------------------------------------------------


@pytest.fixture()
def live_service(triage_setup):
    graph, scorer, static_edges, log = triage_setup
    service = TriageService(graph, scorer, static_edges, log)
    server = make_server(service, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield graph, scorer, service, base
    server.shutdown()


def get_json(url):
    with urllib.request.urlopen(url) as response:
        return json.loads(response.read())


def post_json(url, payload):
    request = urllib.request.Request(
        url,
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(request) as response:
        return response.status, json.loads(response.read())


def test_service_endpoints_round_trip(live_service):
    graph, scorer, _service, base = live_service
    unresolved = get_json(f"{base}/v1/unresolved")
    assert unresolved["progress"]["decided"] == 0
    site = unresolved["callsites"][0]["id"]

    candidates = get_json(f"{base}/v1/candidates/{site}?k=2")
    assert len(candidates["candidates"]) == 2
    scores = [c["score"] for c in candidates["candidates"]]
    assert scores == sorted(scores, reverse=True)

    # scores match the library ranking exactly (cross-interface consistency)
    ranking = rank_callsite(scorer, graph, site)
    assert scores == [s for _c, s in ranking.candidates[:2]]
    assert [c["id"] for c in candidates["candidates"]] == [
        c for c, _s in ranking.candidates[:2]
    ]

    callee = candidates["candidates"][0]["id"]
    status, stored = post_json(
        f"{base}/v1/decisions",
        {"callsite": site, "callee": callee, "verdict": "accepted", "analyst": "t"},
    )
    assert status == 201 and stored["id"] == 0

    export = urllib.request.urlopen(f"{base}/v1/export").read().decode()
    records = [json.loads(l) for l in export.splitlines()]
    assert any(r["provenance"] == "analyst" for r in records)

    unresolved2 = get_json(f"{base}/v1/unresolved")
    assert unresolved2["progress"]["decided"] == 1

    analyst_only = urllib.request.urlopen(f"{base}/v1/export?only=analyst").read().decode()
    assert all(json.loads(l)["provenance"] == "analyst" for l in analyst_only.splitlines())


def test_service_validation_errors(live_service):
    graph, _scorer, _service, base = live_service
    site = graph.call_sites()[0]
    with pytest.raises(urllib.error.HTTPError) as err:
        post_json(
            f"{base}/v1/decisions",
            {"callsite": site, "callee": site, "verdict": "accepted", "analyst": "t"},
        )
    assert err.value.code == 400
    with pytest.raises(urllib.error.HTTPError) as err404:
        get_json(f"{base}/v1/candidates/999999")
    assert err404.value.code == 404


def test_k_larger_than_candidate_count(live_service):
    graph, _scorer, _service, base = live_service
    site = graph.call_sites()[0]
    payload = get_json(f"{base}/v1/candidates/{site}?k=999")
    assert len(payload["candidates"]) == len(graph.function_defs())
    argmax = get_json(f"{base}/v1/candidates/{site}?k=1")
    assert len(argmax["candidates"]) == 1
    assert argmax["candidates"][0]["id"] == payload["candidates"][0]["id"]


def test_static_ui_assets_served(triage_setup, tmp_path):
    graph, scorer, static_edges, log = triage_setup
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>triage</body></html>")
    (ui / "app.js").write_text("console.log(1);")
    service = TriageService(graph, scorer, static_edges, log, ui_dir=ui)
    server = make_server(service, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        with urllib.request.urlopen(f"{base}/") as response:
            assert b"triage" in response.read()
        with urllib.request.urlopen(f"{base}/app.js") as response:
            assert response.headers["Content-Type"] == "text/javascript"
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(f"{base}/../secret")
        assert err.value.code == 404
    finally:
        server.shutdown()
