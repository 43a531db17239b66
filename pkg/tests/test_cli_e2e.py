"""Full-pipeline CLI run on the synthetic name-match corpus.

Exercises build-graph -> static-edges --ingest -> train -> evaluate through
the command-line interface only, asserting the same held-out quality bar as
the library-level end-to-end criterion. Slow (trains a real model).
"""

from __future__ import annotations

import json

from callranker.cli import main
from callranker.edges import write_edge_file
from callranker.graph import load_graph
from synthetic import make_name_match_project


def run_cli(*args) -> int:
    return main([str(a) for a in args])


def test_full_pipeline_reaches_learning_bar(tmp_path):
    project = tmp_path / "proj"
    graph, truth = make_name_match_project(
        project, n_funcs=60, n_files=6, calls_per_func=5, seed=7
    )
    graph_path = tmp_path / "graph.json"
    export_path = tmp_path / "analyzer_export.ndjson"
    edges_path = tmp_path / "static.ndjson"
    model_path = tmp_path / "model.ckpt"
    report_path = tmp_path / "report.json"

    assert run_cli("build-graph", "--project", project, "--out", graph_path) == 0
    write_edge_file(export_path, truth, graph)  # plays the external analyzer

    assert (
        run_cli(
            "static-edges",
            "--project", project,
            "--ingest", export_path,
            "--out", edges_path,
        )
        == 0
    )
    assert (
        run_cli(
            "train",
            "--graph", graph_path,
            "--edges", edges_path,
            "--out", model_path,
            "--epochs", 150,
            "--batch-size", 32,
            "--seed", 11,
            "--single-thread",
            "--no-call-msg-edges",
        )
        == 0
    )
    assert (
        run_cli(
            "evaluate",
            "--graph", graph_path,
            "--model", model_path,
            "--edges", edges_path,
            "--out", report_path,
        )
        == 0
    )
    report = json.loads(report_path.read_text())
    assert report["hit_at"]["1"] >= 0.8
    assert report["meta"]["tool_version"]

    # rank the first unresolved-looking call site through the CLI as well
    loaded = load_graph(graph_path)
    node = loaded.node(loaded.call_sites()[0])
    assert (
        run_cli(
            "rank",
            "--graph", graph_path,
            "--model", model_path,
            "--edges", edges_path,
            "--callsite", f"{node.file}:{node.start}",
            "--k", 5,
        )
        == 0
    )
    print(f"PASS: CLI end-to-end pipeline: evaluate reports hit@1 {report['hit_at']['1']:.3f} >= 0.8")


def test_transfer_cli_two_micro_projects(tmp_path):
    import json as _json

    manifests = []
    for name, seed in (("alpha", 31), ("beta", 32)):
        project = tmp_path / name
        graph, truth = make_name_match_project(
            project, n_funcs=12, n_files=3, calls_per_func=2, seed=seed
        )
        edges_path = tmp_path / f"{name}.ndjson"
        write_edge_file(edges_path, truth, graph)
        manifests.append(
            {"name": name, "project_dir": str(project), "edges": str(edges_path)}
        )
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(
        _json.dumps(
            {
                "projects": manifests,
                "hyperparams": {
                    "hidden_dim": 16,
                    "layers": 2,
                    "max_epochs": 3,
                    "batch_size": 16,
                    "seed": 5,
                    "include_call_edges": False,
                    "single_thread": True,
                },
            }
        )
    )
    out = tmp_path / "transfer.json"
    assert run_cli("transfer", "--manifest", manifest_path, "--out", out) == 0
    report = _json.loads(out.read_text())
    assert len(report["folds"]) == 2
    assert {f["held_out"] for f in report["folds"]} == {"alpha", "beta"}
    assert "weighted" in report
