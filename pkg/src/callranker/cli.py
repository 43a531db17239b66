"""Command-line pipeline: one subcommand per stage, file formats as the
only interface between stages.

Exit codes: 0 success, 1 usage error, 2 data/toolchain error. With --json,
errors go to stderr as one JSON object. Every output file embeds
{tool_version, seed, input_digests} metadata; reruns with unchanged inputs
and seed are byte-identical (single-threaded mode).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import jsparse
from .edges import (
    CallEdgeSet,
    ingest_static_edges,
    merge_edge_sets,
            write_edge_file,
)
from .errors import CallRankerError, DataError
from .evaluate import aggregate_weighted, evaluate, roc_vs_ranking_demo
from .features import compute_features
from .fileio import TOOL_VERSION, file_digest, output_meta, write_canonical_json
from .graph import ProgramGraph, load_graph, parse_project, save_graph
from .heuristic import heuristic_static_resolve
from .instrument import SiteMap, instrument_project
from .kinds import DEFAULT_PRUNE_KINDS
from .model import Hyperparams, Scorer, load_checkpoint, save_checkpoint
from .prune import prune
from .ranking import rank_callsite, split_edges
from .semantic import link_identifiers
from .traces import parse_traces
from .train import train as train_model
from .transfer import ProjectData, transfer_eval
from .triage import DecisionLog, TriageService, make_server


def _echo_diag(messages, as_json: bool) -> None:
    if not messages:
        return
    if as_json:
        click.echo(json.dumps({"diagnostics": messages}), err=True)
    else:
        for message in messages:
            click.echo(f"warning: {message}", err=True)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc


def _build_graph(project: str, include: tuple[str, ...], prune_kinds: tuple[str, ...]):
    graph = parse_project(project, include or jsparse.DEFAULT_INCLUDE_GLOBS)
    kinds = frozenset(prune_kinds) if prune_kinds else DEFAULT_PRUNE_KINDS
    return link_identifiers(prune(graph, kinds)), kinds


def _graph_for(
    graph_path: str | None,
    project: str | None,
    include: tuple[str, ...] = (),
    prune_kinds: tuple[str, ...] = (),
) -> ProgramGraph:
    if graph_path:
        graph = load_graph(graph_path)
        if project:
            graph.sources = jsparse.read_sources(project, list(graph.files))
        return graph
    if project:
        graph, _ = _build_graph(project, include, prune_kinds)
        return graph
    raise click.UsageError("one of --graph or --project is required")


def _hyperparams(config: dict, **overrides) -> Hyperparams:
    base = dict(config.get("hyperparams", {}))
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    return Hyperparams.from_dict(base)


def _positives(edges_path: str, graph: ProgramGraph, as_json: bool) -> CallEdgeSet:
    result = ingest_static_edges(edges_path, graph)
    _echo_diag(result.diagnostics, as_json)
    return result.edges


@click.group()
@click.version_option(version=TOOL_VERSION, prog_name="callranker")
@click.option("--json", "as_json", is_flag=True, help="machine-readable diagnostics")
@click.pass_context
def cli(ctx, as_json):
    """Program-graph link prediction for JavaScript call graphs."""
    ctx.ensure_object(dict)
    ctx.obj["json"] = as_json


@cli.command("build-graph")
@click.option("--project", type=click.Path(exists=True, file_okay=False))
@click.option("--include", multiple=True, help="source glob (repeatable)")
@click.option("--prune-kind", "prune_kinds", multiple=True, help="override prune set")
@click.option("--seed", type=int, default=None)
@click.option("--config", type=click.Path(exists=True),
              help="pipeline config JSON; flags override its fields")
@click.option("--out", type=click.Path())
@click.pass_context
def build_graph_cmd(ctx, project, include, prune_kinds, seed, config, out):
    """Parse, prune and semantically link a project into a graph file."""
    cfg = _load_config(config)
    project = project or cfg.get("project_dir")
    if not project:
        raise click.UsageError("--project is required (flag or config project_dir)")
    out = out or cfg.get("outputs", {}).get("graph")
    if not out:
        raise click.UsageError("--out is required (flag or config outputs.graph)")
    seed = cfg.get("seed", 0) if seed is None else seed
    include = include or tuple(cfg.get("include_globs", ()))
    prune_kinds = prune_kinds or tuple(cfg.get("prune_kinds", ()))
    graph, kinds = _build_graph(project, include, prune_kinds)
    meta = output_meta(
        seed,
        {"project": graph.meta.get("source_digest", "")},
        prune_kinds=sorted(kinds),
        diagnostics=[{"file": d.file, "message": d.message} for d in graph.diagnostics],
    )
    save_graph(graph, out, meta)
    _echo_diag([f"{d.file}: {d.message}" for d in graph.diagnostics], ctx.obj["json"])
    click.echo(f"wrote {out}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")


@cli.command("static-edges")
@click.option("--project", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--ingest", "ingest_path", type=click.Path(exists=True))
@click.option("--heuristic", "use_heuristic", is_flag=True)
@click.option("--include", multiple=True)
@click.option("--prune-kind", "prune_kinds", multiple=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def static_edges_cmd(ctx, project, ingest_path, use_heuristic, include, prune_kinds, seed, out):
    """Produce a static call-edge file: ingest an export or run the resolver."""
    if bool(ingest_path) == use_heuristic:
        raise click.UsageError("exactly one of --ingest FILE or --heuristic is required")
    graph, _ = _build_graph(project, include, prune_kinds)
    digests = {"project": graph.meta.get("source_digest", "")}
    if use_heuristic:
        edge_set = heuristic_static_resolve(graph)
    else:
        result = ingest_static_edges(ingest_path, graph)
        _echo_diag(result.diagnostics, ctx.obj["json"])
        edge_set = result.edges
        digests["export"] = file_digest(ingest_path)
    write_edge_file(out, edge_set, graph, output_meta(seed, digests))
    click.echo(f"wrote {out}: {len(edge_set)} edges")


@cli.command("instrument")
@click.option("--project", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--include", multiple=True)
@click.pass_context
def instrument_cmd(ctx, project, out_dir, include):
    """Copy the project with call tracing injected (logger shim included)."""
    site_map = instrument_project(
        project, out_dir, include or jsparse.DEFAULT_INCLUDE_GLOBS
    )
    _echo_diag(
        [f"{d.file}: {d.message}" for d in site_map.diagnostics], ctx.obj["json"]
    )
    click.echo(
        f"instrumented {len(site_map.files)} files into {out_dir} "
        f"({len(site_map.sites)} sites)"
    )


@cli.command("trace-parse")
@click.option("--trace", required=True, type=click.Path(exists=True))
@click.option("--sitemap", required=True, type=click.Path(exists=True))
@click.option("--project", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--include", multiple=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def trace_parse_cmd(ctx, trace, sitemap, project, include, seed, out):
    """Resolve trace events into a dynamic call-edge file."""
    graph, _ = _build_graph(project, include, ())
    site_map = SiteMap.load(sitemap)
    result = parse_traces(trace, site_map, graph)
    _echo_diag(result.diagnostics, ctx.obj["json"])
    meta = output_meta(
        seed,
        {"trace": file_digest(trace), "project": graph.meta.get("source_digest", "")},
        events=result.events,
        dropped_native=result.dropped_native,
        dropped_external=result.dropped_external,
        dropped_unmapped=result.dropped_unmapped,
    )
    write_edge_file(out, result.edges, graph, meta)
    click.echo(
        f"wrote {out}: {len(result.edges)} edges from {result.events} events "
        f"(dropped {result.dropped_native} native, {result.dropped_external} external, "
        f"{result.dropped_unmapped} unmapped)"
    )


def _hp_options(fn):
    options = [
        click.option("--seed", type=int, default=None),
        click.option("--epochs", type=int, default=None),
        click.option("--batch-size", type=int, default=None),
        click.option("--hidden-dim", type=int, default=None),
        click.option("--layers", type=int, default=None),
        click.option("--lr", type=float, default=None),
        click.option("--no-call-msg-edges", is_flag=True, default=False),
        click.option("--no-semantic-edges", is_flag=True, default=False),
        click.option("--null-features", is_flag=True, default=False),
        click.option("--single-thread", is_flag=True, default=False),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _hp_from_flags(cfg, seed, epochs, batch_size, hidden_dim, layers, lr,
                   no_call_msg_edges, no_semantic_edges, null_features, single_thread):
    return _hyperparams(
        cfg,
        seed=seed,
        max_epochs=epochs,
        batch_size=batch_size,
        hidden_dim=hidden_dim,
        layers=layers,
        lr_init=lr,
        include_call_edges=False if no_call_msg_edges else None,
        use_semantic_edges=False if no_semantic_edges else None,
        null_features=True if null_features else None,
        single_thread=True if single_thread else None,
    )


@cli.command("train")
@click.option("--graph", "graph_path", type=click.Path(exists=True))
@click.option("--project", type=click.Path(exists=True, file_okay=False))
@click.option("--edges", "edges_paths", multiple=True,
              type=click.Path(exists=True),
              help="labeled edge file; repeat to merge (e.g. static + dynamic)")
@click.option("--config", type=click.Path(exists=True),
              help="pipeline config JSON; flags override its fields")
@click.option("--out", type=click.Path())
@click.option("--report", "report_path", type=click.Path())
@_hp_options
@click.pass_context
def train_cmd(ctx, graph_path, project, edges_paths, config, out, report_path, **flags):
    """Train a link predictor on a graph plus labeled edges."""
    cfg = _load_config(config)
    hp = _hp_from_flags(cfg, **flags)
    outputs = cfg.get("outputs", {})
    graph_path = graph_path or outputs.get("graph")
    project = project or cfg.get("project_dir")
    edges_paths = edges_paths or tuple(p for p in [outputs.get("edges")] if p)
    out = out or outputs.get("checkpoint")
    if not edges_paths:
        raise click.UsageError("--edges is required (flag or config outputs.edges)")
    if not out:
        raise click.UsageError("--out is required (flag or config outputs.checkpoint)")
    graph = _graph_for(graph_path, project)
    positives = merge_edge_sets(
        graph, [_positives(p, graph, ctx.obj["json"]) for p in edges_paths]
    )
    model, report, splits = train_model(graph, compute_features(graph), positives, hp)
    digests = {f"edges_{i}": file_digest(p) for i, p in enumerate(edges_paths)}
    if graph_path:
        digests["graph"] = file_digest(graph_path)
    save_checkpoint(
        out,
        model,
        metrics={
            "best_epoch": report.best_epoch,
            "best_val_hit_at_5": report.best_val_metric,
            "epochs_run": len(report.epochs),
            "stop_reason": report.stop_reason,
            "wall_time_s": report.wall_time_s,
        },
        input_digests=digests,
        splits={name: sorted(s.pairs()) for name, s in splits.items()},
    )
    if report_path:
        write_canonical_json(
            report_path,
            {
                "meta": output_meta(hp.seed, digests),
                "epochs": report.epochs,
                "stop_reason": report.stop_reason,
                "best_epoch": report.best_epoch,
                "best_val_hit_at_5": report.best_val_metric,
                "wall_time_s": report.wall_time_s,
            },
        )
    click.echo(
        f"wrote {out}: best epoch {report.best_epoch} "
        f"(val hit@5 {report.best_val_metric:.3f}, stop: {report.stop_reason})"
    )


def _scorer_from(model, graph, edges_path, as_json) -> tuple[Scorer, CallEdgeSet | None]:
    """Scorer with the training-split message edges, when an edge file is given."""
    train_split = None
    if edges_path:
        positives = _positives(edges_path, graph, as_json)
        train_split, _val, _test = split_edges(
            positives, model.hp.split, model.hp.seed
        )
    return (
        Scorer.for_graph(model, graph, compute_features(graph), train_split),
        train_split,
    )


def _locate_callsite(graph: ProgramGraph, spec: str) -> int:
    file, _, start = spec.rpartition(":")
    if not file:
        raise click.UsageError("--callsite takes FILE:START")
    try:
        start_int = int(start)
    except ValueError:
        raise click.UsageError("--callsite START must be an integer") from None
    for cs in graph.call_sites():
        node = graph.node(cs)
        if node.file == file and node.start == start_int:
            return cs
    raise DataError(f"no call site at {file}:{start_int}")


@cli.command("rank")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", type=click.Path(exists=True))
@click.option("--callsite", required=True, help="FILE:START of the call site")
@click.option("--k", type=int, default=20, show_default=True)
@click.pass_context
def rank_cmd(ctx, graph_path, model_path, edges_path, callsite, k):
    """Rank candidate callees for one call site (top-k by score)."""
    graph = load_graph(graph_path)
    model, _sidecar = load_checkpoint(model_path)
    scorer, _ = _scorer_from(model, graph, edges_path, ctx.obj["json"])
    ranking = rank_callsite(scorer, graph, _locate_callsite(graph, callsite))
    for callee, score in ranking.candidates[:k]:
        node = graph.node(callee)
        click.echo(
            json.dumps(
                {
                    "callee": callee,
                    "score": score,
                    "kind": node.kind,
                    "file": node.file,
                    "start": node.start,
                    "end": node.end,
                }
            )
        )


@cli.command("evaluate")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", type=click.Path(exists=True),
              help="full labeled set; the held-out test split is evaluated")
@click.option("--test-edges", "test_edges_path", type=click.Path(exists=True),
              help="explicit test set (e.g. dynamic edges)")
@click.option("--categorize", "with_categories", is_flag=True)
@click.option("--with-metric-comparison", is_flag=True)
@click.option("--predictions", "predictions_path", type=click.Path())
@click.option("--plots", "plots_dir", type=click.Path())
@click.option("--top-k", type=int, default=20, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def evaluate_cmd(ctx, graph_path, model_path, edges_path, test_edges_path,
                 with_categories, with_metric_comparison, predictions_path,
                 plots_dir, top_k, out):
    """Rank held-out edges and write a metrics report."""
    if not edges_path and not test_edges_path:
        raise click.UsageError("need --edges (split evaluation) or --test-edges")
    graph = load_graph(graph_path)
    model, _sidecar = load_checkpoint(model_path)
    scorer, train_split = _scorer_from(model, graph, edges_path, ctx.obj["json"])
    if test_edges_path:
        test_set = _positives(test_edges_path, graph, ctx.obj["json"])
        if train_split is not None:
            test_set = test_set.subset(test_set.pairs() - train_split.pairs())
    else:
        positives = _positives(edges_path, graph, ctx.obj["json"])
        _train, _val, test_set = split_edges(positives, model.hp.split, model.hp.seed)
    summary, rankings = evaluate(scorer, graph, test_set, categorize=with_categories)
    digests = {"graph": file_digest(graph_path), "model": file_digest(model_path)}
    report = {
        "meta": output_meta(model.hp.seed, digests),
        "n_edges": summary.n_edges,
        "hit_at": {str(k): v for k, v in summary.hit_at.items()},
        "rank_histogram": summary.rank_hist,
        "runtime_s": summary.runtime_s,
    }
    if with_categories:
        report["categories"] = summary.categories
        report["category_taxonomy_note"] = (
            "six-label taxonomy is a reconstruction; precedence: "
            "indirect_apply_call > higher_order > anonymous_callee > "
            "cross_file_diff_name > cross_file_same_name > same_file_direct"
        )
    if with_metric_comparison:
        report["metric_comparison"] = roc_vs_ranking_demo(seed=model.hp.seed)
    write_canonical_json(out, report)
    if predictions_path:
        _write_predictions(predictions_path, graph, rankings, top_k, with_categories, test_set)
    if plots_dir:
        _write_plots(plots_dir, summary)
    click.echo(
        f"wrote {out}: n={summary.n_edges} hit@1={summary.hit_at[1]:.3f} "
        f"hit@5={summary.hit_at[5]:.3f}"
    )


def _write_predictions(path, graph, rankings, top_k, with_categories, test_set):
    from .categories import categorize_edge

    lines = []
    for ranking in rankings:
        record = {
            "callsite": ranking.callsite,
            "candidates": [
                {"callee": c, "score": s} for c, s in ranking.candidates[:top_k]
            ],
            "true_callee": ranking.true_callee,
            "rank": ranking.rank,
            "category": None,
        }
        if with_categories and ranking.true_callee is not None:
            edge = test_set.get((ranking.callsite, ranking.true_callee))
            if edge is not None:
                record["category"] = categorize_edge(graph, edge)
        lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_plots(plots_dir, summary) -> None:
    try:
        import matplotlib
    except ImportError as exc:
        raise DataError("matplotlib is required for --plots") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(plots_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 4))
    bins = list(range(len(summary.rank_hist)))
    ax.bar(bins, summary.rank_hist, color="#3465a4")
    ax.set_xlabel("rank of true callee")
    ax.set_ylabel("call sites")
    labels = [str(b) for b in bins[:-1]] + [f"{len(bins) - 1}+"]
    ax.set_xticks(bins, labels, fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "rank_histogram.png", dpi=120)
    plt.close(fig)


@cli.command("transfer")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@_hp_options
@click.pass_context
def transfer_cmd(ctx, manifest, out, **flags):
    """Five-fold-style transfer: train on all-but-one project, test on it."""
    spec = _load_config(manifest)
    hp = _hp_from_flags(spec, **flags)
    projects = []
    for entry in spec.get("projects", []):
        graph, _ = _build_graph(
            entry["project_dir"],
            tuple(entry.get("include_globs", ())),
            tuple(entry.get("prune_kinds", ())),
        )
        positives = _positives(entry["edges"], graph, ctx.obj["json"])
        projects.append(ProjectData(entry["name"], graph, positives))
    results = transfer_eval(projects, hp)
    report = {
        "meta": output_meta(hp.seed, {"manifest": file_digest(manifest)}),
        "folds": [
            {
                "held_out": r.held_out,
                "n_edges": r.summary.n_edges,
                "hit_at": {str(k): v for k, v in r.summary.hit_at.items()},
            }
            for r in results
        ],
        "weighted": {
            str(k): v
            for k, v in aggregate_weighted([r.summary for r in results]).hit_at.items()
        },
    }
    write_canonical_json(out, report)
    for fold in report["folds"]:
        click.echo(
            f"fold {fold['held_out']}: n={fold['n_edges']} hit@1={fold['hit_at']['1']:.3f}"
        )


@cli.command("categorize")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def categorize_cmd(ctx, graph_path, edges_path, out):
    """Label every edge with its resolution-difficulty category."""
    from .categories import categorize_edge

    graph = load_graph(graph_path)
    edge_set = _positives(edges_path, graph, ctx.obj["json"])
    lines = []
    counts: dict[str, int] = {}
    for edge in edge_set:
        label = categorize_edge(graph, edge)
        counts[label] = counts.get(label, 0) + 1
        lines.append(
            json.dumps(
                {"callsite": edge.callsite, "callee": edge.callee, "category": label},
                sort_keys=True,
            )
        )
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(json.dumps(counts, sort_keys=True))


@cli.command("serve")
@click.option("--port", type=int, default=8977, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--project", type=click.Path(exists=True, file_okay=False),
              help="project sources, for code excerpts")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False),
              help="static assets for the triage client")
@click.pass_context
def serve_cmd(ctx, port, host, graph_path, model_path, edges_path, log_path, project, ui_dir):
    """Serve the triage API (and optionally the browser client)."""
    graph = load_graph(graph_path)
    if project:
        graph.sources = jsparse.read_sources(project, list(graph.files))
    model, _sidecar = load_checkpoint(model_path)
    static_edges = _positives(edges_path, graph, ctx.obj["json"])
    scorer = Scorer.for_graph(model, graph, compute_features(graph), static_edges)
    service = TriageService(
        graph,
        scorer,
        static_edges,
        DecisionLog(log_path),
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
    server = make_server(service, host, port)
    click.echo(f"triage service on http://{host}:{server.server_address[1]}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except CallRankerError as exc:
        message = str(exc)
        if "--json" in (argv or sys.argv):
            click.echo(json.dumps({"error": message, "kind": type(exc).__name__}), err=True)
        else:
            click.echo(f"error: {message}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
