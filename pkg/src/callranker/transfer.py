"""Cross-project transfer: train on other projects, evaluate on a held-out one.

Training graphs are concatenated as disjoint components under a fresh root;
node ids get per-project offsets and file paths a project prefix, so fold
disjointness is checkable by id range. The hashed-name feature space is shared
across projects, which is what makes the learned weights portable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .edges import CallEdgeSet
from .errors import DataError
from .features import compute_features
from .graph import Edge, ProgramGraph, SyntaxNode
from .kinds import KIND_PROJECT
from .model import Hyperparams, LinkPredictor, Scorer
from .evaluate import EvalSummary, evaluate
from .ranking import split_edges
from .train import TrainReport, train


@dataclass
class ProjectData:
    """One project's graph and labeled edges."""

    name: str
    graph: ProgramGraph
    positives: CallEdgeSet


@dataclass
class FoldResult:
    held_out: str
    summary: EvalSummary
    report: TrainReport
    id_offsets: dict[str, int]


def concat_graphs(
    projects: list[ProjectData],
) -> tuple[ProgramGraph, dict[str, int]]:
    """Disjoint union of project graphs under one new root (id 0)."""
    if not projects:
        raise DataError("cannot concatenate zero projects")
    nodes: list[SyntaxNode] = [
        SyntaxNode(id=0, kind=KIND_PROJECT, name=None, file=None, start=0, end=0)
    ]
    edges: list[Edge] = []
    files: list[str] = []
    offsets: dict[str, int] = {}
    next_id = 1
    for project in projects:
        offset = next_id
        offsets[project.name] = offset
        id_map = {}
        for node in project.graph.nodes:
            new_id = node.id + offset
            id_map[node.id] = new_id
            prefixed = f"{project.name}/{node.file}" if node.file is not None else None
            nodes.append(
                SyntaxNode(
                    id=new_id,
                    kind=node.kind,
                    name=node.name,
                    file=prefixed,
                    start=node.start,
                    end=node.end,
                    is_semantic=node.is_semantic,
                    n_params=node.n_params,
                    n_args=node.n_args,
                )
            )
        for edge in project.graph.edges:
            src, dst = id_map[edge.src], id_map[edge.dst]
            if edge.src == project.graph.root and edge.etype == "ast":
                src = 0  # reattach file trees to the combined root
            if edge.dst == project.graph.root and edge.etype == "ast_rev":
                dst = 0
            edges.append(Edge(src, dst, edge.etype))
        # Drop the project's own root: its tree edges now hang off id 0.
        old_root = id_map[project.graph.root]
        nodes = [n for n in nodes if n.id != old_root]
        edges = [e for e in edges if old_root not in (e.src, e.dst)]
        files.extend(f"{project.name}/{f}" for f in project.graph.files)
        next_id = offset + max(n.id for n in project.graph.nodes) + 1
    return ProgramGraph(nodes=nodes, edges=edges, root=0, files=files), offsets


def offset_edge_set(edge_set: CallEdgeSet, offset: int) -> CallEdgeSet:
    shifted = CallEdgeSet()
    for edge in edge_set:
        for provenance in sorted(edge.provenances):
            shifted.add(
                edge.callsite + offset, edge.callee + offset, provenance, edge.count
            )
    return shifted


def train_fold(
    training: list[ProjectData], hp: Hyperparams
) -> tuple[LinkPredictor, TrainReport, dict[str, int], ProgramGraph]:
    """One transfer model: all training projects' edges are training data."""
    combined, offsets = concat_graphs(training)
    merged = CallEdgeSet()
    for project in training:
        shifted = offset_edge_set(project.positives, offsets[project.name])
        for edge in shifted:
            for provenance in sorted(edge.provenances):
                merged.add(edge.callsite, edge.callee, provenance, edge.count)
    model, report, _splits = train(combined, compute_features(combined), merged, hp)
    return model, report, offsets, combined


def evaluate_on_project(
    model: LinkPredictor, project: ProjectData, hp: Hyperparams
) -> EvalSummary:
    """Score a project with a (possibly foreign) model.

    The project's own train-split edges join its message graph; its test
    split is ranked. With the project's own model this is self-evaluation,
    with a fold model it is transfer evaluation.
    """
    train_set, _val, test_set = split_edges(project.positives, hp.split, hp.seed)
    scorer = Scorer.for_graph(
        model, project.graph, compute_features(project.graph), train_set
    )
    summary, _rankings = evaluate(scorer, project.graph, test_set)
    return summary


def transfer_eval(projects: list[ProjectData], hp: Hyperparams) -> list[FoldResult]:
    """Leave-one-project-out folds; fold count equals project count."""
    if len(projects) < 2:
        raise DataError("transfer evaluation needs at least two projects")
    results: list[FoldResult] = []
    for held_out in projects:
        training = [p for p in projects if p.name != held_out.name]
        model, report, offsets, _combined = train_fold(training, hp)
        # Disjointness is structural: the held-out project is never part of
        # the fold's concatenation.
        assert held_out.name not in offsets
        summary = evaluate_on_project(model, held_out, hp)
        results.append(
            FoldResult(
                held_out=held_out.name,
                summary=summary,
                report=report,
                id_offsets=offsets,
            )
        )
    return results
