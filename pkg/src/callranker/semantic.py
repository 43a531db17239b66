"""Identifier linking: one project-wide semantic node per distinct name.

Every named syntax node (identifier references, declaration names, property
keys, and member-access property names all surface as identifier nodes) gets
a semantic edge to the semantic node for its text, plus the reverse edge.
Linking is project-wide: the same name in different files shares one node,
which is what lets message passing cross file boundaries.
"""

from __future__ import annotations

from .graph import Edge, ProgramGraph, SyntaxNode, with_nodes_and_edges
from .kinds import KIND_SEMANTIC


def link_identifiers(graph: ProgramGraph) -> ProgramGraph:
    """Add semantic nodes and edges for all named syntax nodes."""
    named = [n for n in graph.nodes if n.name is not None and not n.is_semantic]
    if not named:
        return graph

    names = sorted({n.name for n in named})
    next_id = max(n.id for n in graph.nodes) + 1
    sem_ids = {name: next_id + i for i, name in enumerate(names)}

    nodes = list(graph.nodes) + [
        SyntaxNode(
            id=sem_ids[name],
            kind=KIND_SEMANTIC,
            name=name,
            file=None,
            start=0,
            end=0,
            is_semantic=True,
        )
        for name in names
    ]
    edges = list(graph.edges)
    for n in named:
        sem = sem_ids[n.name]
        edges.append(Edge(n.id, sem, "semantic"))
        edges.append(Edge(sem, n.id, "semantic_rev"))

    return with_nodes_and_edges(graph, nodes, edges)
