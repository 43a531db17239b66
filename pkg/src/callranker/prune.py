"""Tree pruning: drop low-information nodes, splice children into parents.

Each removed node's children are transferred, in place, into its parent's
ordered child list, so every survivor ends up attached to its nearest
surviving ancestor and sibling order is preserved. Node ids are untouched.
"""

from __future__ import annotations

from .errors import DataError
from .graph import Edge, ProgramGraph, PruneState, with_nodes_and_edges
from .kinds import DEFAULT_PRUNE_KINDS, PROTECTED_KINDS


def prune(
    graph: ProgramGraph, prune_kinds: frozenset[str] | set[str] = DEFAULT_PRUNE_KINDS
) -> ProgramGraph:
    """Remove all nodes whose kind is in ``prune_kinds``.

    Refuses protected kinds (root, functions, call sites, identifiers, ...)
    before touching anything. Non-ast edges whose endpoints survive are
    carried over unchanged.
    """
    prune_kinds = frozenset(prune_kinds)
    clash = prune_kinds & PROTECTED_KINDS
    if clash:
        raise DataError(f"refusing to prune protected kinds: {sorted(clash)}")

    state = PruneState(
        parent_child_map={n.id: list(graph.children(n.id)) for n in graph.nodes},
        prune_kinds=prune_kinds,
    )
    parent = {
        child: parent_id
        for parent_id, kids in state.parent_child_map.items()
        for child in kids
    }

    removed: set[int] = set()
    for node in graph.nodes:
        if node.kind not in prune_kinds or node.id == graph.root or node.is_semantic:
            continue
        parent_id = parent.get(node.id)
        if parent_id is None:
            continue
        kids = state.parent_child_map[node.id]
        siblings = state.parent_child_map[parent_id]
        at = siblings.index(node.id)
        siblings[at : at + 1] = kids
        for child in kids:
            parent[child] = parent_id
        state.parent_child_map[node.id] = []
        del parent[node.id]
        removed.add(node.id)

    nodes = [n for n in graph.nodes if n.id not in removed]
    edges: list[Edge] = []
    for parent_id, kids in state.parent_child_map.items():
        if parent_id in removed:
            continue
        for child in kids:
            edges.append(Edge(parent_id, child, "ast"))
            edges.append(Edge(child, parent_id, "ast_rev"))
    for e in graph.edges:
        if e.etype in ("ast", "ast_rev"):
            continue
        if e.src not in removed and e.dst not in removed:
            edges.append(e)

    return with_nodes_and_edges(graph, nodes, edges)
