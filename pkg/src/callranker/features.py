"""Per-node model features and endpoint enumeration.

Four features per node: node kind, associated name, formal-parameter count
(function definitions) and argument count (call sites). Counts are snapshots
taken at parse time; names are derived from the pruned tree structure with
the rules in :func:`feature_name`, so features are computable both for
in-process graphs and for graphs loaded from a graph file.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import ProgramGraph, SyntaxNode
from .kinds import CALL_SITE_KINDS, FUNCTION_DEF_KINDS, NAMED_LEAF_KINDS


@dataclass
class FeatureTable:
    """Raw features for every node, aligned with ``node_ids``."""

    node_ids: list[int]
    node_type: list[str]
    name: list[str | None]
    number_of_parameter: list[int]
    number_of_argument: list[int]

    def row(self, node_id: int) -> tuple[str, str | None, int, int]:
        i = self.node_ids.index(node_id)
        return (
            self.node_type[i],
            self.name[i],
            self.number_of_parameter[i],
            self.number_of_argument[i],
        )


def _member_property_name(graph: ProgramGraph, node_id: int) -> str | None:
    kids = graph.children(node_id)
    if len(kids) < 2:
        return None
    last = graph.node(kids[-1])
    return last.name if last.kind in NAMED_LEAF_KINDS else None


def _first_child(graph: ProgramGraph, node_id: int) -> SyntaxNode | None:
    kids = graph.children(node_id)
    return graph.node(kids[0]) if kids else None


def called_name(graph: ProgramGraph, call_id: int) -> str | None:
    """Name a call site invokes: callee identifier or member property name."""
    callee = _first_child(graph, call_id)
    if callee is None:
        return None
    if callee.kind in NAMED_LEAF_KINDS:
        return callee.name
    if callee.kind == "MemberExpression":
        return _member_property_name(graph, callee.id)
    if callee.kind == "ChainExpression":
        inner = _first_child(graph, callee.id)
        if inner is not None and inner.kind == "MemberExpression":
            return _member_property_name(graph, inner.id)
    return None


def definition_name(graph: ProgramGraph, def_id: int) -> str | None:
    """Own or bound name of a function definition, if statically apparent."""
    node = graph.node(def_id)
    kids = graph.children(def_id)
    if node.kind in ("FunctionDeclaration", "FunctionExpression"):
        n_params = node.n_params or 0
        before_body = len(kids) - 1 if kids else 0
        if before_body == n_params + 1:
            first = graph.node(kids[0])
            if first.kind in NAMED_LEAF_KINDS:
                return first.name
    if node.kind == "ArrowFunctionExpression" or node.name is None:
        parent_id = graph.parent(def_id)
        if parent_id is not None:
            parent = graph.node(parent_id)
            if parent.kind in ("VariableDeclarator", "Property", "MethodDefinition",
                               "PropertyDefinition"):
                return feature_name(graph, parent)
            if parent.kind == "AssignmentExpression":
                target = _first_child(graph, parent_id)
                if target is not None and target.kind in NAMED_LEAF_KINDS:
                    return target.name
                if target is not None and target.kind == "MemberExpression":
                    return _member_property_name(graph, target.id)
    return None


def feature_name(graph: ProgramGraph, node: SyntaxNode) -> str | None:
    """Associated identifier text for a node (None when not apparent)."""
    if node.name is not None:
        return node.name
    kind = node.kind
    if kind in CALL_SITE_KINDS:
        return called_name(graph, node.id)
    if kind in FUNCTION_DEF_KINDS:
        return definition_name(graph, node.id)
    if kind == "MemberExpression":
        return _member_property_name(graph, node.id)
    if kind in ("VariableDeclarator", "Property", "MethodDefinition", "PropertyDefinition",
                "ClassDeclaration", "ClassExpression", "LabeledStatement"):
        first = _first_child(graph, node.id)
        if first is not None and first.kind in NAMED_LEAF_KINDS:
            return first.name
    return None


def compute_features(graph: ProgramGraph) -> FeatureTable:
    """Feature rows for every node in the graph, in node order."""
    node_ids: list[int] = []
    node_type: list[str] = []
    name: list[str | None] = []
    n_param: list[int] = []
    n_arg: list[int] = []
    for node in graph.nodes:
        node_ids.append(node.id)
        node_type.append(node.kind)
        name.append(feature_name(graph, node))
        n_param.append(node.n_params or 0 if node.kind in FUNCTION_DEF_KINDS else 0)
        n_arg.append(node.n_args or 0 if node.kind in CALL_SITE_KINDS else 0)
    return FeatureTable(node_ids, node_type, name, n_param, n_arg)


def enumerate_endpoints(graph: ProgramGraph) -> tuple[list[int], list[int]]:
    """(call sites, function definitions), deterministic and duplicate-free."""
    return sorted(graph.call_sites()), sorted(graph.function_defs())
