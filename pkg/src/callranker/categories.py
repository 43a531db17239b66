"""Edge categorization for failure-mode analysis.

Six labels, assigned by first match in a fixed precedence order. The taxonomy
reconstructs commonly-studied hard cases for JavaScript call resolution
(indirect apply/call invocation, higher-order flow, anonymous callees, and
cross-file resolution with or without a name match); reports should flag it
as a reconstruction rather than a ground-truth taxonomy.
"""

from __future__ import annotations

from .edges import CallEdge
from .errors import DataError
from .features import called_name, definition_name
from .graph import ProgramGraph
from .kinds import CALL_SITE_KINDS, NAMED_LEAF_KINDS

CATEGORY_LABELS = (
    "indirect_apply_call",
    "higher_order",
    "anonymous_callee",
    "cross_file_diff_name",
    "cross_file_same_name",
    "same_file_direct",
)


def _is_apply_or_call(graph: ProgramGraph, callsite: int) -> bool:
    kids = graph.children(callsite)
    if not kids:
        return False
    callee = graph.node(kids[0])
    if callee.kind != "MemberExpression":
        return False
    member_kids = graph.children(callee.id)
    if len(member_kids) < 2:
        return False
    prop = graph.node(member_kids[-1])
    return prop.kind in NAMED_LEAF_KINDS and prop.name in ("apply", "call")


def _has_own_id(graph: ProgramGraph, def_id: int) -> bool:
    node = graph.node(def_id)
    if node.kind == "ArrowFunctionExpression":
        return False
    kids = graph.children(def_id)
    before_body = len(kids) - 1 if kids else 0
    if before_body != (node.n_params or 0) + 1:
        return False
    return graph.node(kids[0]).kind in NAMED_LEAF_KINDS


def _is_higher_order(graph: ProgramGraph, def_id: int) -> bool:
    """Callee flows as a value: inline call argument or returned."""
    parent_id = graph.parent(def_id)
    if parent_id is None:
        return False
    parent = graph.node(parent_id)
    if parent.kind == "ReturnStatement":
        return True
    if parent.kind == "ArrowFunctionExpression":
        return True  # expression body: the function is the return value
    if parent.kind in CALL_SITE_KINDS:
        kids = graph.children(parent_id)
        return bool(kids) and kids[0] != def_id  # argument, not the callee
    return False


def categorize_edge(graph: ProgramGraph, edge: CallEdge) -> str:
    """First matching label in the fixed precedence order."""
    cs = graph.node(edge.callsite)
    fn = graph.node(edge.callee)
    if cs.kind not in CALL_SITE_KINDS:
        raise DataError(f"edge callsite {edge.callsite} is not a call site")

    if _is_apply_or_call(graph, edge.callsite):
        return "indirect_apply_call"
    if _is_higher_order(graph, edge.callee):
        return "higher_order"
    if fn.kind in ("FunctionExpression", "ArrowFunctionExpression") and not _has_own_id(
        graph, edge.callee
    ):
        return "anonymous_callee"
    if cs.file != fn.file:
        call = called_name(graph, edge.callsite)
        definition = definition_name(graph, edge.callee)
        if call is not None and call == definition:
            return "cross_file_same_name"
        return "cross_file_diff_name"
    return "same_file_direct"
