"""Built-in conservative call resolver.

Stands in for an external static analyzer when none is available. Emits an
edge only when the target is unambiguous within one file:

  (a) ``f(...)`` where ``f`` has exactly one binding in the file and it is a
      function declaration;
  (b) ``g(...)`` where ``g``'s single binding is a variable initialized with a
      function expression or arrow;
  (c) ``o.m()`` where ``o``'s single binding is a variable initialized with an
      object literal whose sole ``m`` property holds a function.

Any second binding of the name, computed member access, computed or spread
object members, or accessor properties suppress the edge: precision over
recall.
"""

from __future__ import annotations

from pathlib import Path

from . import jsparse
from .edges import CallEdgeSet
from .errors import DataError
from .graph import ProgramGraph
from .kinds import CALL_SITE_KINDS, FUNCTION_DEF_KINDS

_FN_VALUE_TYPES = ("FunctionExpression", "ArrowFunctionExpression")


def _pattern_identifiers(pattern: dict):
    """Binding identifiers introduced by a declaration/parameter pattern."""
    t = pattern.get("type")
    if t == "Identifier":
        yield pattern
    elif t == "ObjectPattern":
        for prop in pattern.get("properties") or []:
            if prop is None:
                continue
            if prop.get("type") == "RestElement":
                yield from _pattern_identifiers(prop.get("argument") or {})
            elif prop.get("value"):
                yield from _pattern_identifiers(prop["value"])
    elif t == "ArrayPattern":
        for element in pattern.get("elements") or []:
            if element is not None:
                yield from _pattern_identifiers(element)
    elif t == "AssignmentPattern":
        yield from _pattern_identifiers(pattern.get("left") or {})
    elif t == "RestElement":
        yield from _pattern_identifiers(pattern.get("argument") or {})


class _FileBindings:
    """All binding events for one file, keyed by name."""

    def __init__(self):
        self.by_name: dict[str, list[tuple[str, dict | None]]] = {}

    def add(self, name: str, category: str, target: dict | None = None) -> None:
        self.by_name.setdefault(name, []).append((category, target))

    def unique(self, name: str) -> tuple[str, dict | None] | None:
        entries = self.by_name.get(name)
        return entries[0] if entries is not None and len(entries) == 1 else None


def _collect_bindings(ast: dict) -> _FileBindings:
    bindings = _FileBindings()
    for node in jsparse.walk(ast):
        t = node.get("type")
        if t == "FunctionDeclaration" or t in _FN_VALUE_TYPES:
            if node.get("id"):
                category = "function" if t == "FunctionDeclaration" else "other"
                bindings.add(node["id"]["name"], category, node)
            for param in node.get("params") or []:
                for ident in _pattern_identifiers(param):
                    bindings.add(ident["name"], "other")
        elif t == "VariableDeclarator":
            ident = node.get("id")
            init = node.get("init")
            if ident and ident.get("type") == "Identifier":
                init_type = init.get("type") if init else None
                if init_type in _FN_VALUE_TYPES:
                    bindings.add(ident["name"], "var_fn", init)
                elif init_type == "ObjectExpression":
                    bindings.add(ident["name"], "var_obj", init)
                else:
                    bindings.add(ident["name"], "other")
            elif ident:
                for bound in _pattern_identifiers(ident):
                    bindings.add(bound["name"], "other")
        elif t in ("ClassDeclaration", "ClassExpression") and node.get("id"):
            bindings.add(node["id"]["name"], "other")
        elif t == "CatchClause" and node.get("param"):
            for ident in _pattern_identifiers(node["param"]):
                bindings.add(ident["name"], "other")
        elif t in ("ImportSpecifier", "ImportDefaultSpecifier", "ImportNamespaceSpecifier"):
            local = node.get("local")
            if local:
                bindings.add(local["name"], "other")
        elif t == "AssignmentExpression":
            left = node.get("left")
            if left and left.get("type") == "Identifier":
                bindings.add(left["name"], "other")
    return bindings


def _object_literal_method(obj: dict, prop_name: str) -> dict | None:
    """The unambiguous function value for ``prop_name`` in an object literal."""
    match: dict | None = None
    for prop in obj.get("properties") or []:
        if prop is None:
            continue
        if prop.get("type") != "Property" or prop.get("computed"):
            return None  # spread or computed member: runtime shape unknown
        key = prop.get("key")
        if key is None and prop.get("value", {}).get("type") == "Identifier":
            key_name = prop["value"]["name"]  # shorthand (key normalized away)
        elif key is not None and key.get("type") == "Identifier":
            key_name = key["name"]
        elif key is not None and key.get("type") == "Literal":
            key_name = key.get("value") if isinstance(key.get("value"), str) else None
        else:
            key_name = None
        if key_name != prop_name:
            continue
        if prop.get("kind") != "init" or match is not None:
            return None  # accessor or duplicate key
        value = prop.get("value")
        if value is None or value.get("type") not in _FN_VALUE_TYPES:
            return None
        match = value
    return match


def _resolve_call(call: dict, bindings: _FileBindings) -> dict | None:
    callee = call.get("callee")
    if callee is None:
        return None
    if callee.get("type") == "Identifier":
        entry = bindings.unique(callee["name"])
        if entry is None:
            return None
        category, target = entry
        if category in ("function", "var_fn"):
            return target
        return None
    if callee.get("type") == "MemberExpression" and not callee.get("computed"):
        obj = callee.get("object")
        prop = callee.get("property")
        if (
            obj is not None
            and prop is not None
            and obj.get("type") == "Identifier"
            and prop.get("type") == "Identifier"
        ):
            entry = bindings.unique(obj["name"])
            if entry is None or entry[0] != "var_obj":
                return None
            return _object_literal_method(entry[1], prop["name"])
    return None


def heuristic_static_resolve(
    graph: ProgramGraph, project_dir: str | Path | None = None
) -> CallEdgeSet:
    """Conservative same-file static edges over the graph's sources."""
    parsed = graph.raw
    if parsed is None:
        if project_dir is None:
            raise DataError(
                "graph has no attached parse; pass project_dir so sources can be re-read"
            )
        parsed, _ = jsparse.parse_files(project_dir, list(graph.files))

    exact: dict[tuple[str, int, int], int] = {}
    for node in graph.nodes:
        if node.kind in CALL_SITE_KINDS or node.kind in FUNCTION_DEF_KINDS:
            exact[(node.file, node.start, node.end)] = node.id

    edges = CallEdgeSet()
    for pf in parsed:
        bindings = _collect_bindings(pf.ast)
        for node in jsparse.walk(pf.ast):
            if node.get("type") not in CALL_SITE_KINDS:
                continue
            target = _resolve_call(node, bindings)
            if target is None:
                continue
            cs = exact.get((pf.file, node["start"], node["end"]))
            fn = exact.get((pf.file, target["start"], target["end"]))
            if cs is not None and fn is not None:
                edges.add(cs, fn, "static")
    return edges
