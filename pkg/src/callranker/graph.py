"""Program graph construction and serialization.

A :class:`ProgramGraph` holds one project's merged per-file syntax trees under
a synthetic ``Project`` root, plus any synthetic semantic nodes added later.
Node ids are assigned at parse time (root 0, then files in lexicographic
order, DFS pre-order within each file) and are never renumbered: pruning and
identifier linking preserve ids, so positions resolved before pruning remain
valid afterwards.

Spans are UTF-8 byte offsets. Synthetic nodes (root, semantic) carry the empty
span (0, 0), as does the ``Program`` node of an empty file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import jsparse
from .errors import DataError
from .fileio import TOOL_VERSION, canonical_dumps, digest_tree
from .jsparse import ParseDiagnostic, ParsedFile
from .kinds import (
    CALL_SITE_KINDS,
    EDGE_TYPES,
    FUNCTION_DEF_KINDS,
    KIND_PROJECT,
    KIND_SEMANTIC,
)

_REVERSE_OF = {"ast": "ast_rev", "semantic": "semantic_rev"}


@dataclass(frozen=True)
class SyntaxNode:
    """One graph node: a parser syntax node or a synthetic node.

    ``n_params``/``n_args`` snapshot formal-parameter and call-argument counts
    at parse time; they cannot be recovered from a pruned tree (literal
    arguments are pruned away) and are only present on function-definition and
    call-site kinds respectively.
    """

    id: int
    kind: str
    name: str | None
    file: str | None
    start: int
    end: int
    is_semantic: bool = False
    n_params: int | None = None
    n_args: int | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    etype: str


@dataclass
class PruneState:
    """Mutable tree view used while pruning: node id -> ordered child ids."""

    parent_child_map: dict[int, list[int]]
    prune_kinds: frozenset[str]


class ProgramGraph:
    """Immutable-by-convention program graph for one project."""

    def __init__(
        self,
        nodes: list[SyntaxNode],
        edges: list[Edge],
        root: int,
        files: list[str],
        diagnostics: list[ParseDiagnostic] | None = None,
        sources: dict[str, bytes] | None = None,
        raw: list[ParsedFile] | None = None,
        meta: dict | None = None,
    ):
        self.nodes = nodes
        self.edges = edges
        self.root = root
        self.files = files
        self.diagnostics = diagnostics or []
        # In-process only; never serialized.
        self.sources = sources
        self.raw = raw
        self.meta = meta or {}
        self._index: dict[int, SyntaxNode] | None = None
        self._children: dict[int, list[int]] | None = None
        self._parent: dict[int, int] | None = None

    # -- lookups ------------------------------------------------------------

    def node(self, node_id: int) -> SyntaxNode:
        if self._index is None:
            self._index = {n.id: n for n in self.nodes}
        try:
            return self._index[node_id]
        except KeyError:
            raise DataError(f"node id {node_id} not in graph") from None

    def has_node(self, node_id: int) -> bool:
        if self._index is None:
            self._index = {n.id: n for n in self.nodes}
        return node_id in self._index

    def _build_tree_maps(self) -> None:
        children: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        parent: dict[int, int] = {}
        for e in self.edges:
            if e.etype == "ast":
                children[e.src].append(e.dst)
                parent[e.dst] = e.src
        # Pre-order ids make id order equal sibling source order.
        for kids in children.values():
            kids.sort()
        self._children = children
        self._parent = parent

    def children(self, node_id: int) -> list[int]:
        if self._children is None:
            self._build_tree_maps()
        return self._children.get(node_id, [])

    def parent(self, node_id: int) -> int | None:
        if self._parent is None:
            self._build_tree_maps()
        return self._parent.get(node_id)

    def call_sites(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind in CALL_SITE_KINDS]

    def function_defs(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind in FUNCTION_DEF_KINDS]

    def semantic_nodes(self) -> list[SyntaxNode]:
        return [n for n in self.nodes if n.is_semantic]

    def source_bytes(self, rel_file: str) -> bytes | None:
        if self.sources is None:
            return None
        return self.sources.get(rel_file)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self, meta: dict | None = None) -> dict:
        node_records = []
        for n in sorted(self.nodes, key=lambda n: n.id):
            record = {
                "id": n.id,
                "kind": n.kind,
                "name": n.name,
                "file": n.file,
                "start": n.start,
                "end": n.end,
                "semantic": n.is_semantic,
            }
            if n.kind in FUNCTION_DEF_KINDS:
                record["n_params"] = n.n_params or 0
            if n.kind in CALL_SITE_KINDS:
                record["n_args"] = n.n_args or 0
            node_records.append(record)
        edge_records = [
            {"src": e.src, "dst": e.dst, "type": e.etype}
            for e in sorted(self.edges, key=lambda e: (e.src, e.dst, e.etype))
        ]
        return {
            "nodes": node_records,
            "edges": edge_records,
            "root": self.root,
            "files": list(self.files),
            "meta": dict(self.meta if meta is None else meta),
        }

    def dumps(self, meta: dict | None = None) -> str:
        return canonical_dumps(self.to_json_dict(meta))

    @classmethod
    def from_json_dict(cls, data: dict) -> "ProgramGraph":
        nodes = [
            SyntaxNode(
                id=r["id"],
                kind=r["kind"],
                name=r["name"],
                file=r["file"],
                start=r["start"],
                end=r["end"],
                is_semantic=r["semantic"],
                n_params=r.get("n_params"),
                n_args=r.get("n_args"),
            )
            for r in data["nodes"]
        ]
        edges = [Edge(r["src"], r["dst"], r["type"]) for r in data["edges"]]
        return cls(
            nodes=nodes,
            edges=edges,
            root=data["root"],
            files=list(data["files"]),
            meta=dict(data.get("meta", {})),
        )


def save_graph(graph: ProgramGraph, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(graph.dumps(meta), encoding="utf-8")


def load_graph(path: str | Path) -> ProgramGraph:
    import json

    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read graph file {path}: {exc}") from exc
    for key in ("nodes", "edges", "root", "files"):
        if key not in data:
            raise DataError(f"graph file {path} missing key {key!r}")
    return ProgramGraph.from_json_dict(data)


# -- construction -------------------------------------------------------------


def _node_name(ast_node: dict) -> str | None:
    if ast_node["type"] in ("Identifier", "PrivateIdentifier"):
        name = ast_node.get("name")
        return name if isinstance(name, str) else None
    return None


def _counts(ast_node: dict) -> tuple[int | None, int | None]:
    kind = ast_node["type"]
    n_params = n_args = None
    if kind in FUNCTION_DEF_KINDS:
        n_params = len(ast_node.get("params") or [])
    if kind in CALL_SITE_KINDS:
        n_args = len(ast_node.get("arguments") or [])
    return n_params, n_args


def build_graph(
    parsed: list[ParsedFile],
    diagnostics: list[ParseDiagnostic] | None = None,
    sources: dict[str, bytes] | None = None,
) -> ProgramGraph:
    """Merge per-file trees under a synthetic Project root (id 0)."""
    nodes: list[SyntaxNode] = [
        SyntaxNode(id=0, kind=KIND_PROJECT, name=None, file=None, start=0, end=0)
    ]
    edges: list[Edge] = []
    next_id = 1

    def add_edge(src: int, dst: int, etype: str) -> None:
        edges.append(Edge(src, dst, etype))
        edges.append(Edge(dst, src, _REVERSE_OF[etype]))

    for pf in parsed:
        # Iterative DFS keeping pre-order ids aligned with source order.
        stack: list[tuple[dict, int]] = [(pf.ast, 0)]
        while stack:
            ast_node, parent_id = stack.pop()
            node_id = next_id
            next_id += 1
            n_params, n_args = _counts(ast_node)
            nodes.append(
                SyntaxNode(
                    id=node_id,
                    kind=ast_node["type"],
                    name=_node_name(ast_node),
                    file=pf.file,
                    start=int(ast_node.get("start", 0)),
                    end=int(ast_node.get("end", 0)),
                    n_params=n_params,
                    n_args=n_args,
                )
            )
            add_edge(parent_id, node_id, "ast")
            children = list(jsparse.iter_child_nodes(ast_node))
            # Reversed so the leftmost child is popped (and numbered) first.
            for child in reversed(children):
                stack.append((child, node_id))

    return ProgramGraph(
        nodes=nodes,
        edges=edges,
        root=0,
        files=[pf.file for pf in parsed],
        diagnostics=list(diagnostics or []),
        sources=sources,
        raw=parsed,
    )


def parse_project(
    project_dir: str | Path,
    include_globs: tuple[str, ...] = jsparse.DEFAULT_INCLUDE_GLOBS,
) -> ProgramGraph:
    """Parse a project directory into a merged program graph.

    Unparseable files are skipped and recorded as diagnostics; an empty match
    set is an error.
    """
    rel_paths = jsparse.discover_files(project_dir, include_globs)
    if not rel_paths:
        raise DataError(
            f"no files in {project_dir} match include globs {list(include_globs)}"
        )
    parsed, diagnostics = jsparse.parse_files(project_dir, rel_paths)
    sources = jsparse.read_sources(project_dir, [pf.file for pf in parsed])
    graph = build_graph(parsed, diagnostics, sources)
    graph.meta = {
        "tool_version": TOOL_VERSION,
        "source_digest": digest_tree(project_dir, [pf.file for pf in parsed]),
    }
    return graph


def validate_graph(graph: ProgramGraph) -> None:
    """Check structural invariants; raises DataError on the first violation."""
    seen_ids: set[int] = set()
    for n in graph.nodes:
        if n.id in seen_ids:
            raise DataError(f"duplicate node id {n.id}")
        seen_ids.add(n.id)
        synthetic = n.is_semantic or n.kind == KIND_PROJECT
        if synthetic:
            if (n.start, n.end) != (0, 0):
                raise DataError(f"synthetic node {n.id} has non-empty span")
        elif n.start > n.end:
            raise DataError(f"node {n.id} has inverted span")
        if n.is_semantic and n.kind != KIND_SEMANTIC:
            raise DataError(f"semantic node {n.id} has kind {n.kind}")

    pair_counts: dict[tuple[int, int, str], int] = {}
    parents: dict[int, int] = {}
    for e in graph.edges:
        if e.src not in seen_ids or e.dst not in seen_ids:
            raise DataError(f"edge {e} references missing node")
        if e.etype not in EDGE_TYPES:
            raise DataError(f"edge {e} has unknown type")
        pair_counts[(e.src, e.dst, e.etype)] = pair_counts.get((e.src, e.dst, e.etype), 0) + 1
        if e.etype == "ast":
            if e.dst in parents:
                raise DataError(f"node {e.dst} has two ast parents")
            parents[e.dst] = e.src
        if e.etype == "call_msg":
            kinds = {graph.node(e.src).kind, graph.node(e.dst).kind}
            if not (kinds & CALL_SITE_KINDS and kinds & FUNCTION_DEF_KINDS):
                raise DataError(f"call_msg edge {e} does not join a call site and a def")

    for (src, dst, etype), count in pair_counts.items():
        if count != 1:
            raise DataError(f"duplicate edge ({src},{dst},{etype})")
        if etype in _REVERSE_OF:
            twin = (dst, src, _REVERSE_OF[etype])
            if pair_counts.get(twin, 0) != 1:
                raise DataError(f"edge ({src},{dst},{etype}) lacks its reverse twin")

    for n in graph.nodes:
        if n.id == graph.root or n.is_semantic:
            continue
        if n.id not in parents:
            raise DataError(f"syntax node {n.id} has no ast parent")


def with_nodes_and_edges(
    graph: ProgramGraph, nodes: list[SyntaxNode], edges: list[Edge]
) -> ProgramGraph:
    """New graph sharing everything but structure (caches reset)."""
    return ProgramGraph(
        nodes=nodes,
        edges=edges,
        root=graph.root,
        files=list(graph.files),
        diagnostics=list(graph.diagnostics),
        sources=graph.sources,
        raw=graph.raw,
        meta=dict(graph.meta),
    )


__all__ = [
    "Edge",
    "ProgramGraph",
    "PruneState",
    "SyntaxNode",
    "build_graph",
    "load_graph",
    "parse_project",
    "save_graph",
    "validate_graph",
    "with_nodes_and_edges",
]
