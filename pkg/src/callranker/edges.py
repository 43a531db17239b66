"""Labeled call edges: the edge-file format, span resolution, merging,
and negative sampling.

Edge files are newline-delimited JSON with position-based endpoints so that
exports from external analyzers survive re-parses; node ids are resolved at
ingest time via smallest-enclosing-span matching. An optional leading
``{"meta": ...}`` line carries provenance metadata and is ignored on read.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .features import enumerate_endpoints
from .fileio import canonical_dumps
from .graph import ProgramGraph

PROVENANCES = ("static", "dynamic", "analyst")


@dataclass(frozen=True)
class CallEdge:
    """A labeled (call site, function definition) pair."""

    callsite: int
    callee: int
    provenances: frozenset[str]
    count: int = 0

    def merged_with(self, other: "CallEdge") -> "CallEdge":
        return CallEdge(
            self.callsite,
            self.callee,
            self.provenances | other.provenances,
            self.count + other.count,
        )


class CallEdgeSet:
    """Set of call edges keyed by (callsite, callee)."""

    def __init__(self, edges: dict[tuple[int, int], CallEdge] | None = None):
        self._edges: dict[tuple[int, int], CallEdge] = dict(edges or {})

    def add(self, callsite: int, callee: int, provenance: str, count: int = 0) -> None:
        if provenance not in PROVENANCES:
            raise DataError(f"unknown provenance {provenance!r}")
        edge = CallEdge(callsite, callee, frozenset({provenance}), count)
        key = (callsite, callee)
        self._edges[key] = self._edges[key].merged_with(edge) if key in self._edges else edge

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self):
        return iter(sorted(self._edges.values(), key=lambda e: (e.callsite, e.callee)))

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return pair in self._edges

    def __eq__(self, other) -> bool:
        return isinstance(other, CallEdgeSet) and self._edges == other._edges

    def get(self, pair: tuple[int, int]) -> CallEdge | None:
        return self._edges.get(pair)

    def pairs(self) -> set[tuple[int, int]]:
        return set(self._edges)

    def subset(self, pairs) -> "CallEdgeSet":
        wanted = set(pairs)
        return CallEdgeSet({k: v for k, v in self._edges.items() if k in wanted})

    def validate(self, graph: ProgramGraph) -> None:
        call_sites = set(graph.call_sites())
        fn_defs = set(graph.function_defs())
        for edge in self:
            if edge.callsite not in call_sites:
                raise DataError(f"edge callsite {edge.callsite} is not a call-site node")
            if edge.callee not in fn_defs:
                raise DataError(f"edge callee {edge.callee} is not a function-definition node")


class SpanIndex:
    """Per-file span lookup over a fixed node-id set."""

    def __init__(self, graph: ProgramGraph, node_ids: list[int]):
        self._by_file: dict[str, list[tuple[int, int, int]]] = {}
        for node_id in node_ids:
            node = graph.node(node_id)
            if node.file is None:
                continue
            self._by_file.setdefault(node.file, []).append((node.start, node.end, node.id))
        for spans in self._by_file.values():
            spans.sort()

    def smallest_enclosing(self, file: str, start: int, end: int | None = None) -> int | None:
        """Innermost span containing [start, end) (or the point ``start``)."""
        if end is None:
            end = start + 1
        best: tuple[int, int, int] | None = None  # (length, -start, id)
        for s, e, node_id in self._by_file.get(file, []):
            if s > start:
                break
            if e >= end:
                key = (e - s, -s, node_id)
                if best is None or key < best:
                    best = key
        return best[2] if best is not None else None


# -- edge-file serialization ---------------------------------------------------


def edge_records(edge_set: CallEdgeSet, graph: ProgramGraph) -> list[dict]:
    """Position-based records, one per (edge, provenance), sorted."""
    records = []
    for edge in edge_set:
        cs = graph.node(edge.callsite)
        fn = graph.node(edge.callee)
        for provenance in sorted(edge.provenances):
            records.append(
                {
                    "caller": {"file": cs.file, "start": cs.start, "end": cs.end},
                    "callee": {"file": fn.file, "start": fn.start, "end": fn.end},
                    "provenance": provenance,
                    "count": edge.count if provenance == "dynamic" else 0,
                }
            )
    records.sort(
        key=lambda r: (
            r["caller"]["file"],
            r["caller"]["start"],
            r["callee"]["file"],
            r["callee"]["start"],
            r["provenance"],
        )
    )
    return records


def write_edge_file(
    path: str | Path, edge_set: CallEdgeSet, graph: ProgramGraph, meta: dict | None = None
) -> None:
    lines = []
    if meta is not None:
        lines.append(canonical_dumps({"meta": meta}).rstrip("\n"))
    for record in edge_records(edge_set, graph):
        lines.append(canonical_dumps(record).rstrip("\n"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_records(path: str | Path) -> tuple[list[dict], list[str]]:
    """(well-formed records, per-record diagnostics). Meta lines are skipped."""
    records: list[dict] = []
    diagnostics: list[str] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read edge file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        if not isinstance(record, dict):
            diagnostics.append(f"line {lineno}: not an object")
            continue
        if "meta" in record:
            continue
        try:
            _check_record(record)
        except DataError as exc:
            diagnostics.append(f"line {lineno}: {exc}")
            continue
        records.append(record)
    return records, diagnostics


def _check_record(record: dict) -> None:
    for side in ("caller", "callee"):
        pos = record.get(side)
        if not isinstance(pos, dict):
            raise DataError(f"missing {side} position")
        if not isinstance(pos.get("file"), str):
            raise DataError(f"{side}.file must be a string")
        for k in ("start", "end"):
            if not isinstance(pos.get(k), int):
                raise DataError(f"{side}.{k} must be an integer")
    if record.get("provenance") not in PROVENANCES:
        raise DataError(f"bad provenance {record.get('provenance')!r}")


@dataclass
class IngestResult:
    edges: CallEdgeSet
    resolved: int = 0
    unresolved: int = 0
    diagnostics: list[str] = field(default_factory=list)


def resolve_records(records: list[dict], graph: ProgramGraph) -> IngestResult:
    """Map position records to node ids via smallest-enclosing-span matching."""
    call_sites, fn_defs = enumerate_endpoints(graph)
    cs_index = SpanIndex(graph, call_sites)
    fn_index = SpanIndex(graph, fn_defs)
    result = IngestResult(edges=CallEdgeSet())
    for record in records:
        caller, callee = record["caller"], record["callee"]
        cs = cs_index.smallest_enclosing(caller["file"], caller["start"], caller["end"])
        fn = fn_index.smallest_enclosing(callee["file"], callee["start"], callee["end"])
        if cs is None or fn is None:
            result.unresolved += 1
            which = "caller" if cs is None else "callee"
            pos = caller if cs is None else callee
            result.diagnostics.append(
                f"unresolvable {which} at {pos['file']}:{pos['start']}-{pos['end']}"
            )
            continue
        result.edges.add(cs, fn, record["provenance"], int(record.get("count", 0)))
        result.resolved += 1
    return result


def ingest_static_edges(export_file: str | Path, graph: ProgramGraph) -> IngestResult:
    """Load an external analyzer's position-based export against a graph."""
    records, malformed = read_edge_records(export_file)
    result = resolve_records(records, graph)
    result.diagnostics = malformed + result.diagnostics
    total = result.resolved + result.unresolved
    if total and result.unresolved * 2 > total:
        raise DataError(
            f"{result.unresolved}/{total} records unresolvable; "
            "graph and export likely come from different sources"
        )
    return result


# -- merging and negative sampling ---------------------------------------------


def merge_edge_sets(graph: ProgramGraph, sets: list[CallEdgeSet]) -> CallEdgeSet:
    """Union keyed by (callsite, callee); provenances unioned, counts summed."""
    merged = CallEdgeSet()
    node_check = set()
    for edge_set in sets:
        for edge in edge_set:
            for node_id in (edge.callsite, edge.callee):
                if node_id not in node_check:
                    if not graph.has_node(node_id):
                        raise DataError(f"edge node id {node_id} absent from graph")
                    node_check.add(node_id)
            key = (edge.callsite, edge.callee)
            existing = merged.get(key)
            merged._edges[key] = edge if existing is None else existing.merged_with(edge)
    return merged


def sample_negatives(
    graph: ProgramGraph,
    positives: CallEdgeSet,
    n: int,
    seed: int,
) -> list[tuple[int, int]]:
    """n uniform-random (callsite, callee) pairs not in ``positives``.

    Deterministic given the seed; duplicates never emitted.
    """
    if n == 0:
        return []
    call_sites, fn_defs = enumerate_endpoints(graph)
    total = len(call_sites) * len(fn_defs)
    positive_pairs = positives.pairs()
    feasible = total - len(positive_pairs)
    if n > feasible:
        raise DataError(f"cannot sample {n} negatives; only {feasible} free pairs exist")
    rng = random.Random(seed)
    n_defs = len(fn_defs)
    if n > feasible // 2:
        free = [
            (cs, fd)
            for cs in call_sites
            for fd in fn_defs
            if (cs, fd) not in positive_pairs
        ]
        return rng.sample(free, n)
    chosen: set[tuple[int, int]] = set()
    out: list[tuple[int, int]] = []
    while len(out) < n:
        flat = rng.randrange(total)
        pair = (call_sites[flat // n_defs], fn_defs[flat % n_defs])
        if pair in positive_pairs or pair in chosen:
            continue
        chosen.add(pair)
        out.append(pair)
    return out
