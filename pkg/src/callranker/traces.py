"""Trace-event parsing: dynamic call edges from instrumented test runs.

Events carry the callee's original (file, byte-start) key and the caller's
position as reported by the JS engine against the instrumented copy
(1-based line, 1-based UTF-16 column). The caller position is shifted back to
original coordinates using the instrumentation's insertion records, then
attributed to the smallest enclosing call-site span.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .edges import CallEdgeSet, SpanIndex
from .errors import DataError
from .graph import ProgramGraph
from .instrument import SiteMap


@dataclass(frozen=True)
class TraceEvent:
    callee_file: str
    callee_start: int
    caller_file: str | None
    caller_line: int
    caller_col: int


@dataclass
class TraceResult:
    edges: CallEdgeSet
    events: int = 0
    dropped_native: int = 0
    dropped_external: int = 0
    dropped_unmapped: int = 0
    diagnostics: list[str] = field(default_factory=list)


def read_trace_events(trace_file: str | Path) -> tuple[list[TraceEvent], list[str]]:
    events: list[TraceEvent] = []
    diagnostics: list[str] = []
    try:
        text = Path(trace_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read trace file {trace_file}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            events.append(
                TraceEvent(
                    callee_file=rec["callee_file"],
                    callee_start=int(rec["callee_start"]),
                    caller_file=rec.get("caller_file"),
                    caller_line=int(rec.get("caller_line", -1)),
                    caller_col=int(rec.get("caller_col", -1)),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            diagnostics.append(f"trace line {lineno}: malformed event ({exc})")
    return events, diagnostics


def _original_column(
    insertions: list[tuple[int, int, int]], line: int, col16: int
) -> int | None:
    """Undo instrumentation column shifts; None when inside injected text."""
    shift = 0
    for ins_line, ins_col, length in insertions:
        if ins_line != line:
            continue
        instrumented_col = ins_col + shift
        if col16 >= instrumented_col + length:
            shift += length
        elif col16 > instrumented_col:
            return None
        else:
            break
    return col16 - shift


def _byte_offset(source: bytes, line: int, col16: int) -> int | None:
    lines = source.split(b"\n")
    if not 1 <= line <= len(lines):
        return None
    line_start = sum(len(l) + 1 for l in lines[: line - 1])
    text = lines[line - 1].decode("utf-8", "replace")
    units = 0
    for i, ch in enumerate(text):
        if units >= col16:
            return line_start + len(text[:i].encode("utf-8"))
        units += len(ch.encode("utf-16-le")) // 2
    if units >= col16:
        return line_start + len(text.encode("utf-8"))
    return None


def parse_traces(
    trace_file: str | Path, site_map: SiteMap, graph: ProgramGraph
) -> TraceResult:
    """Resolve trace events into a dynamic CallEdgeSet with merged counts."""
    events, malformed = read_trace_events(trace_file)
    result = TraceResult(edges=CallEdgeSet(), diagnostics=list(malformed))
    result.events = len(events)

    fn_defs = set(graph.function_defs())
    callee_by_start: dict[tuple[str, int], int] = {}
    for key, node_id in site_map.sites.items():
        if node_id in fn_defs:
            file, start, _end = SiteMap.parse_key(key)
            callee_by_start[(file, start)] = node_id

    call_index = SpanIndex(graph, graph.call_sites())
    out_dir = Path(site_map.out_dir)
    project_dir = Path(site_map.project_dir)
    source_cache: dict[str, bytes | None] = {}

    def original_source(rel: str) -> bytes | None:
        if rel not in source_cache:
            try:
                source_cache[rel] = (project_dir / rel).read_bytes()
            except OSError:
                source_cache[rel] = None
        return source_cache[rel]

    for event in events:
        callee = callee_by_start.get((event.callee_file, event.callee_start))
        if callee is None:
            result.dropped_unmapped += 1
            result.diagnostics.append(
                f"unknown callee key {event.callee_file}:{event.callee_start}"
            )
            continue
        if event.caller_file is None:
            result.dropped_native += 1
            continue
        caller_path = Path(event.caller_file)
        try:
            rel = caller_path.resolve().relative_to(out_dir).as_posix()
        except ValueError:
            result.dropped_external += 1
            continue
        source = original_source(rel)
        if source is None:
            result.dropped_unmapped += 1
            result.diagnostics.append(f"caller file missing from project: {rel}")
            continue
        col16 = _original_column(
            site_map.insertions.get(rel, []), event.caller_line, event.caller_col - 1
        )
        if col16 is None or col16 < 0:
            result.dropped_unmapped += 1
            result.diagnostics.append(
                f"caller {rel}:{event.caller_line}:{event.caller_col} inside injected text"
            )
            continue
        offset = _byte_offset(source, event.caller_line, col16)
        callsite = (
            call_index.smallest_enclosing(rel, offset) if offset is not None else None
        )
        if callsite is None:
            result.dropped_unmapped += 1
            result.diagnostics.append(
                f"caller {rel}:{event.caller_line}:{event.caller_col} maps to no call site"
            )
            continue
        result.edges.add(callsite, callee, "dynamic", count=1)
    return result
