"""Analyst triage: serve unresolved call sites with ranked candidates,
persist accept/reject decisions, and export the augmented call graph.

State model: the decision log is an append-only newline-delimited JSON file;
the effective state is a pure fold over it (later entries supersede earlier
ones per call site), so replaying the log always reproduces the export. The
service holds graph and model read-only; the single mutable artifact is the
log, guarded by one writer lock.

Wire protocol (v1):
    GET  /v1/unresolved                 unresolved call sites + progress
    GET  /v1/candidates/{id}?k=N        top-k scored candidates with excerpts
    POST /v1/decisions                  record an accept/reject/skip
    GET  /v1/export[?only=analyst]      edge file (standard ndjson format)
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .edges import CallEdgeSet, edge_records
from .errors import DataError
from .fileio import TOOL_VERSION, canonical_dumps
from .graph import ProgramGraph
from .model import Scorer
from .ranking import rank_callsite

VERDICTS = ("accepted", "rejected", "skipped")
DEFAULT_TOP_K = 20
EXCERPT_CONTEXT = 120  # bytes of context either side of a span


@dataclass(frozen=True)
class TriageDecision:
    callsite: int
    callee: int | None
    verdict: str
    analyst: str
    timestamp: str = ""
    id: int | None = None


class DecisionLog:
    """Append-only ndjson decision log; crash-safe, replayable."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._decisions: list[TriageDecision] = []
        if self.path.exists():
            self._decisions = self._read_all()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(
                canonical_dumps({"meta": {"tool_version": TOOL_VERSION, "kind": "decision-log"}}),
                encoding="utf-8",
            )

    def _read_all(self) -> list[TriageDecision]:
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            if "meta" in record:
                continue
            out.append(TriageDecision(**record))
        return out

    def append(self, decision: TriageDecision) -> TriageDecision:
        with self._lock:
            stamped = TriageDecision(
                callsite=decision.callsite,
                callee=decision.callee,
                verdict=decision.verdict,
                analyst=decision.analyst,
                timestamp=decision.timestamp
                or datetime.now(timezone.utc).isoformat(timespec="seconds"),
                id=len(self._decisions),
            )
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(canonical_dumps(asdict(stamped)))
            self._decisions.append(stamped)
            return stamped

    def decisions(self) -> list[TriageDecision]:
        with self._lock:
            return list(self._decisions)

    def effective(self) -> dict[int, TriageDecision]:
        """Final per-call-site state: a pure fold, last entry wins."""
        state: dict[int, TriageDecision] = {}
        for decision in self.decisions():
            state[decision.callsite] = decision
        return state


def source_excerpt(graph: ProgramGraph, node_id: int) -> tuple[str, int, int] | None:
    """(excerpt text, highlight start, highlight end) in excerpt characters."""
    node = graph.node(node_id)
    if node.file is None or graph.sources is None:
        return None
    data = graph.source_bytes(node.file)
    if data is None:
        return None
    lo = max(0, node.start - EXCERPT_CONTEXT)
    hi = min(len(data), node.end + EXCERPT_CONTEXT)
    lo = data.rfind(b"\n", 0, lo) + 1
    line_end = data.find(b"\n", hi)
    hi = len(data) if line_end < 0 else line_end
    text = data[lo:hi].decode("utf-8", "replace")
    hl_start = len(data[lo : node.start].decode("utf-8", "replace"))
    hl_end = len(data[lo : min(node.end, hi)].decode("utf-8", "replace"))
    return text, hl_start, hl_end


def list_unresolved(graph: ProgramGraph, static_edges: CallEdgeSet) -> list[int]:
    """Call sites with no static edge, ordered by file then span."""
    resolved = {edge.callsite for edge in static_edges}
    unresolved = [cs for cs in graph.call_sites() if cs not in resolved]
    return sorted(unresolved, key=lambda i: (graph.node(i).file, graph.node(i).start))


def accepted_edges(graph: ProgramGraph, log: DecisionLog) -> CallEdgeSet:
    """Analyst-accepted edges from the folded decision state."""
    edges = CallEdgeSet()
    fn_defs = set(graph.function_defs())
    for decision in log.effective().values():
        if decision.verdict == "accepted" and decision.callee in fn_defs:
            edges.add(decision.callsite, decision.callee, "analyst")
    return edges


def export_augmented(
    graph: ProgramGraph, static_edges: CallEdgeSet, log: DecisionLog
) -> tuple[CallEdgeSet, CallEdgeSet]:
    """(static + accepted analyst edges, analyst edges alone)."""
    analyst = accepted_edges(graph, log)
    merged = CallEdgeSet()
    for edge_set in (static_edges, analyst):
        for edge in edge_set:
            for provenance in sorted(edge.provenances):
                merged.add(edge.callsite, edge.callee, provenance, edge.count)
    return merged, analyst


class TriageService:
    """Request handlers behind the v1 wire protocol."""

    def __init__(
        self,
        graph: ProgramGraph,
        scorer: Scorer,
        static_edges: CallEdgeSet,
        log: DecisionLog,
        ui_dir: Path | None = None,
        top_k: int = DEFAULT_TOP_K,
    ):
        self.graph = graph
        self.scorer = scorer
        self.static_edges = static_edges
        self.log = log
        self.ui_dir = ui_dir
        self.top_k = top_k
        self._call_sites = set(graph.call_sites())
        self._fn_defs = set(graph.function_defs())
        self._ranking_cache: dict[int, list[tuple[int, float]]] = {}
        self._cache_lock = threading.Lock()

    # -- endpoint payloads ---------------------------------------------------

    def _site_payload(self, node_id: int) -> dict:
        node = self.graph.node(node_id)
        excerpt = source_excerpt(self.graph, node_id)
        return {
            "id": node_id,
            "kind": node.kind,
            "file": node.file,
            "start": node.start,
            "end": node.end,
            "excerpt": None if excerpt is None else excerpt[0],
            "excerpt_highlight": None if excerpt is None else [excerpt[1], excerpt[2]],
        }

    def unresolved_payload(self) -> dict:
        unresolved = list_unresolved(self.graph, self.static_edges)
        state = self.log.effective()
        sites = []
        for cs in unresolved:
            payload = self._site_payload(cs)
            decision = state.get(cs)
            payload["decision"] = None if decision is None else asdict(decision)
            sites.append(payload)
        decided = sum(1 for s in sites if s["decision"] is not None)
        return {
            "callsites": sites,
            "progress": {"total": len(sites), "decided": decided},
        }

    def candidates_payload(self, callsite: int, k: int | None) -> dict:
        if callsite not in self._call_sites:
            raise KeyError(callsite)
        with self._cache_lock:
            ranked = self._ranking_cache.get(callsite)
        if ranked is None:
            ranking = rank_callsite(self.scorer, self.graph, callsite)
            ranked = ranking.candidates
            with self._cache_lock:
                self._ranking_cache[callsite] = ranked
        k = self.top_k if k is None else max(1, k)
        return {
            "callsite": self._site_payload(callsite),
            "candidates": [
                {**self._site_payload(callee), "score": score}
                for callee, score in ranked[:k]
            ],
            "total_candidates": len(ranked),
        }

    def record_decision(self, body: dict) -> dict:
        try:
            callsite = int(body["callsite"])
            verdict = body["verdict"]
            analyst = str(body.get("analyst", ""))
            callee = body.get("callee")
            callee = None if callee is None else int(callee)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed decision: {exc}") from exc
        if verdict not in VERDICTS:
            raise DataError(f"verdict must be one of {VERDICTS}")
        if callsite not in self._call_sites:
            raise DataError(f"unknown call site {callsite}")
        if verdict == "accepted":
            if callee is None or callee not in self._fn_defs:
                raise DataError("accepted callee must be a project function definition")
        stored = self.log.append(
            TriageDecision(callsite=callsite, callee=callee, verdict=verdict, analyst=analyst)
        )
        return asdict(stored)

    def export_text(self, only: str | None = None) -> str:
        merged, analyst = export_augmented(self.graph, self.static_edges, self.log)
        chosen = analyst if only == "analyst" else merged
        lines = [canonical_dumps(r).rstrip("\n") for r in edge_records(chosen, self.graph)]
        return "\n".join(lines) + ("\n" if lines else "")


def make_handler(service: TriageService):
    candidates_re = re.compile(r"^/v1/candidates/(\d+)$")

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, payload, status=200):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_text(self, text, content_type, status=200):
            body = text.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            url = urlparse(self.path)
            query = parse_qs(url.query)
            if url.path == "/v1/unresolved":
                return self._send_json(service.unresolved_payload())
            match = candidates_re.match(url.path)
            if match:
                k = query.get("k")
                try:
                    payload = service.candidates_payload(
                        int(match.group(1)), int(k[0]) if k else None
                    )
                except KeyError:
                    return self._send_json({"error": "unknown call site"}, status=404)
                except ValueError:
                    return self._send_json({"error": "bad k parameter"}, status=400)
                return self._send_json(payload)
            if url.path == "/v1/export":
                only = query.get("only", [None])[0]
                return self._send_text(
                    service.export_text(only), "application/x-ndjson"
                )
            return self._serve_static(url.path)

        def _serve_static(self, path: str):
            if service.ui_dir is None:
                return self._send_json({"error": "not found"}, status=404)
            rel = path.lstrip("/") or "index.html"
            target = (service.ui_dir / rel).resolve()
            try:
                target.relative_to(service.ui_dir.resolve())
            except ValueError:
                return self._send_json({"error": "not found"}, status=404)
            if not target.is_file():
                return self._send_json({"error": "not found"}, status=404)
            content_types = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".json": "application/json",
                ".map": "application/json",
            }
            ctype = content_types.get(target.suffix, "application/octet-stream")
            self._send_text(target.read_text(encoding="utf-8"), ctype)

        def do_POST(self):
            url = urlparse(self.path)
            if url.path != "/v1/decisions":
                return self._send_json({"error": "not found"}, status=404)
            length = int(self.headers.get("Content-Length") or 0)
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
                stored = service.record_decision(body)
            except (json.JSONDecodeError, DataError) as exc:
                return self._send_json({"error": str(exc)}, status=400)
            return self._send_json(stored, status=201)

    return Handler


def make_server(service: TriageService, host: str = "127.0.0.1", port: int = 0):
    """Bound server (not yet serving); port 0 picks a free port."""
    return ThreadingHTTPServer((host, port), make_handler(service))
