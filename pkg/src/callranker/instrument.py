"""Source-to-source instrumentation for dynamic call tracing.

Produces a copy of a project where every function body starts with a guarded
call to a global logger keyed by the function's original (file, byte-start);
a CommonJS shim defining the logger is emitted into the copy and loaded at
the top of every instrumented file. All injected text is single-line ASCII,
so instrumented files keep their line numbering and every column shift is
recorded for exact reversal when parsing stack traces.

The logger writes newline-delimited JSON events to the path named by the
``CG_TRACE_OUT`` environment variable (no-op when unset).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import jsparse
from .errors import DataError
from .fileio import write_canonical_json
from .graph import ProgramGraph, build_graph
from .jsparse import ParseDiagnostic, ParsedFile
from .kinds import CALL_SITE_KINDS, FUNCTION_DEF_KINDS

SHIM_FILENAME = "__cg_tracer.cjs"
SITEMAP_FILENAME = "__cg_sitemap.json"
INSTRUMENT_META_FILENAME = "__cg_instrument_meta.json"

TRACE_ENV_VAR = "CG_TRACE_OUT"

SHIM_SOURCE = """\
// Dynamic call tracer. Loaded first by every instrumented file; writes one
// JSON event per function entry to the file named by CG_TRACE_OUT.
(function () {
  if (globalThis.__cgTrace) return;
  var fs = require('fs');
  var out = process.env.CG_TRACE_OUT || '';
  var fd = -1;
  if (out) {
    try { fd = fs.openSync(out, 'a'); } catch (e) { fd = -1; }
  }
  var FRAME = /\\(?([^()]+):(\\d+):(\\d+)\\)?\\s*$/;
  globalThis.__cgTrace = function (file, start) {
    if (fd < 0) return;
    // stack: [0] Error, [1] this shim, [2] instrumented callee, [3] caller.
    var line = String(new Error().stack).split('\\n')[3] || '';
    var m = FRAME.exec(line);
    var rec = {
      callee_file: file,
      callee_start: start,
      caller_file: m ? m[1] : null,
      caller_line: m ? parseInt(m[2], 10) : -1,
      caller_col: m ? parseInt(m[3], 10) : -1
    };
    try { fs.writeSync(fd, JSON.stringify(rec) + '\\n'); } catch (e) {}
  };
})();
"""


@dataclass
class SiteMap:
    """Positions of call sites and function definitions, plus the column-shift
    bookkeeping needed to map instrumented stack traces back to the original
    sources."""

    sites: dict[str, int]  # "file:start:end" -> node id
    project_dir: str
    out_dir: str
    insertions: dict[str, list[tuple[int, int, int]]]  # file -> [(line, col16, len)]
    files: list[str] = field(default_factory=list)
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    @staticmethod
    def key(file: str, start: int, end: int) -> str:
        return f"{file}:{start}:{end}"

    @staticmethod
    def parse_key(key: str) -> tuple[str, int, int]:
        file, start, end = key.rsplit(":", 2)
        return file, int(start), int(end)

    def save(self) -> None:
        out = Path(self.out_dir)
        write_canonical_json(out / SITEMAP_FILENAME, self.sites)
        write_canonical_json(
            out / INSTRUMENT_META_FILENAME,
            {
                "project_dir": self.project_dir,
                "out_dir": self.out_dir,
                "insertions": {f: [list(t) for t in ins] for f, ins in self.insertions.items()},
                "files": self.files,
                "diagnostics": [{"file": d.file, "message": d.message} for d in self.diagnostics],
            },
        )

    @classmethod
    def load(cls, sitemap_path: str | Path) -> "SiteMap":
        sitemap_path = Path(sitemap_path)
        try:
            sites = json.loads(sitemap_path.read_text(encoding="utf-8"))
            meta = json.loads(
                (sitemap_path.parent / INSTRUMENT_META_FILENAME).read_text(encoding="utf-8")
            )
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load site map {sitemap_path}: {exc}") from exc
        return cls(
            sites=sites,
            project_dir=meta["project_dir"],
            out_dir=meta["out_dir"],
            insertions={f: [tuple(t) for t in ins] for f, ins in meta["insertions"].items()},
            files=list(meta.get("files", [])),
            diagnostics=[
                ParseDiagnostic(d["file"], d["message"]) for d in meta.get("diagnostics", [])
            ],
        )

    def validate_against(self, graph: ProgramGraph) -> None:
        """Site map must be a bijection onto the graph's endpoint node sets."""
        expected = {}
        for node in graph.nodes:
            if node.kind in CALL_SITE_KINDS or node.kind in FUNCTION_DEF_KINDS:
                expected[self.key(node.file, node.start, node.end)] = node.id
        if expected != self.sites:
            raise DataError("site map does not match graph endpoints (stale instrumentation?)")


@dataclass(frozen=True)
class _Insertion:
    pos: int  # byte offset in the original file
    text: str  # single-line ASCII
    rank: tuple  # same-position ordering


def _utf16_col(line_bytes: bytes) -> int:
    return len(line_bytes.decode("utf-8", "replace").encode("utf-16-le")) // 2


def _line_col16(source: bytes, pos: int) -> tuple[int, int]:
    line = source.count(b"\n", 0, pos) + 1
    line_start = source.rfind(b"\n", 0, pos) + 1
    return line, _utf16_col(source[line_start:pos])


def _logger_call(file: str, start: int) -> str:
    return f';typeof __cgTrace=="function"&&__cgTrace({json.dumps(file)},{start});'


def _shim_specifier(rel_file: str) -> str:
    depth = rel_file.count("/")
    return ("../" * depth if depth else "./") + SHIM_FILENAME


def _prologue_pos(source: bytes, ast: dict) -> int:
    pos = 0
    if source.startswith(b"#!"):
        newline = source.find(b"\n")
        if newline < 0:
            return len(source)
        pos = newline + 1
    for stmt in ast.get("body") or []:
        if isinstance(stmt, dict) and stmt.get("directive") is not None:
            pos = max(pos, int(stmt["end"]))
        else:
            break
    return pos


def _arrow_token_end(pf: ParsedFile, node: dict) -> int | None:
    params = node.get("params") or []
    lower = int(params[-1]["end"]) if params else int(node["start"])
    body_start = int(node["body"]["start"])
    candidates = [e for s, e in pf.arrow_tokens if lower <= s and e <= body_start]
    return max(candidates) if candidates else None


def _function_insertions(pf: ParsedFile) -> list[_Insertion]:
    out: list[_Insertion] = []
    for node in jsparse.walk(pf.ast):
        if node.get("type") not in FUNCTION_DEF_KINDS:
            continue
        body = node.get("body")
        if body is None:
            continue
        logger = _logger_call(pf.file, int(node["start"]))
        if body.get("type") == "BlockStatement":
            pos = int(body["start"]) + 1
            for stmt in body.get("body") or []:
                if isinstance(stmt, dict) and stmt.get("directive") is not None:
                    pos = int(stmt["end"])
                else:
                    break
            out.append(_Insertion(pos, logger, (1, int(node["start"]))))
        else:
            arrow_end = _arrow_token_end(pf, node)
            if arrow_end is None:
                continue  # cannot place safely; function stays untraced
            out.append(_Insertion(arrow_end, "{" + logger + "return (", (1, int(node["start"]))))
            out.append(_Insertion(int(node["end"]), ");}", (0, -int(node["start"]))))
    return out


def _apply_insertions(source: bytes, insertions: list[_Insertion]) -> bytes:
    ordered = sorted(insertions, key=lambda i: (i.pos, i.rank))
    parts: list[bytes] = []
    cursor = 0
    for ins in ordered:
        parts.append(source[cursor : ins.pos])
        parts.append(ins.text.encode("ascii"))
        cursor = ins.pos
    parts.append(source[cursor:])
    return b"".join(parts)


def instrument_project(
    project_dir: str | Path,
    out_dir: str | Path,
    include_globs: tuple[str, ...] = jsparse.DEFAULT_INCLUDE_GLOBS,
) -> SiteMap:
    """Copy a project into ``out_dir`` with tracing injected; returns the map
    from original positions to graph node ids (also written into the copy)."""
    project_dir = Path(project_dir).resolve()
    out_dir = Path(out_dir).resolve()
    if not project_dir.is_dir():
        raise DataError(f"project directory does not exist: {project_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)

    rel_paths = jsparse.discover_files(project_dir, include_globs)
    if not rel_paths:
        raise DataError(f"no files in {project_dir} match include globs")
    parsed, diagnostics = jsparse.parse_files(project_dir, rel_paths)
    parsed_by_file = {pf.file: pf for pf in parsed}
    graph = build_graph(parsed, diagnostics)

    sites = {
        SiteMap.key(n.file, n.start, n.end): n.id
        for n in graph.nodes
        if n.kind in CALL_SITE_KINDS or n.kind in FUNCTION_DEF_KINDS
    }

    insertions_by_file: dict[str, list[tuple[int, int, int]]] = {}
    for src in sorted(project_dir.rglob("*")):
        rel = src.relative_to(project_dir).as_posix()
        if any(part in (".git",) for part in src.relative_to(project_dir).parts):
            continue
        dst = out_dir / rel
        if src.is_dir():
            dst.mkdir(parents=True, exist_ok=True)
            continue
        dst.parent.mkdir(parents=True, exist_ok=True)
        source = src.read_bytes()
        pf = parsed_by_file.get(rel)
        if pf is None:
            dst.write_bytes(source)  # verbatim: unmatched or unparseable
            continue
        file_insertions = _function_insertions(pf)
        prologue = (
            f';import "{_shim_specifier(rel)}";'
            if pf.source_type == "module"
            else f';require("{_shim_specifier(rel)}");'
        )
        file_insertions.append(_Insertion(_prologue_pos(source, pf.ast), prologue, (1, -1)))
        dst.write_bytes(_apply_insertions(source, file_insertions))
        recorded = sorted(
            (*_line_col16(source, ins.pos), len(ins.text))
            for ins in sorted(file_insertions, key=lambda i: (i.pos, i.rank))
        )
        insertions_by_file[rel] = recorded

    (out_dir / SHIM_FILENAME).write_text(SHIM_SOURCE, encoding="utf-8")

    site_map = SiteMap(
        sites=sites,
        project_dir=str(project_dir),
        out_dir=str(out_dir),
        insertions=insertions_by_file,
        files=[pf.file for pf in parsed],
        diagnostics=diagnostics,
    )
    site_map.save()
    return site_map
