"""Bridge to the bundled JavaScript parser.

Parsing runs in a ``node`` subprocess driving the vendored acorn build (see
``js/ast_dump.js``). Each file comes back as an ESTree dictionary whose
``start``/``end`` positions are UTF-8 byte offsets into the file, so all
downstream span arithmetic happens on bytes.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .errors import DataError, ToolchainError

DRIVER_PATH = Path(__file__).parent / "js" / "ast_dump.js"

DEFAULT_INCLUDE_GLOBS: tuple[str, ...] = ("**/*.js", "**/*.mjs", "**/*.cjs")

# Directories never scanned for sources.
EXCLUDED_DIRS = frozenset({".git", "node_modules"})


@dataclass(frozen=True)
class ParsedFile:
    """One successfully parsed source file."""

    file: str
    source_type: str  # "script" | "module"
    ast: dict
    arrow_tokens: tuple[tuple[int, int], ...] = field(default=())


@dataclass(frozen=True)
class ParseDiagnostic:
    """A per-file problem that did not abort the project."""

    file: str
    message: str


def node_executable() -> str:
    exe = shutil.which("node")
    if exe is None:
        raise ToolchainError(
            "node executable not found on PATH; it is required for JavaScript parsing"
        )
    return exe


def discover_files(
    project_dir: str | Path, include_globs: tuple[str, ...] = DEFAULT_INCLUDE_GLOBS
) -> list[str]:
    """Project-relative source paths matching the globs, lexicographic order."""
    root = Path(project_dir)
    if not root.is_dir():
        raise DataError(f"project directory does not exist: {root}")
    matched: set[str] = set()
    for pattern in include_globs:
        for path in root.glob(pattern):
            if not path.is_file():
                continue
            rel = PurePosixPath(path.relative_to(root).as_posix())
            if any(part in EXCLUDED_DIRS for part in rel.parts):
                continue
            matched.add(str(rel))
    return sorted(matched)


def detect_module_type(project_dir: str | Path) -> str:
    """Module system of a project per its package.json ("commonjs" default)."""
    manifest = Path(project_dir) / "package.json"
    if manifest.is_file():
        try:
            data = json.loads(manifest.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return "commonjs"
        if isinstance(data, dict) and data.get("type") == "module":
            return "module"
    return "commonjs"


def parse_files(
    project_dir: str | Path, rel_paths: list[str]
) -> tuple[list[ParsedFile], list[ParseDiagnostic]]:
    """Parse the given files; unparseable files become diagnostics, not errors."""
    root = Path(project_dir).resolve()
    manifest = json.dumps(
        {
            "root": str(root),
            "files": rel_paths,
            "module_type": detect_module_type(root),
        }
    )
    proc = subprocess.run(
        [node_executable(), str(DRIVER_PATH)],
        input=manifest.encode("utf-8"),
        capture_output=True,
    )
    if proc.returncode != 0:
        raise ToolchainError(
            f"AST driver failed (exit {proc.returncode}): "
            f"{proc.stderr.decode('utf-8', 'replace').strip()[:500]}"
        )
    parsed: list[ParsedFile] = []
    diagnostics: list[ParseDiagnostic] = []
    for line in proc.stdout.decode("utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("ok"):
            parsed.append(
                ParsedFile(
                    file=record["file"],
                    source_type=record["source_type"],
                    ast=record["ast"],
                    arrow_tokens=tuple(
                        (int(s), int(e)) for s, e in record.get("arrow_tokens", [])
                    ),
                )
            )
        else:
            diagnostics.append(ParseDiagnostic(record["file"], record["error"]))
    return parsed, diagnostics


def read_sources(project_dir: str | Path, rel_paths: list[str]) -> dict[str, bytes]:
    root = Path(project_dir)
    return {rel: (root / rel).read_bytes() for rel in rel_paths}


def iter_child_nodes(node: dict):
    """ESTree children of a node, in field order (source order in practice)."""
    for key, value in node.items():
        if key in ("start", "end", "type"):
            continue
        if isinstance(value, dict):
            if "type" in value:
                yield value
        elif isinstance(value, list):
            for item in value:
                if isinstance(item, dict) and "type" in item:
                    yield item


def walk(node: dict):
    """Pre-order walk over an ESTree subtree."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(list(iter_child_nodes(current))))
