from __future__ import annotations

import json
import os
import subprocess
from pathlib import Path

import pytest

from callranker.graph import parse_project
from callranker.instrument import SiteMap, instrument_project
from callranker.jsparse import node_executable
from callranker.traces import parse_traces
from conftest import build_linked


def run_node(script: Path, trace_out: Path | None = None) -> subprocess.CompletedProcess:
    env = dict(os.environ)
    env.pop("CG_TRACE_OUT", None)
    if trace_out is not None:
        env["CG_TRACE_OUT"] = str(trace_out)
    return subprocess.run(
        [node_executable(), str(script)], capture_output=True, text=True, env=env
    )


def instrument_and_compare(project: Path, tmp_path: Path, entry: str = "main.js"):
    out_dir = tmp_path / "instrumented"
    site_map = instrument_project(project, out_dir)
    original = run_node(project / entry)
    assert original.returncode == 0, original.stderr
    trace_file = tmp_path / "trace.ndjson"
    instrumented = run_node(out_dir / entry, trace_out=trace_file)
    assert instrumented.returncode == 0, instrumented.stderr
    assert instrumented.stdout == original.stdout
    return site_map, trace_file


def test_plain_function_body_preserved(make_project, tmp_path):
    project = make_project(
        {"main.js": "function f(){ return 1 }\nconsole.log(f());\n"}
    )
    site_map, trace = instrument_and_compare(project, tmp_path)
    body = (tmp_path / "instrumented" / "main.js").read_text()
    assert "__cgTrace" in body
    assert trace.exists() and trace.read_text().strip()


def test_arrow_expression_body_value_unchanged(make_project, tmp_path):
    project = make_project(
        {
            "main.js": (
                "var inc = x => x + 1;\n"
                "var obj = x => ({ v: x });\n"
                "var multi = x =>\n  x * 2;\n"
                "var nested = a => b => a + b;\n"
                "console.log(inc(1), obj(2).v, multi(3), nested(4)(5));\n"
            )
        }
    )
    site_map, trace = instrument_and_compare(project, tmp_path)
    events = [json.loads(l) for l in trace.read_text().splitlines()]
    assert len(events) >= 5  # every arrow body got traced


def test_directives_preserved(make_project, tmp_path):
    project = make_project(
        {
            "main.js": (
                '"use strict";\n'
                "function f(){ \"use strict\"; try { undeclared = 1; } "
                "catch (e) { return 'strict'; } return 'sloppy'; }\n"
                "console.log(f());\n"
            )
        }
    )
    instrument_and_compare(project, tmp_path)
    out = (tmp_path / "instrumented" / "main.js").read_text()
    assert out.startswith('"use strict";')


def test_unparseable_file_copied_verbatim(make_project, tmp_path):
    source = "function ( {{{ not js"
    project = make_project({"main.js": "console.log(1);\n", "bad.js": source})
    out_dir = tmp_path / "instr"
    site_map = instrument_project(project, out_dir)
    assert (out_dir / "bad.js").read_text() == source
    assert any(d.file == "bad.js" for d in site_map.diagnostics)


def test_sitemap_bijective_onto_endpoints(make_project, tmp_path):
    project = make_project(
        {"main.js": "function f(a){ return a; }\nvar g = () => f(2);\nconsole.log(g());\n"}
    )
    out_dir = tmp_path / "instr"
    site_map = instrument_project(project, out_dir)
    graph = parse_project(project)
    site_map.validate_against(graph)
    reloaded = SiteMap.load(out_dir / "__cg_sitemap.json")
    assert reloaded.sites == site_map.sites
    assert reloaded.insertions == site_map.insertions


def test_figs_runnable_fixture_traces_show_position(make_project, tmp_path, figs_dir):
    callee_text = (figs_dir / "callee.js").read_text()
    runnable_callee = (
        "var parser = {};\n" + callee_text + "\n"
        "parser.lexer.pastInput = function () { return 'abc'; };\n"
        "parser.lexer.upcomingInput = function () { return 'def'; };\n"
        "module.exports = parser;\n"
    )
    caller = (
        "var parser = require('./callee.js');\n"
        "var lexer = Object.create(parser.lexer);\n"
        "if (lexer.showPosition) {\n"
        "  console.log('Parse error on line 1:\\n' + lexer.showPosition());\n"
        "}\n"
    )
    project = make_project({"callee.js": runnable_callee, "caller.js": caller})
    site_map, trace = instrument_and_compare(project, tmp_path, entry="caller.js")

    graph = build_linked(project)
    source = project.joinpath("callee.js").read_text()
    show_fn_start = source.index("function () {")
    events = [json.loads(l) for l in trace.read_text().splitlines()]
    assert any(
        e["callee_file"] == "callee.js" and e["callee_start"] == show_fn_start
        for e in events
    )
    result = parse_traces(trace, site_map, graph)
    show_call = project.joinpath("caller.js").read_text().index("lexer.showPosition()")
    pairs = {
        (graph.node(e.callsite).start, graph.node(e.callee).start)
        for e in result.edges
    }
    assert (show_call, show_fn_start) in pairs


def test_getter_method_and_class_instrumented(make_project, tmp_path):
    project = make_project(
        {
            "main.js": (
                "class Box { constructor(v){ this.v = v; } get val(){ return this.v; } }\n"
                "var o = { m(){ return 7; } };\n"
                "console.log(new Box(3).val, o.m());\n"
            )
        }
    )
    _map, trace = instrument_and_compare(project, tmp_path)
    assert len(trace.read_text().splitlines()) >= 3


@pytest.mark.parametrize("ext,header", [("mjs", "export "), ("cjs", "")])
def test_module_and_cjs_dialects(make_project, tmp_path, ext, header):
    project = make_project(
        {f"main.{ext}": f"{header}function f(x) {{ return x * 2; }}\nconsole.log(f(4));\n"}
    )
    out_dir = tmp_path / "instr"
    instrument_project(project, out_dir)
    original = run_node(project / f"main.{ext}")
    traced = run_node(out_dir / f"main.{ext}", trace_out=tmp_path / "t.ndjson")
    assert traced.returncode == 0, traced.stderr
    assert traced.stdout == original.stdout
    assert (tmp_path / "t.ndjson").read_text().strip()
