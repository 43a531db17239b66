"""callranker: program-graph link prediction for JavaScript call graphs.

Pipeline: parse a project into a pruned, semantically-linked program graph;
collect labeled call edges (external analyzer export, built-in heuristic
resolver, or dynamic traces from instrumented test runs); train a gated
graph network to score (call site, function definition) pairs; rank candidate
callees for unresolved call sites; and triage the ranked candidates with an
analyst in the loop.
"""

from .fileio import TOOL_VERSION as __version__  # noqa: F401
