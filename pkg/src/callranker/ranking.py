"""Candidate ranking and edge-set splitting.

Ranks are 0-based positions of the true callee's score among all candidate
function definitions, with pessimistic tie handling: every tied competitor
counts against the model. Lower is better; hit@k means rank < k.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .edges import CallEdgeSet
from .errors import DataError
from .graph import ProgramGraph
from .model import Scorer


@dataclass
class CandidateRanking:
    """Scored candidates for one call site, descending by score."""

    callsite: int
    candidates: list[tuple[int, float]]
    true_callee: int | None
    rank: int | None
    n: int


def pessimistic_rank(scores: np.ndarray, true_index: int) -> int:
    """0-based rank of scores[true_index], ties counted against it."""
    true_score = scores[true_index]
    higher = int(np.sum(scores > true_score))
    tied = int(np.sum(scores == true_score)) - 1
    return higher + tied


def split_edges(
    edges: CallEdgeSet, ratios: tuple[float, float, float], seed: int
) -> tuple[CallEdgeSet, CallEdgeSet, CallEdgeSet]:
    """Seeded shuffle, then contiguous partition into train/val/test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError("split ratios must sum to 1")
    pairs = sorted(edges.pairs())
    random.Random(seed).shuffle(pairs)
    n = len(pairs)
    cut1 = int(n * ratios[0])
    cut2 = int(n * (ratios[0] + ratios[1]))
    parts = (pairs[:cut1], pairs[cut1:cut2], pairs[cut2:])
    if n >= 10 and any(len(p) == 0 for p in parts):
        raise DataError(f"split of {n} edges left an empty part with ratios {ratios}")
    return tuple(edges.subset(p) for p in parts)


def rank_callsite(
    scorer: Scorer,
    graph: ProgramGraph,
    callsite: int,
    true_callee: int | None = None,
    candidates: list[int] | None = None,
) -> CandidateRanking:
    """Score every candidate function definition for one call site."""
    if graph.node(callsite).kind not in ("CallExpression", "NewExpression"):
        raise DataError(f"node {callsite} is not a call site")
    if candidates is None:
        candidates = sorted(graph.function_defs())
    if not candidates:
        raise DataError("graph has no function definitions to rank")
    if true_callee is not None and true_callee not in candidates:
        raise DataError(f"true callee {true_callee} is not a candidate")

    scores = scorer.scores([(callsite, c) for c in candidates])
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i]))
    ranked = [(candidates[i], float(scores[i])) for i in order]

    rank = None
    if true_callee is not None:
        rank = pessimistic_rank(scores, candidates.index(true_callee))
    return CandidateRanking(
        callsite=callsite,
        candidates=ranked,
        true_callee=true_callee,
        rank=rank,
        n=len(candidates),
    )
