"""Evaluation summaries, weighted aggregation, and the balanced-ROC utility.

The primary metric is the rank distribution of true callees (hit@k for
k in 1..20 plus a histogram). The balanced-ROC view exists for the metric
comparison report: near-identical ROC curves can hide very different ranking
ability, which is why acceptance rests on ranks, not AUC.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .edges import CallEdgeSet
from .errors import DataError
from .graph import ProgramGraph
from .model import Scorer
from .ranking import CandidateRanking, rank_callsite

MAX_K = 20


@dataclass
class EvalSummary:
    """Rank statistics for one evaluation run (or a weighted aggregate)."""

    n_edges: int
    hit_at: dict[int, float]  # k -> fraction with rank < k, k in 1..MAX_K
    rank_hist: list[int]  # bins 0..MAX_K-1 plus one overflow bin
    runtime_s: float = 0.0
    categories: dict[str, dict] = field(default_factory=dict)

    def check(self) -> None:
        previous = 0.0
        for k in range(1, MAX_K + 1):
            if self.hit_at[k] < previous - 1e-12:
                raise DataError("hit@k must be non-decreasing in k")
            previous = self.hit_at[k]


def summarize_ranks(ranks: list[int], runtime_s: float = 0.0) -> EvalSummary:
    n = len(ranks)
    hist = [0] * (MAX_K + 1)
    for r in ranks:
        hist[min(r, MAX_K)] += 1
    hit_at = {
        k: (sum(1 for r in ranks if r < k) / n if n else 0.0)
        for k in range(1, MAX_K + 1)
    }
    return EvalSummary(n_edges=n, hit_at=hit_at, rank_hist=hist, runtime_s=runtime_s)


def evaluate(
    scorer: Scorer,
    graph: ProgramGraph,
    test_edges: CallEdgeSet,
    categorize: bool = False,
) -> tuple[EvalSummary, list[CandidateRanking]]:
    """Rank the true callee of every test edge against all definitions."""
    from .kinds import EDGE_TYPES

    start = time.perf_counter()
    call_msg_idx = EDGE_TYPES.index("call_msg")
    message_pairs = {
        (int(scorer.encoded.node_ids[s]), int(scorer.encoded.node_ids[d]))
        for s, d, t in zip(
            scorer.encoded.edge_src.tolist(),
            scorer.encoded.edge_dst.tolist(),
            scorer.encoded.edge_type_idx.tolist(),
        )
        if t == call_msg_idx
    }
    leaked = test_edges.pairs() & message_pairs
    if leaked:
        raise DataError(f"{len(leaked)} test edges are present in the message graph")

    candidates = sorted(graph.function_defs())
    rankings: list[CandidateRanking] = []
    ranks: list[int] = []
    per_category: dict[str, list[int]] = {}
    for edge in test_edges:
        ranking = rank_callsite(
            scorer, graph, edge.callsite, true_callee=edge.callee, candidates=candidates
        )
        rankings.append(ranking)
        ranks.append(ranking.rank)
        if categorize:
            from .categories import categorize_edge

            label = categorize_edge(graph, edge)
            per_category.setdefault(label, []).append(ranking.rank)
    summary = summarize_ranks(ranks, runtime_s=time.perf_counter() - start)
    if categorize:
        summary.categories = {
            label: {
                "n_edges": len(rs),
                "hit_at": summarize_ranks(rs).hit_at,
            }
            for label, rs in sorted(per_category.items())
        }
    summary.check()
    return summary, rankings


def aggregate_weighted(summaries: list[EvalSummary]) -> EvalSummary:
    """Weighted mean of hit@k, each run weighted by its test-edge count."""
    if not summaries:
        raise DataError("nothing to aggregate")
    total = sum(s.n_edges for s in summaries)
    if total == 0:
        return summarize_ranks([], runtime_s=sum(s.runtime_s for s in summaries))
    hit_at = {
        k: sum(s.hit_at[k] * s.n_edges for s in summaries) / total
        for k in range(1, MAX_K + 1)
    }
    hist = [
        sum(s.rank_hist[i] for s in summaries) for i in range(MAX_K + 1)
    ]
    return EvalSummary(
        n_edges=total,
        hit_at=hit_at,
        rank_hist=hist,
        runtime_s=sum(s.runtime_s for s in summaries),
    )


# -- balanced ROC ---------------------------------------------------------------


def balanced_roc_from_scores(
    positive_scores: np.ndarray, negative_scores: np.ndarray
) -> tuple[list[tuple[float, float]], float]:
    """Threshold-sweep ROC points (fpr, tpr) and trapezoid AUC."""
    pos = np.asarray(positive_scores, dtype=np.float64)
    neg = np.asarray(negative_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DataError("balanced ROC needs non-empty positive and negative sets")
    if pos.size != neg.size:
        raise DataError("balanced ROC requires |positives| == |negatives|")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    points = [(0.0, 0.0)]
    for t in thresholds:
        tpr = float(np.mean(pos >= t))
        fpr = float(np.mean(neg >= t))
        points.append((fpr, tpr))
    points.append((1.0, 1.0))
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, auc


def balanced_roc(
    scorer: Scorer,
    positives: list[tuple[int, int]],
    negatives: list[tuple[int, int]],
) -> tuple[list[tuple[float, float]], float]:
    if not positives or not negatives:
        raise DataError("balanced ROC needs non-empty positive and negative sets")
    return balanced_roc_from_scores(scorer.scores(positives), scorer.scores(negatives))


def roc_vs_ranking_demo(seed: int = 0, n_callsites: int = 200, n_candidates: int = 200) -> dict:
    """Constructed fixture showing two scorers with near-identical balanced
    AUC but very different rank-0 shares.

    Scorer A puts the true callee above every decoy; scorer B scores the true
    callee well above a *random* negative (so the balanced view looks equally
    good) while three decoys per call site outscore it (so it never wins the
    ranking).
    """
    rng = np.random.default_rng(seed)

    def run(true_lo, true_hi, decoy_count, decoy_lo, decoy_hi):
        ranks = []
        pos_scores = []
        neg_scores = []
        for _ in range(n_callsites):
            true_score = rng.uniform(true_lo, true_hi)
            others = rng.uniform(0.0, 0.45, size=n_candidates - 1)
            others[:decoy_count] = rng.uniform(decoy_lo, decoy_hi, size=decoy_count)
            scores = np.concatenate([[true_score], others])
            ranks.append(int(np.sum(scores > true_score)))
            pos_scores.append(true_score)
            neg_scores.append(others[rng.integers(len(others))])
        _, auc = balanced_roc_from_scores(np.array(pos_scores), np.array(neg_scores))
        rank0 = float(np.mean([r == 0 for r in ranks]))
        return auc, rank0

    auc_a, rank0_a = run(0.8, 0.95, 0, 0.0, 0.45)
    auc_b, rank0_b = run(0.8, 0.95, 3, 0.96, 0.99)
    return {
        "scorer_a": {"balanced_auc": auc_a, "rank0_share": rank0_a},
        "scorer_b": {"balanced_auc": auc_b, "rank0_share": rank0_b},
        "auc_gap": abs(auc_a - auc_b),
        "rank0_gap": abs(rank0_a - rank0_b),
    }
