from __future__ import annotations

import random

import numpy as np
import pytest

from callranker.edges import CallEdgeSet
from callranker.errors import DataError
from callranker.features import compute_features
from callranker.model import Hyperparams, Scorer, init_model
from callranker.ranking import pessimistic_rank, rank_callsite, split_edges
from conftest import build_linked
from oracles import sort_scan_rank


def make_edge_set(n: int) -> CallEdgeSet:
    edges = CallEdgeSet()
    for i in range(n):
        edges.add(1000 + i, 2000 + (i % 37), "static")
    return edges


def test_split_sizes_10_edges():
    train, val, test = split_edges(make_edge_set(10), (0.8, 0.1, 0.1), seed=1)
    assert (len(train), len(val), len(test)) == (8, 1, 1)


def test_split_same_seed_identical():
    edges = make_edge_set(50)
    a = split_edges(edges, (0.8, 0.1, 0.1), seed=7)
    b = split_edges(edges, (0.8, 0.1, 0.1), seed=7)
    assert [s.pairs() for s in a] == [s.pairs() for s in b]
    c = split_edges(edges, (0.8, 0.1, 0.1), seed=8)
    assert a[0].pairs() != c[0].pairs()


def test_split_disjoint_and_covering():
    edges = make_edge_set(1000)
    train, val, test = split_edges(edges, (0.8, 0.1, 0.1), seed=3)
    parts = [train.pairs(), val.pairs(), test.pairs()]
    assert parts[0] | parts[1] | parts[2] == edges.pairs()
    assert not (parts[0] & parts[1]) and not (parts[0] & parts[2]) and not (parts[1] & parts[2])


def test_split_empty_part_is_error():
    with pytest.raises(DataError):
        split_edges(make_edge_set(12), (0.95, 0.04, 0.01), seed=1)


def test_split_bad_ratios():
    with pytest.raises(DataError):
        split_edges(make_edge_set(10), (0.5, 0.2, 0.2), seed=1)


def test_pessimistic_rank_single_candidate():
    assert pessimistic_rank(np.array([0.7]), 0) == 0


def test_pessimistic_rank_all_tied():
    scores = np.full(9, 0.25)
    assert pessimistic_rank(scores, 4) == 8  # n - 1


def test_rank_matches_sort_scan_oracle():
    rng = random.Random(123)
    for _ in range(10_000):
        n = rng.randrange(1, 12)
        scores = [rng.choice([0.1, 0.25, 0.5, rng.random()]) for _ in range(n)]
        true_index = rng.randrange(n)
        assert pessimistic_rank(np.array(scores), true_index) == sort_scan_rank(
            scores, true_index
        )


def test_rank_invariant_under_monotone_transform():
    rng = np.random.default_rng(5)
    for _ in range(300):
        scores = rng.random(20)
        true_index = int(rng.integers(20))
        base = pessimistic_rank(scores, true_index)
        for transform in (lambda s: 3 * s + 1, np.exp, lambda s: np.tanh(2 * s)):
            assert pessimistic_rank(transform(scores), true_index) == base


@pytest.fixture(scope="module")
def ranked_setup(tmp_path_factory):
    root = tmp_path_factory.mktemp("rankproj")
    (root / "m.js").write_text(
        "function f(){}\nfunction g(){}\nfunction h(){}\nf();\n", encoding="utf-8"
    )
    graph = build_linked(root)
    hp = Hyperparams(hidden_dim=8, layers=2, name_buckets=16, seed=2)
    scorer = Scorer.for_graph(init_model(hp).eval(), graph, compute_features(graph))
    return graph, scorer


def test_rank_callsite_contract(ranked_setup):
    graph, scorer = ranked_setup
    cs = graph.call_sites()[0]
    fn_defs = sorted(graph.function_defs())
    ranking = rank_callsite(scorer, graph, cs, true_callee=fn_defs[0])
    assert ranking.n == 3
    scores = [s for _, s in ranking.candidates]
    assert scores == sorted(scores, reverse=True)
    assert 0 <= ranking.rank < ranking.n

    with pytest.raises(DataError):
        rank_callsite(scorer, graph, cs, true_callee=999999)
    with pytest.raises(DataError):
        rank_callsite(scorer, graph, fn_defs[0])  # not a call site


def test_pessimistic_geq_optimistic():
    rng = np.random.default_rng(13)
    for _ in range(500):
        scores = np.round(rng.random(15), 1)  # ties likely
        true_index = int(rng.integers(15))
        pessimistic = pessimistic_rank(scores, true_index)
        optimistic = int(np.sum(scores > scores[true_index]))
        assert pessimistic >= optimistic
