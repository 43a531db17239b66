"""Training: negative-sampled binary cross-entropy over call-edge pairs.

Edges are split 80/10/10 by seeded shuffle. Train-split positives enter the
message graph as call-message edges (validation/test positives never do —
asserted at split time). Each epoch draws fresh 1:1 negatives, optimizes in
balanced batches, and scores hit@5 on the validation positives; the learning
rate halves on plateau and training stops at the epoch cap or when the rate
falls below the floor. The parameters returned are the best-validation ones.
"""

from __future__ import annotations

import copy
import hashlib
import random
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .edges import CallEdgeSet, sample_negatives
from .errors import DataError
from .features import FeatureTable
from .graph import ProgramGraph
from .model import (
    EncodedGraph,
    Hyperparams,
    LinkPredictor,
    Scorer,
    build_message_edges,
    encode_graph,
    init_model,
)
from .ranking import pessimistic_rank, split_edges

MIN_POSITIVES = 20
VALIDATION_HIT_K = 5


@dataclass
class TrainReport:
    """Per-epoch curves plus the stop condition."""

    epochs: list[dict] = field(default_factory=list)
    stop_reason: str = ""
    wall_time_s: float = 0.0
    best_epoch: int = -1
    best_val_metric: float = 0.0

    def loss_curve(self) -> list[float]:
        return [e["loss"] for e in self.epochs]


def derived_seed(seed: int, *tags) -> int:
    """Stable sub-seed for a named purpose (negatives, shuffling, ...)."""
    text = f"{seed}:" + ":".join(str(t) for t in tags)
    return int.from_bytes(
        hashlib.blake2b(text.encode(), digest_size=8).digest(), "big"
    )


def batch_loss(
    model: LinkPredictor,
    encoded: EncodedGraph,
    pairs: list[tuple[int, int]],
    labels: list[int],
) -> torch.Tensor:
    """Binary cross-entropy of one batch of labeled pairs."""
    embeddings = model.forward(encoded)
    rows = torch.tensor(
        [(encoded.row_of[cs], encoded.row_of[fn]) for cs, fn in pairs],
        dtype=torch.long,
    )
    logits = model.pair_logits(embeddings, rows)
    target = torch.tensor(labels, dtype=logits.dtype)
    return torch.nn.functional.binary_cross_entropy_with_logits(logits, target)


def gradients(
    model: LinkPredictor,
    encoded: EncodedGraph,
    pairs: list[tuple[int, int]],
    labels: list[int],
) -> dict[str, torch.Tensor]:
    """Exact loss gradients for every parameter tensor (zeros when unused)."""
    loss = batch_loss(model, encoded, pairs, labels)
    names, params = zip(*model.named_parameters())
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return {
        name: (torch.zeros_like(p) if g is None else g)
        for name, p, g in zip(names, params, grads)
    }


def _hit_at_k(
    scorer: Scorer, candidates: list[int], edges: CallEdgeSet, k: int
) -> float:
    if len(edges) == 0:
        return 0.0
    hits = 0
    for edge in edges:
        scores = scorer.scores([(edge.callsite, c) for c in candidates])
        if pessimistic_rank(scores, candidates.index(edge.callee)) < k:
            hits += 1
    return hits / len(edges)


def train(
    graph: ProgramGraph,
    features: FeatureTable,
    positives: CallEdgeSet,
    hp: Hyperparams,
) -> tuple[LinkPredictor, TrainReport, dict[str, CallEdgeSet]]:
    """Train a link predictor on one project's positive edges."""
    if len(positives) < MIN_POSITIVES:
        raise DataError(
            f"too few labeled edges ({len(positives)}); need at least {MIN_POSITIVES}"
        )
    if hp.single_thread:
        torch.set_num_threads(1)

    start = time.perf_counter()
    train_set, val_set, test_set = split_edges(positives, hp.split, hp.seed)
    splits = {"train": train_set, "val": val_set, "test": test_set}

    message_call_edges = train_set if hp.include_call_edges else None
    message_edges = build_message_edges(
        graph, call_edges=message_call_edges, use_semantic_edges=hp.use_semantic_edges
    )
    held_out = val_set.pairs() | test_set.pairs()
    msg_pairs = {(s, d) for s, d, t in message_edges if t == "call_msg"}
    if held_out & msg_pairs:
        raise DataError("validation/test positives leaked into the message graph")

    encoded = encode_graph(graph, features, hp, message_edges)
    model = init_model(hp)
    optimizer = torch.optim.Adam(model.parameters(), lr=hp.lr_init)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="max", factor=hp.plateau_factor, patience=hp.plateau_patience
    )

    candidates = sorted(graph.function_defs())
    train_pairs = sorted(train_set.pairs())
    val_negatives = sample_negatives(
        graph, positives, len(val_set), derived_seed(hp.seed, "val-negatives")
    )

    report = TrainReport()
    best_state = copy.deepcopy(model.state_dict())
    report.stop_reason = "epoch_cap"
    for epoch in range(1, hp.max_epochs + 1):
        negatives = sample_negatives(
            graph, positives, len(train_pairs), derived_seed(hp.seed, "negatives", epoch)
        )
        pairs = train_pairs + negatives
        labels = [1] * len(train_pairs) + [0] * len(negatives)
        order = list(range(len(pairs)))
        random.Random(derived_seed(hp.seed, "shuffle", epoch)).shuffle(order)

        model.train()
        epoch_losses = []
        for lo in range(0, len(order), hp.batch_size):
            index = order[lo : lo + hp.batch_size]
            loss = batch_loss(
                model, encoded, [pairs[i] for i in index], [labels[i] for i in index]
            )
            if not torch.isfinite(loss):
                raise DataError(
                    f"non-finite loss at epoch {epoch}; "
                    "check feature scales or lower the learning rate"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))

        model.eval()
        scorer = Scorer(model, encoded)
        val_metric = _hit_at_k(scorer, candidates, val_set, VALIDATION_HIT_K)
        lr = optimizer.param_groups[0]["lr"]
        report.epochs.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(epoch_losses)),
                "val_metric": val_metric,
                "lr": lr,
            }
        )
        # >= keeps the most-converged parameters among equal validation scores.
        if val_metric >= report.best_val_metric or report.best_epoch < 0:
            report.best_val_metric = val_metric
            report.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
        scheduler.step(val_metric)
        if optimizer.param_groups[0]["lr"] < hp.lr_floor:
            report.stop_reason = "lr_floor"
            break

    model.load_state_dict(best_state)
    model.eval()
    report.wall_time_s = time.perf_counter() - start
    return model, report, splits
