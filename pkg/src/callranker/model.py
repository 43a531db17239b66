"""Link-prediction model: feature encoder, gated graph-convolution stack,
and pair-scoring head.

Layer update, for each directed edge (j -> i) with state e_ij and receiver i:

    e_hat_ij = e_ij + ReLU(Norm(W3 e_ij + W4 h_i + W5 h_j))
    eta_ij   = sigmoid(e_hat_ij) / (sum_{j' -> i} sigmoid(e_hat_ij') + 1e-6)
    h'_i     = h_i + ReLU(Norm(W1 h_i + sum_{j -> i} eta_ij * (W2 h_j)))

Norm standardizes each feature over the node (or edge) batch and applies a
learnable scale/shift. Edge states start from edge-type embeddings; node
states from the sum of kind, hashed-name, parameter-bucket and argument-bucket
embeddings. Every parameter is initialized uniform in +-1/sqrt(hidden_dim),
reproducibly from the seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .edges import CallEdgeSet
from .errors import DataError
from .features import FeatureTable
from .fileio import TOOL_VERSION, write_canonical_json
from .graph import ProgramGraph
from .kinds import EDGE_TYPES, KIND_VOCAB

COUNT_BUCKET_CAP = 16  # parameter/argument counts are capped at this bucket
GATE_EPS = 1e-6
NORM_EPS = 1e-5


@dataclass
class Hyperparams:
    """Training and architecture settings."""

    layers: int = 5
    hidden_dim: int = 64
    name_buckets: int = 1024
    max_epochs: int = 500
    batch_size: int = 32768
    lr_init: float = 1e-3
    lr_floor: float = 1e-5
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    # Train-split ground-truth edges are inserted into the message graph by
    # default; both regimes stay comparable via this flag.
    include_call_edges: bool = True
    # Ablation switches.
    use_semantic_edges: bool = True
    null_features: bool = False
    # Deterministic single-threaded mode for reproducibility runs.
    single_thread: bool = False

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise DataError("layers must be >= 1")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise DataError("split fractions must sum to 1")
        if self.lr_floor <= 0:
            raise DataError("lr_floor must be positive")
        self.split = tuple(self.split)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparams":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


def stable_name_bucket(name: str, buckets: int) -> int:
    """Project-independent hash bucket for an identifier (stable across runs)."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


@dataclass
class EncodedGraph:
    """Tensorized node features and message edges for one graph."""

    node_ids: list[int]
    row_of: dict[int, int]
    kind_idx: torch.Tensor
    name_idx: torch.Tensor
    par_idx: torch.Tensor
    arg_idx: torch.Tensor
    edge_src: torch.Tensor
    edge_dst: torch.Tensor
    edge_type_idx: torch.Tensor
    oov_kinds: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)


def build_message_edges(
    graph: ProgramGraph,
    call_edges: CallEdgeSet | list[tuple[int, int]] | None = None,
    use_semantic_edges: bool = True,
) -> list[tuple[int, int, str]]:
    """Message-passing edge list: ast(+rev), semantic(+rev) and, for each
    supplied ground-truth edge, a call_msg edge in both directions."""
    keep = {"ast", "ast_rev"}
    if use_semantic_edges:
        keep |= {"semantic", "semantic_rev"}
    out = [(e.src, e.dst, e.etype) for e in graph.edges if e.etype in keep]
    if call_edges is not None:
        pairs = (
            call_edges.pairs() if isinstance(call_edges, CallEdgeSet) else call_edges
        )
        for cs, fn in sorted(pairs):
            out.append((cs, fn, "call_msg"))
            out.append((fn, cs, "call_msg"))
    return out


def encode_graph(
    graph: ProgramGraph,
    features: FeatureTable,
    hp: Hyperparams,
    message_edges: list[tuple[int, int, str]] | None = None,
) -> EncodedGraph:
    """Index features and edges against the fixed vocabularies."""
    if message_edges is None:
        message_edges = build_message_edges(
            graph, use_semantic_edges=hp.use_semantic_edges
        )
    kind_of = {k: i for i, k in enumerate(KIND_VOCAB)}
    oov_slot = len(KIND_VOCAB)
    no_name_bucket = hp.name_buckets

    node_ids = features.node_ids
    row_of = {node_id: row for row, node_id in enumerate(node_ids)}
    kind_idx, name_idx, oov = [], [], 0
    for kind, name in zip(features.node_type, features.name):
        if kind in kind_of:
            kind_idx.append(kind_of[kind])
        else:
            kind_idx.append(oov_slot)
            oov += 1
        name_idx.append(
            no_name_bucket if name is None else stable_name_bucket(name, hp.name_buckets)
        )
    par_idx = [min(p, COUNT_BUCKET_CAP) for p in features.number_of_parameter]
    arg_idx = [min(a, COUNT_BUCKET_CAP) for a in features.number_of_argument]

    etype_of = {t: i for i, t in enumerate(EDGE_TYPES)}
    src = [row_of[s] for s, _, _ in message_edges]
    dst = [row_of[d] for _, d, _ in message_edges]
    et = [etype_of[t] for _, _, t in message_edges]

    as_long = lambda xs: torch.tensor(xs, dtype=torch.long)
    return EncodedGraph(
        node_ids=list(node_ids),
        row_of=row_of,
        kind_idx=as_long(kind_idx),
        name_idx=as_long(name_idx),
        par_idx=as_long(par_idx),
        arg_idx=as_long(arg_idx),
        edge_src=as_long(src),
        edge_dst=as_long(dst),
        edge_type_idx=as_long(et),
        oov_kinds=oov,
    )


class BatchStandardize(nn.Module):
    """Per-feature standardization with learnable scale/shift.

    Batch statistics while training, frozen running statistics at eval time,
    so inference embeddings stay local: a node's output depends only on its
    own message-passing neighborhood, never on unrelated nodes via shared
    batch statistics.
    """

    def __init__(self, dim: int):
        super().__init__()
        self.norm = nn.BatchNorm1d(dim, eps=NORM_EPS)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[0] == 0:
            return x
        if self.training and x.shape[0] == 1:
            return x * self.norm.weight + self.norm.bias  # var undefined for n=1
        return self.norm(x)


class GatedGraphLayer(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.w1 = nn.Linear(dim, dim, bias=False)
        self.w2 = nn.Linear(dim, dim, bias=False)
        self.w3 = nn.Linear(dim, dim, bias=False)
        self.w4 = nn.Linear(dim, dim, bias=False)
        self.w5 = nn.Linear(dim, dim, bias=False)
        self.norm_h = BatchStandardize(dim)
        self.norm_e = BatchStandardize(dim)

    def forward(
        self,
        h: torch.Tensor,
        e: torch.Tensor,
        src: torch.Tensor,
        dst: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        e_hat = e + torch.relu(
            self.norm_e(self.w3(e) + self.w4(h[dst]) + self.w5(h[src]))
        )
        gates = torch.sigmoid(e_hat)
        denom = torch.zeros_like(h).index_add(0, dst, gates) + GATE_EPS
        eta = gates / denom[dst]
        agg = torch.zeros_like(h).index_add(0, dst, eta * self.w2(h)[src])
        h_new = h + torch.relu(self.norm_h(self.w1(h) + agg))
        return h_new, e_hat


class LinkPredictor(nn.Module):
    """Complete model: encoder embeddings, L gated layers, scoring head."""

    def __init__(self, hp: Hyperparams, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.hp = hp
        h = hp.hidden_dim
        self.kind_emb = nn.Embedding(len(KIND_VOCAB) + 1, h)  # +1: OOV slot
        self.name_emb = nn.Embedding(hp.name_buckets + 1, h)  # +1: no-name bucket
        self.par_emb = nn.Embedding(COUNT_BUCKET_CAP + 1, h)
        self.arg_emb = nn.Embedding(COUNT_BUCKET_CAP + 1, h)
        self.etype_emb = nn.Embedding(len(EDGE_TYPES), h)
        self.layers = nn.ModuleList(GatedGraphLayer(h) for _ in range(hp.layers))
        self.head_hidden = nn.Linear(2 * h, h, bias=True)
        self.head_out = nn.Linear(h, 1, bias=True)
        self.to(dtype)
        self._init_parameters()

    def _init_parameters(self) -> None:
        # Documented init, drawn in registration order: uniform +-1/sqrt(H)
        # for embeddings, weight matrices and biases; standardization scales
        # start at 1 and shifts at 0 (anything smaller suppresses an L-hop
        # message to ~scale^L of its magnitude and starves deep paths).
        bound = 1.0 / math.sqrt(self.hp.hidden_dim)
        generator = torch.Generator().manual_seed(self.hp.seed)
        with torch.no_grad():
            for name, parameter in self.named_parameters():
                if name.endswith("norm.weight"):
                    parameter.fill_(1.0)
                elif name.endswith("norm.bias"):
                    parameter.zero_()
                else:
                    parameter.uniform_(-bound, bound, generator=generator)

    def encode_nodes(self, encoded: EncodedGraph) -> torch.Tensor:
        """h0 per node: sum of the four feature embeddings."""
        if self.hp.null_features:
            return torch.zeros(
                encoded.n_nodes, self.hp.hidden_dim, dtype=self.kind_emb.weight.dtype
            )
        return (
            self.kind_emb(encoded.kind_idx)
            + self.name_emb(encoded.name_idx)
            + self.par_emb(encoded.par_idx)
            + self.arg_emb(encoded.arg_idx)
        )

    def forward(self, encoded: EncodedGraph, h0: torch.Tensor | None = None) -> torch.Tensor:
        h = self.encode_nodes(encoded) if h0 is None else h0
        e = self.etype_emb(encoded.edge_type_idx)
        for layer in self.layers:
            h, e = layer(h, e, encoded.edge_src, encoded.edge_dst)
        return h

    def pair_logits(
        self, embeddings: torch.Tensor, rows: torch.Tensor
    ) -> torch.Tensor:
        """Raw scores for (callsite_row, callee_row) pairs, shape (P, 2)."""
        z = torch.cat([embeddings[rows[:, 0]], embeddings[rows[:, 1]]], dim=1)
        return self.head_out(torch.relu(self.head_hidden(z))).squeeze(-1)


def init_model(hp: Hyperparams, dtype: torch.dtype = torch.float32) -> LinkPredictor:
    """Fresh model with seed-reproducible uniform(+-1/sqrt(H)) weights."""
    return LinkPredictor(hp, dtype=dtype)


def score_pairs(
    model: LinkPredictor,
    embeddings: torch.Tensor,
    encoded: EncodedGraph,
    pairs: list[tuple[int, int]],
) -> np.ndarray:
    """Probabilities in (0,1) for (callsite, callee) node-id pairs."""
    if not pairs:
        return np.zeros(0, dtype=np.float64)
    try:
        rows = torch.tensor(
            [(encoded.row_of[cs], encoded.row_of[fn]) for cs, fn in pairs],
            dtype=torch.long,
        )
    except KeyError as exc:
        raise DataError(f"unknown node id in pair list: {exc}") from exc
    with torch.no_grad():
        logits = model.pair_logits(embeddings, rows).to(torch.float64)
        probs = torch.sigmoid(logits).clamp(1e-300, 1.0 - 1e-16)
    return probs.numpy()


class Scorer:
    """A model bound to one graph's embeddings: the ranking-time interface."""

    def __init__(self, model: LinkPredictor, encoded: EncodedGraph):
        self.model = model
        self.encoded = encoded
        with torch.no_grad():
            self.embeddings = model.forward(encoded)

    @classmethod
    def for_graph(
        cls,
        model: LinkPredictor,
        graph: ProgramGraph,
        features: FeatureTable,
        message_call_edges: CallEdgeSet | list[tuple[int, int]] | None = None,
    ) -> "Scorer":
        edges = build_message_edges(
            graph,
            call_edges=message_call_edges if model.hp.include_call_edges else None,
            use_semantic_edges=model.hp.use_semantic_edges,
        )
        encoded = encode_graph(graph, features, model.hp, edges)
        return cls(model, encoded)

    def scores(self, pairs: list[tuple[int, int]]) -> np.ndarray:
        return score_pairs(self.model, self.embeddings, self.encoded, pairs)


# -- checkpointing --------------------------------------------------------------


def save_checkpoint(
    path: str | Path,
    model: LinkPredictor,
    metrics: dict | None = None,
    input_digests: dict | None = None,
    splits: dict | None = None,
) -> None:
    """Binary tensor blob (.npz) plus a JSON sidecar at ``<path>.json``."""
    path = Path(path)
    arrays = {
        name: tensor.detach().cpu().numpy()
        for name, tensor in model.state_dict().items()
    }
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    sidecar = {
        "tool_version": TOOL_VERSION,
        "hyperparams": model.hp.to_dict(),
        "seed": model.hp.seed,
        "kind_vocab": list(KIND_VOCAB),
        "metrics": metrics or {},
        "input_digests": input_digests or {},
        "splits": splits or {},
    }
    write_canonical_json(path.with_suffix(path.suffix + ".json"), sidecar)


def load_checkpoint(path: str | Path) -> tuple[LinkPredictor, dict]:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        with np.load(path) as blob:
            arrays = {name: blob[name] for name in blob.files}
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from exc
    if sidecar.get("kind_vocab") != list(KIND_VOCAB):
        raise DataError("checkpoint kind vocabulary does not match this build")
    hp = Hyperparams.from_dict(sidecar["hyperparams"])
    model = LinkPredictor(hp)
    state = model.state_dict()
    if set(state) != set(arrays):
        raise DataError("checkpoint tensor names do not match the architecture")
    for name, tensor in state.items():
        if tuple(tensor.shape) != arrays[name].shape:
            raise DataError(
                f"checkpoint tensor {name} has shape {arrays[name].shape}, "
                f"expected {tuple(tensor.shape)}"
            )
    model.load_state_dict({n: torch.from_numpy(a) for n, a in arrays.items()})
    return model, sidecar
