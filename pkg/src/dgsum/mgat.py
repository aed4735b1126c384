"""Multi-channel graph attention: one attention channel per edge type, heads
concatenated within a channel, channels concatenated per node, then a shared
linear transform back to the input width so layers stack.

Attention coefficients are modulated by the stored edge weight:
d_ij = leaky_relu(e_ij * w^T [W h_i || W h_j]); softmax runs over the typed
neighborhood plus a unit-weight self-loop, so nodes without edges of a type
still produce output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numeric as nm
from .errors import AlignmentError, ConfigError
from .hetgraph import EDGE_TYPES, HeteroGraph
from .numeric import ParamStore, Tensor

UNION_CHANNEL = "ALL"  # single-channel ablation: type-erased edge union


@dataclass
class MgatConfig:
    n_layers: int = 2
    n_heads: int = 2
    d_in: int = 128
    d_head: int = 32
    leaky_slope: float = 0.2
    residual: bool = True
    single_channel: bool = False  # vanilla GAT over the union graph

    def __post_init__(self):
        if self.n_layers < 0 or self.n_heads < 1 or self.d_head < 1:
            raise ConfigError(f"invalid MGAT dims: layers={self.n_layers}, "
                              f"heads={self.n_heads}, d_head={self.d_head}")

    @property
    def channels(self) -> tuple[str, ...]:
        return (UNION_CHANNEL,) if self.single_channel else EDGE_TYPES


def add_mgat_params(store: ParamStore, cfg: MgatConfig, rng: np.random.Generator) -> None:
    for layer in range(cfg.n_layers):
        for ch in cfg.channels:
            for m in range(cfg.n_heads):
                store.add(f"mgat{layer}.{ch}.h{m}.W", (cfg.d_head, cfg.d_in), rng)
                store.add(f"mgat{layer}.{ch}.h{m}.w", (2 * cfg.d_head,), rng)
        width = len(cfg.channels) * cfg.n_heads * cfg.d_head
        store.add(f"mgat{layer}.U", (cfg.d_in, width), rng)


def attention_coefficient(h_i: Tensor, h_j: Tensor, e_ij: float, W: Tensor,
                          w: Tensor, slope: float = 0.2) -> Tensor:
    """d_ij = leaky_relu(e_ij * w^T [W h_i || W h_j])."""
    hi = nm.reshape(h_i, (-1, 1))
    hj = nm.reshape(h_j, (-1, 1))
    si = nm.matmul(W, hi)
    sj = nm.matmul(W, hj)
    stacked = nm.reshape(nm.concat([si, sj], axis=0), (-1,))
    raw = nm.sum_(nm.mul(w, stacked))
    return nm.leaky_relu(nm.mul(raw, float(e_ij)), slope)


def _channel_matrices(graph: HeteroGraph, channel: str) -> tuple[np.ndarray, np.ndarray]:
    if channel == UNION_CHANNEL:
        return graph.union_channel()
    return graph.dense_channel(channel)


def channel_attention(node_embs: Tensor, graph: HeteroGraph, channel: str,
                      head_params: list[tuple[Tensor, Tensor]],
                      slope: float = 0.2) -> Tensor:
    """Per-node embeddings for one channel: heads concatenated, each head
    elu(sum_j alpha_ij W h_j) with alpha the masked softmax of the
    edge-weight-modulated coefficients (self-loop weight 1 included)."""
    n = graph.n_nodes
    if node_embs.shape[0] != n:
        raise AlignmentError(f"channel_attention: {node_embs.shape[0]} embeddings for "
                             f"{n} nodes")
    ew, mask = _channel_matrices(graph, channel)
    neg = ~mask
    heads = []
    for W, w in head_params:
        s = nm.matmul(node_embs, nm.transpose(W))           # [n, d_head]
        d_head = s.shape[1]
        a_src = nm.matmul(s, nm.reshape(nm.slice_axis(w, 0, 0, d_head), (d_head, 1)))
        a_dst = nm.matmul(s, nm.reshape(nm.slice_axis(w, 0, d_head, 2 * d_head), (d_head, 1)))
        raw = nm.add(a_src, nm.transpose(a_dst))            # [n, n] outer sum
        d = nm.leaky_relu(nm.mul(raw, ew), slope)
        logits = nm.masked_fill(d, neg, nm.MASK_FILL)
        alpha = nm.softmax(logits, axis=-1)
        heads.append(nm.elu(nm.matmul(alpha, s)))
    return heads[0] if len(heads) == 1 else nm.concat(heads, axis=1)


def mgat_layer(node_embs: Tensor, graph: HeteroGraph, store: ParamStore,
               layer: int, cfg: MgatConfig,
               channels: tuple[str, ...] | None = None) -> Tensor:
    """One layer: concat the per-channel embeddings, apply the shared U."""
    channels = channels if channels is not None else cfg.channels
    blocks = []
    for ch in channels:
        head_params = [(store[f"mgat{layer}.{ch}.h{m}.W"], store[f"mgat{layer}.{ch}.h{m}.w"])
                       for m in range(cfg.n_heads)]
        blocks.append(channel_attention(node_embs, graph, ch, head_params, cfg.leaky_slope))
    stacked = blocks[0] if len(blocks) == 1 else nm.concat(blocks, axis=1)
    return nm.matmul(stacked, nm.transpose(store[f"mgat{layer}.U"]))


def _canonical_perm(graph: HeteroGraph) -> np.ndarray | None:
    keys = [nd.sort_key() for nd in graph.nodes]
    order = sorted(range(len(keys)), key=keys.__getitem__)
    perm = np.asarray(order, dtype=np.intp)
    if np.array_equal(perm, np.arange(len(keys))):
        return None
    return perm


def _permuted_graph(graph: HeteroGraph, perm: np.ndarray) -> HeteroGraph:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    nodes = [graph.nodes[i] for i in perm]
    edges = {t: [(int(min(inv[a], inv[b])), int(max(inv[a], inv[b])), w)
                 for a, b, w in graph.edges[t]] for t in EDGE_TYPES}
    return HeteroGraph(nodes, edges)


def mgat_encode(node_embs: Tensor, graph: HeteroGraph, store: ParamStore,
                cfg: MgatConfig) -> Tensor:
    """Stacked layers (with optional residual) over the graph; row order of
    the output matches the input node order.

    Nodes are processed in a canonical order derived from their origins, so
    relabeling the node list permutes the output rows bit-exactly.
    """
    if node_embs.shape[0] != graph.n_nodes:
        raise AlignmentError(f"mgat_encode: {node_embs.shape[0]} embedding rows for "
                             f"{graph.n_nodes} nodes")
    perm = _canonical_perm(graph)
    if perm is not None:
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        graph = _permuted_graph(graph, perm)
        node_embs = nm.gather_rows(node_embs, perm)
    h = node_embs
    for layer in range(cfg.n_layers):
        out = mgat_layer(h, graph, store, layer, cfg)
        h = nm.add(h, out) if cfg.residual else out
    if perm is not None:
        h = nm.gather_rows(h, inv)
    return h
