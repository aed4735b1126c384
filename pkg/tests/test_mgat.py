"""Multi-channel graph attention: formulas, properties, and gradients."""

import numpy as np
import pytest

import dgsum.numeric as nm
from dgsum.embeddings import MeanWordEmbedder
from dgsum.hetgraph import EDGE_TYPES, GraphConfig, HeteroGraph, build_hetero_graph
from dgsum.mgat import (MgatConfig, add_mgat_params, attention_coefficient,
                        channel_attention, mgat_encode, mgat_layer)
from dgsum.numeric import ParamStore, Tensor
from conftest import cluster_from_texts
from oracles import dense_gat_channel_oracle

RNG = np.random.default_rng(2024)


def small_graph(table_for, texts=("storm hits coast. waves flood town.",
                                  "storm nears coast.")):
    cluster = cluster_from_texts("g", list(texts))
    table = table_for([cluster])
    return build_hetero_graph(cluster, table, MeanWordEmbedder(table), GraphConfig())


def tiny_params(cfg: MgatConfig, seed=0) -> ParamStore:
    store = ParamStore()
    add_mgat_params(store, cfg, np.random.default_rng(seed))
    return store


class TestAttentionCoefficient:
    def test_zero_edge_weight_kills_coefficient(self):
        W = Tensor(RNG.normal(size=(3, 4)))
        w = Tensor(RNG.normal(size=6))
        h_i = Tensor(RNG.normal(size=4))
        h_j = Tensor(RNG.normal(size=4))
        assert attention_coefficient(h_i, h_j, 0.0, W, w).item() == 0.0

    def test_zero_attention_vector(self):
        W = Tensor(RNG.normal(size=(3, 4)))
        w = Tensor(np.zeros(6))
        h_i = Tensor(RNG.normal(size=4))
        h_j = Tensor(RNG.normal(size=4))
        assert attention_coefficient(h_i, h_j, 0.7, W, w).item() == 0.0

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(4)
        W = rng.normal(size=(2, 4))
        w = rng.normal(size=4)
        h_i = rng.normal(size=4)
        h_j = rng.normal(size=4)
        e = 0.63
        raw = e * (w @ np.concatenate([W @ h_i, W @ h_j]))
        expected = raw if raw > 0 else 0.2 * raw
        got = attention_coefficient(Tensor(h_i), Tensor(h_j), e, Tensor(W),
                                    Tensor(w), 0.2)
        assert abs(got.item() - expected) < 1e-12


class TestChannelAttention:
    def test_single_node_graph_self_loop_only(self):
        from dgsum.hetgraph import NodeId
        node = NodeId(kind="document", index=0, doc=0, token_position=0)
        g = HeteroGraph([node], {t: [] for t in EDGE_TYPES})
        W = Tensor(RNG.normal(size=(3, 5)))
        w = Tensor(RNG.normal(size=6))
        h = Tensor(RNG.normal(size=(1, 5)))
        out = channel_attention(h, g, "WO", [(W, w)])
        s = h.data @ W.data.T
        expected = np.where(s > 0, s, np.expm1(np.minimum(s, 0)))
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_alpha_rows_sum_to_one(self, table_for):
        g = small_graph(table_for)
        n = g.n_nodes
        W = Tensor(RNG.normal(size=(4, 6)))
        w = Tensor(RNG.normal(size=8))
        h = Tensor(RNG.normal(size=(n, 6)))
        # recompute alpha exactly as channel_attention does
        ew, mask = g.dense_channel("SS")
        s = h.data @ W.data.T
        a_src = s @ w.data[:4]
        a_dst = s @ w.data[4:]
        raw = a_src[:, None] + a_dst[None, :]
        d = np.where(raw * ew > 0, raw * ew, 0.2 * raw * ew)
        logits = np.where(mask, d, -1e9)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        alpha = e / e.sum(axis=1, keepdims=True)
        assert np.allclose(alpha.sum(axis=1), 1.0, atol=1e-7)
        assert np.all(alpha[~mask] == 0.0)

    def test_three_node_path_matches_dense_oracle(self):
        from dgsum.hetgraph import NodeId
        nodes = [NodeId(kind="word", index=i, doc=0, sent=0, tok=i, token_position=i + 1)
                 for i in range(3)]
        g = HeteroGraph(nodes, {**{t: [] for t in EDGE_TYPES},
                                "WO": [(0, 1, 1.0), (1, 2, 1.0)]})
        rng = np.random.default_rng(9)
        W = rng.normal(size=(3, 4))
        w = rng.normal(size=6)
        h = rng.normal(size=(3, 4))
        got = channel_attention(Tensor(h), g, "WO", [(Tensor(W), Tensor(w))])
        ew, mask = g.dense_channel("WO")
        expected = dense_gat_channel_oracle(h, ew, mask, W, w)
        assert np.allclose(got.data, expected, atol=1e-10)

    def test_heads_concatenated(self, table_for):
        g = small_graph(table_for)
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        heads = [(Tensor(RNG.normal(size=(4, 6))), Tensor(RNG.normal(size=8)))
                 for _ in range(3)]
        out = channel_attention(h, g, "SS", heads)
        assert out.shape == (g.n_nodes, 12)
        solo = channel_attention(h, g, "SS", heads[:1])
        assert np.array_equal(out.data[:, :4], solo.data)


class TestMgatLayer:
    def test_output_shape(self, table_for):
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=1, n_heads=2, d_in=6, d_head=3)
        store = tiny_params(cfg)
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        out = mgat_layer(h, g, store, 0, cfg)
        assert out.shape == (g.n_nodes, 6)

    def test_zero_u_zero_output(self, table_for):
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=1, n_heads=1, d_in=6, d_head=3)
        store = tiny_params(cfg)
        store["mgat0.U"].data[...] = 0.0
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        out = mgat_layer(h, g, store, 0, cfg)
        assert np.all(out.data == 0.0)

    def test_channel_block_permutation(self, table_for):
        """Permuting the channel order with matching U column blocks leaves
        the output unchanged: channels map to fixed blocks of U's input."""
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=1, n_heads=1, d_in=6, d_head=3)
        store = tiny_params(cfg, seed=3)
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        base = mgat_layer(h, g, store, 0, cfg)

        perm = [3, 0, 5, 1, 4, 2]
        channels = tuple(EDGE_TYPES[i] for i in perm)
        permuted = ParamStore()
        rng = np.random.default_rng(0)
        for ch in channels:
            for m in range(cfg.n_heads):
                for suffix in ("W", "w"):
                    src = store[f"mgat0.{ch}.h{m}.{suffix}"]
                    t = permuted.add(f"mgat0.{ch}.h{m}.{suffix}", src.shape, rng)
                    t.data[...] = src.data
        width = cfg.d_head * cfg.n_heads
        u = store["mgat0.U"].data
        blocks = [u[:, i * width:(i + 1) * width] for i in range(6)]
        t = permuted.add("mgat0.U", u.shape, rng)
        t.data[...] = np.concatenate([blocks[i] for i in perm], axis=1)
        out = mgat_layer(h, g, permuted, 0, cfg, channels=channels)
        assert np.allclose(out.data, base.data, atol=1e-12)


class TestMgatEncode:
    def test_zero_layers_identity(self, table_for):
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=0, n_heads=1, d_in=6, d_head=3)
        store = tiny_params(cfg)
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        out = mgat_encode(h, g, store, cfg)
        assert np.array_equal(out.data, h.data)

    def test_shape_preserved_any_depth(self, table_for):
        g = small_graph(table_for)
        for n_layers in (1, 2, 3):
            cfg = MgatConfig(n_layers=n_layers, n_heads=2, d_in=6, d_head=3)
            store = tiny_params(cfg)
            h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
            assert mgat_encode(h, g, store, cfg).shape == (g.n_nodes, 6)

    def test_two_layer_replay_oracle(self, table_for):
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=2, n_heads=1, d_in=6, d_head=3, residual=True)
        store = tiny_params(cfg, seed=8)
        h0 = RNG.normal(size=(g.n_nodes, 6))
        got = mgat_encode(Tensor(h0), g, store, cfg)

        h = h0
        for layer in range(2):
            blocks = []
            for ch in EDGE_TYPES:
                ew, mask = g.dense_channel(ch)
                blocks.append(dense_gat_channel_oracle(
                    h, ew, mask, store[f"mgat{layer}.{ch}.h0.W"].data,
                    store[f"mgat{layer}.{ch}.h0.w"].data))
            stacked = np.concatenate(blocks, axis=1)
            h = h + stacked @ store[f"mgat{layer}.U"].data.T
        assert np.allclose(got.data, h, atol=1e-9)

    def test_alignment_mismatch_error(self, table_for):
        from dgsum.errors import AlignmentError
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=1, n_heads=1, d_in=6, d_head=3)
        store = tiny_params(cfg)
        with pytest.raises(AlignmentError):
            mgat_encode(Tensor(RNG.normal(size=(g.n_nodes + 1, 6))), g, store, cfg)

    def test_no_residual_flag(self, table_for):
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=1, n_heads=1, d_in=6, d_head=3, residual=False)
        store = tiny_params(cfg)
        store["mgat0.U"].data[...] = 0.0
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        assert np.all(mgat_encode(h, g, store, cfg).data == 0.0)


def permute_graph(g: HeteroGraph, perm):
    inv = {int(old): new for new, old in enumerate(perm)}
    nodes = [g.nodes[int(i)] for i in perm]
    edges = {t: [(min(inv[a], inv[b]), max(inv[a], inv[b]), w) for a, b, w in g.edges[t]]
             for t in EDGE_TYPES}
    return HeteroGraph(nodes, edges)


class TestProperties:
    def test_permutation_equivariance_exact(self, table_for):
        rng = np.random.default_rng(31)
        cfg = MgatConfig(n_layers=2, n_heads=2, d_in=6, d_head=3)
        store = tiny_params(cfg, seed=5)
        for trial in range(8):
            cluster = cluster_from_texts(
                f"p{trial}", ["storm coast. flood town.", "rain falls."])
            table = table_for([cluster], seed=trial)
            g = build_hetero_graph(cluster, table, MeanWordEmbedder(table), GraphConfig())
            h = rng.normal(size=(g.n_nodes, 6))
            base = mgat_encode(Tensor(h), g, store, cfg).data
            perm = rng.permutation(g.n_nodes)
            gp = permute_graph(g, perm)
            hp = h[perm]
            out = mgat_encode(Tensor(hp), gp, store, cfg).data
            assert np.array_equal(out, base[perm])  # exact, not approx

    def test_channel_isolation(self, table_for):
        g = small_graph(table_for)
        cfg = MgatConfig(n_layers=1, n_heads=1, d_in=6, d_head=3)
        store = tiny_params(cfg, seed=2)
        h = Tensor(RNG.normal(size=(g.n_nodes, 6)))
        blocks_before = {
            ch: channel_attention(h, g, ch,
                                  [(store[f"mgat0.{ch}.h0.W"], store[f"mgat0.{ch}.h0.w"])])
            for ch in EDGE_TYPES
        }
        zeroed = HeteroGraph(g.nodes, {**g.edges, "SS": []})
        for ch in EDGE_TYPES:
            after = channel_attention(
                h, zeroed, ch,
                [(store[f"mgat0.{ch}.h0.W"], store[f"mgat0.{ch}.h0.w"])])
            if ch == "SS":
                assert not np.array_equal(after.data, blocks_before[ch].data)
            else:
                assert np.array_equal(after.data, blocks_before[ch].data)

    def test_zero_edge_weight_zero_coefficient_on_random_graphs(self, table_for):
        rng = np.random.default_rng(77)
        for trial in range(50):
            d_in, d_head = 5, 3
            W = Tensor(rng.normal(size=(d_head, d_in)))
            w = Tensor(rng.normal(size=2 * d_head))
            h_i = Tensor(rng.normal(size=d_in))
            h_j = Tensor(rng.normal(size=d_in))
            assert attention_coefficient(h_i, h_j, 0.0, W, w).item() == 0.0

    def test_edge_weight_monotonicity_positive_regime(self):
        """With positive raw attention logits, raising one e_ij never lowers
        its alpha."""
        from dgsum.hetgraph import NodeId
        nodes = [NodeId(kind="word", index=i, doc=0, sent=0, tok=i, token_position=i + 1)
                 for i in range(3)]
        rng = np.random.default_rng(3)
        W = np.abs(rng.normal(size=(3, 4)))  # positive throughout: raw logits > 0
        w = np.abs(rng.normal(size=6))
        h = np.abs(rng.normal(size=(3, 4)))
        s = h @ W.T

        def alpha_01(weight_01):
            g = HeteroGraph(nodes, {**{t: [] for t in EDGE_TYPES},
                                    "WO": [(0, 1, weight_01), (1, 2, 0.4)]})
            ew, mask = g.dense_channel("WO")
            a_src = s @ w[:3]
            a_dst = s @ w[3:]
            raw = a_src[:, None] + a_dst[None, :]
            assert np.all(raw > 0)
            d = np.where(raw * ew > 0, raw * ew, 0.2 * raw * ew)
            logits = np.where(mask, d, -1e9)
            e = np.exp(logits - logits.max(axis=1, keepdims=True))
            return (e / e.sum(axis=1, keepdims=True))[0, 1]

        values = [alpha_01(x) for x in (0.1, 0.3, 0.5, 0.9)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_full_gradient_check(self, table_for):
        cluster = cluster_from_texts("gc", ["storm coast. flood town."])
        table = table_for([cluster], dim=4)
        g = build_hetero_graph(cluster, table, MeanWordEmbedder(table), GraphConfig())
        assert g.n_nodes <= 12
        cfg = MgatConfig(n_layers=2, n_heads=2, d_in=5, d_head=3)
        store = tiny_params(cfg, seed=13)
        h = Tensor(np.random.default_rng(1).normal(size=(g.n_nodes, 5)),
                   requires_grad=True)
        probe = nm.Tensor(np.random.default_rng(2).normal(size=(g.n_nodes, 5)))

        def loss():
            return nm.mean(nm.mul(mgat_encode(h, g, store, cfg), probe))

        params = {name: t for name, t in store.items()}
        params["h"] = h
        err = nm.grad_check(loss, params, max_entries=24)
        assert err < 1e-5
