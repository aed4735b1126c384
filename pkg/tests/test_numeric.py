"""Autodiff primitives, init, Adam, checkpoints, and the gradient checker."""

import numpy as np
import pytest

import dgsum.numeric as nm
from dgsum.errors import ConfigError, DataError, NumericError, ShapeError
from oracles import adam_two_step_oracle

RNG = np.random.default_rng(12345)


def rand_tensor(*shape, rg=True):
    return nm.Tensor(RNG.normal(size=shape), requires_grad=rg)


def check(loss_fn, params, tol=1e-6, **kw):
    err = nm.grad_check(loss_fn, params, **kw)
    assert err < tol, f"gradient check failed: rel err {err:.3e} >= {tol}"


class TestPrimitiveGradients:
    def test_matmul(self):
        a = rand_tensor(3, 4)
        b = rand_tensor(4, 2)
        check(lambda: nm.sum_(nm.mul(nm.matmul(a, b), rand_const(3, 2))), {"a": a, "b": b})

    def test_add_broadcast(self):
        a = rand_tensor(3, 4)
        b = rand_tensor(4)
        check(lambda: nm.sum_(nm.power(nm.add(a, b), 2.0)), {"a": a, "b": b})

    def test_mul_broadcast_column(self):
        a = rand_tensor(5, 3)
        b = rand_tensor(5, 1)
        check(lambda: nm.sum_(nm.mul(a, b)), {"a": a, "b": b})

    def test_div(self):
        a = rand_tensor(4)
        b = nm.Tensor(RNG.uniform(1.0, 2.0, size=4), requires_grad=True)
        check(lambda: nm.sum_(nm.div(a, b)), {"a": a, "b": b})

    def test_softmax(self):
        a = rand_tensor(3, 5)
        w = rand_const(3, 5)
        check(lambda: nm.sum_(nm.mul(nm.softmax(a, axis=-1), w)), {"a": a})

    def test_leaky_relu(self):
        a = rand_tensor(6, 3)
        check(lambda: nm.sum_(nm.leaky_relu(a, 0.2)), {"a": a})

    def test_elu(self):
        a = rand_tensor(6, 3)
        check(lambda: nm.sum_(nm.mul(nm.elu(a), rand_const(6, 3))), {"a": a})

    def test_relu(self):
        a = rand_tensor(6, 3)
        check(lambda: nm.sum_(nm.relu(a)), {"a": a})

    def test_mean_axis(self):
        a = rand_tensor(4, 3)
        check(lambda: nm.sum_(nm.power(nm.mean(a, axis=0), 2.0)), {"a": a})

    def test_mean_all(self):
        a = rand_tensor(4, 3)
        check(lambda: nm.mean(nm.power(a, 2.0)), {"a": a})

    def test_concat_and_slice(self):
        a = rand_tensor(2, 3)
        b = rand_tensor(4, 3)
        w = rand_const(6, 3)

        def loss():
            c = nm.concat([a, b], axis=0)
            return nm.sum_(nm.mul(nm.slice_axis(c, 0, 1, 5), nm.slice_axis(w, 0, 1, 5)))

        check(loss, {"a": a, "b": b})

    def test_gather_rows(self):
        a = rand_tensor(5, 3)
        idx = np.array([0, 2, 2, 4])
        check(lambda: nm.sum_(nm.power(nm.gather_rows(a, idx), 2.0)), {"a": a})

    def test_masked_fill(self):
        a = rand_tensor(4, 4)
        mask = RNG.random((4, 4)) < 0.3
        check(lambda: nm.sum_(nm.power(nm.masked_fill(a, mask, -5.0), 2.0)), {"a": a})

    def test_layer_norm(self):
        x = rand_tensor(4, 6)
        g = rand_tensor(6)
        b = rand_tensor(6)
        w = rand_const(4, 6)
        check(lambda: nm.sum_(nm.mul(nm.layer_norm(x, g, b), w)),
              {"x": x, "g": g, "b": b})

    def test_dropout(self):
        a = rand_tensor(8, 8)

        def loss():
            rng = np.random.default_rng(7)  # re-seeded per call: deterministic
            return nm.sum_(nm.dropout(a, 0.4, rng, train=True))

        check(loss, {"a": a})

    def test_cosine_sim(self):
        u = rand_tensor(5)
        v = rand_tensor(5)
        check(lambda: nm.cosine_sim(u, v), {"u": u, "v": v})

    def test_cross_entropy(self):
        logits = rand_tensor(4, 6)
        targets = np.array([1, 3, 0, 5])
        check(lambda: nm.cross_entropy_smoothed(logits, targets, 0.1), {"l": logits})

    def test_transpose_reshape(self):
        a = rand_tensor(3, 4)
        check(lambda: nm.sum_(nm.power(nm.reshape(nm.transpose(a), (2, 6)), 2.0)),
              {"a": a})

    def test_exp_log(self):
        a = nm.Tensor(RNG.uniform(0.5, 2.0, size=5), requires_grad=True)
        check(lambda: nm.sum_(nm.log(nm.exp(a))), {"a": a})


def rand_const(*shape):
    return nm.Tensor(np.random.default_rng(99).normal(size=shape))


class TestPrimitiveContracts:
    def test_softmax_rows_sum_to_one(self):
        a = rand_tensor(7, 9)
        s = nm.softmax(a, axis=-1)
        assert np.allclose(s.data.sum(axis=-1), 1.0, atol=1e-7)

    def test_concat_split_round_trip(self):
        a = rand_tensor(2, 3)
        b = rand_tensor(5, 3)
        c = nm.concat([a, b], axis=0)
        assert np.array_equal(nm.slice_axis(c, 0, 0, 2).data, a.data)
        assert np.array_equal(nm.slice_axis(c, 0, 2, 7).data, b.data)

    def test_matmul_shape_error_names_primitive(self):
        with pytest.raises(ShapeError, match="matmul"):
            nm.matmul(rand_tensor(3, 4), rand_tensor(3, 4))

    def test_add_shape_error(self):
        with pytest.raises(ShapeError, match="add"):
            nm.add(rand_tensor(3, 4), rand_tensor(2, 5))

    def test_double_path_accumulates(self):
        x = nm.Tensor(3.0, requires_grad=True)
        y = nm.add(x, x)
        y.backward()
        assert x.grad == 2.0

    def test_backward_replay_deterministic(self):
        x = rand_tensor(4, 4)
        w = rand_tensor(4, 4)
        grads = []
        for _ in range(2):
            x.zero_grad()
            w.zero_grad()
            loss = nm.sum_(nm.power(nm.matmul(nm.softmax(x), w), 2.0))
            loss.backward()
            grads.append((x.grad.copy(), w.grad.copy()))
        assert np.array_equal(grads[0][0], grads[1][0])
        assert np.array_equal(grads[0][1], grads[1][1])

    def test_backward_requires_scalar(self):
        with pytest.raises(ShapeError):
            rand_tensor(3).backward()

    def test_non_finite_loss_rejected(self):
        bad = nm.Tensor(np.inf, requires_grad=True)
        with pytest.raises(NumericError):
            bad.backward()

    def test_cosine_zero_norm_guard(self):
        z = nm.Tensor(np.zeros(4), requires_grad=True)
        v = rand_tensor(4)
        out = nm.cosine_sim(z, v)
        assert out.item() == 0.0

    def test_dropout_eval_identity(self):
        a = rand_tensor(5, 5)
        out = nm.dropout(a, 0.5, np.random.default_rng(0), train=False)
        assert out is a

    def test_dropout_scale_preserves_mean(self):
        a = nm.Tensor(np.ones((2000,)))
        out = nm.dropout(a, 0.25, np.random.default_rng(3), train=True)
        assert abs(out.data.mean() - 1.0) < 0.05

    def test_masked_fill_exact(self):
        a = nm.Tensor(np.ones((2, 2)))
        mask = np.array([[True, False], [False, True]])
        out = nm.masked_fill(a, mask, -1.0)
        assert out.data.tolist() == [[-1.0, 1.0], [1.0, -1.0]]


class TestCrossEntropyValues:
    def test_perfect_prediction_no_smoothing(self):
        logits = np.full((3, 5), -100.0)
        targets = np.array([0, 2, 4])
        logits[np.arange(3), targets] = 100.0
        loss = nm.cross_entropy_smoothed(nm.Tensor(logits), targets, 0.0)
        assert loss.item() < 1e-8

    def test_uniform_logits_ln_v(self):
        for v in (3, 7, 20):
            logits = nm.Tensor(np.zeros((4, v)))
            targets = np.array([0, 1, 2, 0])
            loss = nm.cross_entropy_smoothed(logits, targets, 0.1)
            assert abs(loss.item() - np.log(v)) < 1e-12

    def test_hand_computed_fixture(self):
        # T=2, V=3, eps=0.1: direct evaluation of the smoothed NLL formula
        logits = np.array([[1.0, 0.0, -1.0], [0.5, 2.0, 0.0]])
        targets = np.array([0, 1])
        eps = 0.1
        expected = 0.0
        for t in range(2):
            row = logits[t]
            logp = row - np.log(np.exp(row).sum())
            q = np.full(3, eps / 2)
            q[targets[t]] = 1 - eps
            expected += -(q * logp).sum()
        expected /= 2
        loss = nm.cross_entropy_smoothed(nm.Tensor(logits), targets, eps)
        assert abs(loss.item() - expected) < 1e-12

    def test_pad_positions_excluded(self):
        logits = np.zeros((3, 4))
        logits[0, 1] = 5.0
        with_pad = nm.cross_entropy_smoothed(
            nm.Tensor(logits), np.array([1, 0, 0]), 0.0, ignore_index=0)
        alone = nm.cross_entropy_smoothed(
            nm.Tensor(logits[:1]), np.array([1]), 0.0)
        assert abs(with_pad.item() - alone.item()) < 1e-12


class TestInitAndParams:
    def test_same_seed_identical(self):
        from dgsum.numeric import ParamStore
        a = ParamStore()
        b = ParamStore()
        a.add("w", (4, 5), np.random.default_rng(3))
        b.add("w", (4, 5), np.random.default_rng(3))
        assert np.array_equal(a["w"].data, b["w"].data)

    def test_different_seeds_differ(self):
        from dgsum.numeric import ParamStore
        a = ParamStore()
        b = ParamStore()
        a.add("w", (4, 5), np.random.default_rng(3))
        b.add("w", (4, 5), np.random.default_rng(4))
        assert not np.array_equal(a["w"].data, b["w"].data)

    def test_xavier_bounds(self):
        from dgsum.numeric import ParamStore, xavier_bound
        store = ParamStore()
        t = store.add("w", (30, 50), np.random.default_rng(0))
        bound = xavier_bound((30, 50))
        assert bound == pytest.approx(np.sqrt(6 / 80))
        assert np.all(np.abs(t.data) <= bound)

    def test_duplicate_name_rejected(self):
        from dgsum.numeric import ParamStore
        store = ParamStore()
        store.add("w", (2,), np.random.default_rng(0))
        with pytest.raises(ConfigError):
            store.add("w", (2,), np.random.default_rng(0))

    def test_checkpoint_round_trip_bit_exact(self, tmp_path):
        from dgsum.numeric import ParamStore
        store = ParamStore()
        rng = np.random.default_rng(11)
        store.add("layer.w", (7, 3), rng)
        store.add("layer.b", (3,), rng, init="zeros")
        path = tmp_path / "ckpt.npz"
        store.save(path)
        loaded = ParamStore.load(path)
        assert loaded.names() == store.names() or set(loaded.names()) == set(store.names())
        for name, t in store.items():
            assert np.array_equal(loaded[name].data, t.data)
            assert loaded[name].data.dtype == t.data.dtype

    def test_checkpoint_shape_mismatch_names_param(self, tmp_path):
        from dgsum.numeric import ParamStore
        store = ParamStore()
        store.add("layer.w", (7, 3), np.random.default_rng(0))
        path = tmp_path / "ckpt.npz"
        store.save(path)
        other = ParamStore()
        other.add("layer.w", (7, 4), np.random.default_rng(0))
        with pytest.raises(ConfigError, match="layer.w"):
            other.load_data_from(path)

    def test_checkpoint_missing_header(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, w=np.zeros(3))
        from dgsum.numeric import ParamStore
        with pytest.raises(DataError):
            ParamStore.load(path)


class TestAdam:
    def _single(self, value):
        from dgsum.numeric import ParamStore
        store = ParamStore()
        rng = np.random.default_rng(0)
        t = store.add("p", (1,), rng)
        t.data[:] = value
        return store, t

    def test_zero_grad_no_change(self):
        store, t = self._single(1.5)
        opt = nm.Adam(store, lr=0.1)
        t.grad = np.zeros(1)
        opt.step()
        assert t.data[0] == 1.5

    def test_lr_zero_identity(self):
        store, t = self._single(1.5)
        opt = nm.Adam(store, lr=0.0)
        t.grad = np.ones(1)
        opt.step()
        assert t.data[0] == 1.5

    def test_two_step_matches_hand_unrolled(self):
        store, t = self._single(1.0)
        opt = nm.Adam(store, lr=0.1, betas=(0.9, 0.999), eps=1e-8)
        t.grad = np.array([0.5])
        opt.step()
        t.grad = np.array([-0.3])
        opt.step()
        expected = adam_two_step_oracle(1.0, 0.5, -0.3, 0.1, 0.9, 0.999, 1e-8)
        assert t.data[0] == pytest.approx(expected, rel=1e-12)

    def test_non_finite_grad_aborts(self):
        store, t = self._single(1.0)
        opt = nm.Adam(store, lr=0.1)
        t.grad = np.array([np.nan])
        with pytest.raises(NumericError, match="p"):
            opt.step()


class TestGradCheckHarness:
    def test_quadratic_tight(self):
        w = rand_tensor(4, 4)
        err = nm.grad_check(lambda: nm.sum_(nm.power(w, 2.0)), {"w": w})
        assert err < 1e-9

    def test_requires_double(self):
        nm.set_precision("single")
        try:
            w = rand_tensor(2, 2)
            with pytest.raises(NumericError):
                nm.grad_check(lambda: nm.sum_(w), {"w": w})
        finally:
            nm.set_precision("double")

    def test_sampling_large_params(self):
        w = rand_tensor(40, 40)  # 1600 entries, sampled
        err = nm.grad_check(lambda: nm.mean(nm.power(w, 2.0)), {"w": w}, max_entries=64)
        assert err < 1e-6
