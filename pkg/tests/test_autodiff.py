import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import cure.autodiff as ad
from cure.errors import NumericError, ValidationError

from helpers import max_rel_error, scalar_gru_step, scalar_lstm_step


def rand_value(rng, *shape, name=""):
    return ad.Value(rng.uniform(-1.0, 1.0, size=shape), name=name)


class TestElementaryOps:
    def test_sum_all_gradient_is_ones(self):
        x = ad.Value(np.array([1.0, 2.0, 3.0]))
        ad.backward(ad.sum_all(x))
        assert np.array_equal(x.grad, np.ones(3))

    def test_product_rule(self):
        """loss = sum(x * y) gives grad(x) = y."""
        rng = np.random.default_rng(0)
        x, y = rand_value(rng, 5), rand_value(rng, 5)
        ad.backward(ad.sum_all(ad.mul(x, y)))
        assert np.allclose(x.grad, y.data)
        assert np.allclose(y.grad, x.data)

    def test_matvec_gradients_match_finite_differences(self):
        rng = np.random.default_rng(1)
        w, x = rand_value(rng, 4, 3), rand_value(rng, 3)

        def loss_fn():
            return float(ad.sum_all(ad.tanh(ad.matvec(w, x))).data)

        ad.backward(ad.sum_all(ad.tanh(ad.matvec(w, x))))
        fd = ad.finite_difference(loss_fn, {"w": w, "x": x})
        assert max_rel_error(w.grad, fd["w"]) < 1e-6
        assert max_rel_error(x.grad, fd["x"]) < 1e-6

    def test_concat_routes_gradients(self):
        a, b = ad.Value(np.array([1.0, 2.0])), ad.Value(np.array([3.0]))
        out = ad.concat([a, b])
        ad.backward(ad.sum_all(ad.mul(out, ad.Value(np.array([2.0, 3.0, 4.0])))))
        assert np.allclose(a.grad, [2.0, 3.0])
        assert np.allclose(b.grad, [4.0])

    def test_blend_gradients_match_finite_differences(self):
        rng = np.random.default_rng(2)
        w = rand_value(rng, 3)
        parts = [rand_value(rng, 4) for _ in range(3)]

        def graph():
            return ad.sum_all(ad.tanh(ad.blend(w, parts)))

        ad.backward(graph())
        fd = ad.finite_difference(lambda: float(graph().data), {"w": w, "p0": parts[0]})
        assert max_rel_error(w.grad, fd["w"]) < 1e-6
        assert max_rel_error(parts[0].grad, fd["p0"]) < 1e-6

    def test_row_accumulates_into_table(self):
        table = ad.Value(np.ones((3, 2)))
        out = ad.add(ad.row(table, 1), ad.row(table, 1))
        ad.backward(ad.sum_all(out))
        assert np.array_equal(table.grad, [[0, 0], [2, 2], [0, 0]])

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValidationError):
            ad.add(ad.Value(np.zeros(2)), ad.Value(np.zeros(3)))
        with pytest.raises(ValidationError):
            ad.matvec(ad.Value(np.zeros((2, 2))), ad.Value(np.zeros(3)))

    @settings(max_examples=30, deadline=None)
    @given(hnp.arrays(np.float64, st.integers(1, 8), elements=st.floats(-18, 18)))
    def test_sigmoid_tanh_ranges(self, arr):
        """Sigmoid outputs stay in (0,1) and tanh in (-1,1), elementwise.

        Tested over the float64-representable range: tanh rounds to exactly
        1.0 beyond |x| ~ 19 and sigmoid to 1.0 beyond |x| ~ 36.
        """
        s = ad.sigmoid(ad.Value(arr)).data
        t = ad.tanh(ad.Value(arr)).data
        assert np.all(s > 0) and np.all(s < 1)
        assert np.all(t > -1) and np.all(t < 1)

    def test_softmax_sums_to_one_and_matches_definition(self):
        rng = np.random.default_rng(3)
        x = rand_value(rng, 6)
        s = ad.softmax(x).data
        direct = np.exp(x.data) / np.exp(x.data).sum()
        assert math.isclose(s.sum(), 1.0, rel_tol=1e-12)
        assert np.allclose(s, direct, rtol=1e-12)


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        loss = ad.softmax_cross_entropy(ad.Value(np.zeros(4)), 1)
        assert math.isclose(float(loss.data), math.log(4), rel_tol=1e-15)

    def test_confident_correct_limit(self):
        logits = np.zeros(5)
        logits[2] = 60.0
        loss = ad.softmax_cross_entropy(ad.Value(logits), 2)
        assert float(loss.data) < 1e-12

    def test_matches_high_precision_formula(self):
        """Random 7-dim logits against a Decimal evaluation of the definition."""
        from decimal import Decimal, getcontext

        getcontext().prec = 50
        rng = np.random.default_rng(4)
        for _ in range(20):
            z = rng.uniform(-5, 5, size=7)
            k = int(rng.integers(7))
            loss = float(ad.softmax_cross_entropy(ad.Value(z), k).data)
            dz = [Decimal(repr(float(v))) for v in z]
            expected = (sum(v.exp() for v in dz)).ln() - dz[k]
            assert math.isclose(loss, float(expected), rel_tol=1e-12)

    def test_gradient_is_probs_minus_onehot(self):
        rng = np.random.default_rng(5)
        x = rand_value(rng, 6)
        ad.backward(ad.softmax_cross_entropy(x, 3))
        probs = np.exp(x.data) / np.exp(x.data).sum()
        probs[3] -= 1.0
        assert np.allclose(x.grad, probs, rtol=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(ValidationError):
            ad.softmax_cross_entropy(ad.Value(np.zeros(3)), 3)


class TestBackwardContract:
    def test_double_backward_doubles_gradients(self):
        x = ad.Value(np.array([1.0, 2.0]))
        loss = ad.sum_all(ad.mul(x, x))
        ad.backward(loss)
        once = x.grad.copy()
        ad.backward(loss)
        assert np.allclose(x.grad, 2 * once)

    def test_fanout_accumulates(self):
        x = ad.Value(np.array([3.0]))
        loss = ad.sum_all(ad.add(x, x))
        ad.backward(loss)
        assert np.allclose(x.grad, [2.0])

    def test_backward_requires_scalar(self):
        with pytest.raises(ValidationError):
            ad.backward(ad.Value(np.zeros(2)))

    def test_nonfinite_forward_is_hard_error(self):
        with pytest.raises(NumericError):
            ad.Value(np.array([1.0, np.inf]))

    def test_forward_determinism(self):
        rng = np.random.default_rng(6)
        w = rng.uniform(-1, 1, (4, 4))
        x = rng.uniform(-1, 1, 4)
        out1 = ad.tanh(ad.matvec(ad.Value(w), ad.Value(x))).data
        out2 = ad.tanh(ad.matvec(ad.Value(w), ad.Value(x))).data
        assert np.array_equal(out1, out2)


def lstm_param_dict(p: ad.LstmParams) -> dict:
    return {v.name.split(".")[-1]: v.data.tolist() for v in p.values()}


def gru_param_dict(p: ad.GruParams) -> dict:
    return {v.name.split(".")[-1]: v.data.tolist() for v in p.values()}


class TestLstmStep:
    def test_zero_parameters_fixed_point(self):
        """All-zero weights and state give h = 0 (gates at 0.5, tanh(0) = 0)."""
        rng = np.random.default_rng(7)
        p = ad.LstmParams.init(3, 2, rng, "t")
        for v in p.values():
            v.data[...] = 0.0
        state = ad.lstm_step(ad.Value(np.array([0.7, -0.3])), ad.LstmState.zeros(3), p)
        assert np.array_equal(state.h.data, np.zeros(3))
        assert np.array_equal(state.c.data, np.zeros(3))

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(8)
        p = ad.LstmParams.init(3, 4, rng, "t")
        x = rng.uniform(-1, 1, 4)
        h0 = rng.uniform(-1, 1, 3)
        c0 = rng.uniform(-1, 1, 3)
        state = ad.lstm_step(ad.Value(x), ad.LstmState(ad.Value(h0), ad.Value(c0)), p)
        h_expected, c_expected = scalar_lstm_step(list(x), list(h0), list(c0), lstm_param_dict(p))
        assert np.allclose(state.h.data, h_expected, rtol=1e-12)
        assert np.allclose(state.c.data, c_expected, rtol=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(9)
        p = ad.LstmParams.init(4, 3, rng, "t")
        x_data = rng.uniform(-1, 1, 3)

        def graph():
            state = ad.lstm_step(ad.Value(x_data), ad.LstmState.zeros(4), p)
            return ad.sum_all(ad.mul(state.h, state.h))

        ad.backward(graph())
        tensors = {v.name: v for v in p.values()}
        fd = ad.finite_difference(lambda: float(graph().data), tensors)
        for name, v in tensors.items():
            assert max_rel_error(v.grad, fd[name]) < 1e-3, name


class TestGruStep:
    def test_update_gate_identity(self):
        """Forcing z to 1 keeps the previous hidden state unchanged."""
        rng = np.random.default_rng(10)
        p = ad.GruParams.init(3, 2, rng, "t")
        p.W_z.data[...] = 0.0
        p.U_z.data[...] = 0.0
        p.b_z.data[...] = 50.0
        h0 = rng.uniform(-1, 1, 3)
        state = ad.gru_step(ad.Value(np.array([0.4, -0.9])), ad.GruState(ad.Value(h0)), p)
        assert np.allclose(state.h.data, h0, atol=1e-15)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(11)
        p = ad.GruParams.init(3, 5, rng, "t")
        x = rng.uniform(-1, 1, 5)
        h0 = rng.uniform(-1, 1, 3)
        state = ad.gru_step(ad.Value(x), ad.GruState(ad.Value(h0)), p)
        expected = scalar_gru_step(list(x), list(h0), gru_param_dict(p))
        assert np.allclose(state.h.data, expected, rtol=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(12)
        p = ad.GruParams.init(4, 4, rng, "t")
        x_data = rng.uniform(-1, 1, 4)
        h_data = rng.uniform(-1, 1, 4)

        def graph():
            state = ad.gru_step(ad.Value(x_data), ad.GruState(ad.Value(h_data)), p)
            return ad.sum_all(ad.mul(state.h, state.h))

        ad.backward(graph())
        tensors = {v.name: v for v in p.values()}
        fd = ad.finite_difference(lambda: float(graph().data), tensors)
        for name, v in tensors.items():
            assert max_rel_error(v.grad, fd[name]) < 1e-3, name


class TestOptimizerPieces:
    def test_clip_rescales_to_cap(self):
        a = ad.Value(np.zeros(3))
        a.grad = np.array([3.0, 4.0, 0.0])
        norm = ad.clip_gradients([a], max_norm=1.0)
        assert math.isclose(norm, 5.0)
        assert math.isclose(float(np.linalg.norm(a.grad)), 1.0, rel_tol=1e-12)

    def test_clip_leaves_small_gradients_alone(self):
        a = ad.Value(np.zeros(2))
        a.grad = np.array([0.3, 0.4])
        ad.clip_gradients([a], max_norm=5.0)
        assert np.allclose(a.grad, [0.3, 0.4])

    def test_sgd_and_zero_grad(self):
        a = ad.Value(np.array([1.0, 1.0]))
        a.grad = np.array([0.5, -0.5])
        ad.sgd_step([a], 0.1)
        assert np.allclose(a.data, [0.95, 1.05])
        ad.zero_grad([a])
        assert np.array_equal(a.grad, np.zeros(2))


class TestCheckpoint:
    def test_round_trip_is_bitwise(self, tmp_path):
        rng = np.random.default_rng(13)
        arrays = {
            "w": rng.uniform(-1, 1, (5, 3)),
            "b": rng.uniform(-1, 1, 4),
            "tiny": np.array([[1e-300, -0.0, 123456789.123456789]]),
        }
        path = tmp_path / "model.ckpt"
        ad.write_checkpoint(path, arrays)
        loaded = ad.read_checkpoint(path)
        assert set(loaded) == set(arrays)
        for name, arr in arrays.items():
            assert np.array_equal(loaded[name], np.atleast_2d(arr)), name

    def test_header_checked(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_text("NOT-A-MODEL\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="header"):
            ad.read_checkpoint(path)

    def test_truncated_block_detected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_text("CURE-MODEL v1\nw 2 2\n1.0 2.0\n3.0\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="row 1"):
            ad.read_checkpoint(path)
