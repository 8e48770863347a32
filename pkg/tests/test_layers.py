"""GRU and BiGRU behavior, including a hand-computed single-unit step."""

import numpy as np
import pytest

from mixqa import autodiff as ad
from mixqa.autodiff import Parameter, constant
from mixqa.layers import BiGru, GruLayer, bigru, gru_run, gru_step
from mixqa.optim import grad_check


def hand_gru_step(W, U, b, h_prev, x, hidden):
    """Scalar-arithmetic reference for one GRU update."""
    pre = x @ W + b
    z = 1.0 / (1.0 + np.exp(-(pre[:hidden] + h_prev @ U[:, :hidden])))
    r = 1.0 / (1.0 + np.exp(-(pre[hidden : 2 * hidden] + h_prev @ U[:, hidden : 2 * hidden])))
    n = np.tanh(pre[2 * hidden :] + (r * h_prev) @ U[:, 2 * hidden :])
    return z * h_prev + (1.0 - z) * n


class TestGruStep:
    def test_zero_weights_zero_state_gives_zero(self):
        rng = np.random.default_rng(0)
        layer = GruLayer(3, 4, rng)
        for p in layer.parameters():
            p.values[...] = 0.0
        h = gru_step(layer, constant(np.zeros(4)), constant(np.array([1.0, -2.0, 0.5])))
        np.testing.assert_array_equal(h.values, np.zeros(4))

    def test_single_unit_matches_hand_computation(self):
        rng = np.random.default_rng(1)
        layer = GruLayer(1, 1, rng)
        layer.W.values[...] = np.array([[0.5, -0.3, 0.8]])
        layer.U.values[...] = np.array([[0.2, 0.4, -0.6]])
        layer.b.values[...] = np.array([0.1, -0.2, 0.05])
        h_prev, x = 0.7, -1.2
        expected = hand_gru_step(
            layer.W.values, layer.U.values, layer.b.values, np.array([h_prev]), np.array([x]), 1
        )
        out = gru_step(layer, constant(np.array([h_prev])), constant(np.array([x])))
        np.testing.assert_allclose(out.values, expected, atol=1e-15)

    def test_random_step_matches_reference(self):
        rng = np.random.default_rng(2)
        layer = GruLayer(5, 3, rng)
        h_prev = rng.standard_normal(3)
        x = rng.standard_normal(5)
        expected = hand_gru_step(layer.W.values, layer.U.values, layer.b.values, h_prev, x, 3)
        out = gru_step(layer, constant(h_prev), constant(x))
        np.testing.assert_allclose(out.values, expected, atol=1e-14)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        layer = GruLayer(3, 2, rng)
        h0 = Parameter("h0", rng.standard_normal(2))
        x = Parameter("x", rng.standard_normal(3))
        w = Parameter("w", rng.standard_normal(2))

        def loss_fn():
            h = gru_step(layer, h0, x)
            return ad.dot(h, w)

        report = grad_check(loss_fn, layer.parameters() + [h0, x, w])
        assert max(report.values()) < 1e-4, report

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        layer = GruLayer(3, 2, rng)
        with pytest.raises(ValueError):
            gru_step(layer, constant(np.zeros(2)), constant(np.zeros(5)))


class TestBiGru:
    def test_length_one_sequence(self):
        rng = np.random.default_rng(5)
        f, b = GruLayer(3, 4, rng), GruLayer(3, 4, rng)
        xs = constant(rng.standard_normal((1, 3)))
        H, v = bigru(f, b, xs)
        assert H.shape == (1, 8)
        np.testing.assert_array_equal(v.values, H.values[0])

    def test_reversing_input_swaps_directions(self):
        rng = np.random.default_rng(6)
        f, b = GruLayer(3, 4, rng), GruLayer(3, 4, rng)
        xs = rng.standard_normal((6, 3))
        H_fwd = gru_run(f, constant(xs)).values
        H_as_bwd = gru_run(f, constant(xs[::-1].copy()), reverse=True).values
        # consuming the reversed sequence backwards retraces the forward pass
        np.testing.assert_allclose(H_fwd, H_as_bwd[::-1], atol=1e-14)

    def test_state_dimension_doubles_hidden(self):
        rng = np.random.default_rng(7)
        enc = BiGru(10, 128, rng)
        H, v = enc(constant(rng.standard_normal((4, 10))))
        assert H.shape == (4, 256)
        assert v.shape == (256,)

    def test_end_summary_concatenates_forward_last_and_backward_first(self):
        rng = np.random.default_rng(8)
        f, b = GruLayer(3, 4, rng), GruLayer(3, 4, rng)
        xs = constant(rng.standard_normal((5, 3)))
        H, v = bigru(f, b, xs)
        np.testing.assert_array_equal(v.values[:4], gru_run(f, xs).values[-1])
        np.testing.assert_array_equal(v.values[4:], gru_run(b, xs, reverse=True).values[0])

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(9)
        f, b = GruLayer(3, 4, rng), GruLayer(3, 4, rng)
        with pytest.raises(ValueError):
            bigru(f, b, constant(np.zeros((0, 3))))

    def test_row_count_matches_input_length(self):
        rng = np.random.default_rng(10)
        enc = BiGru(4, 3, rng)
        for L in (1, 2, 9):
            H, _ = enc(constant(rng.standard_normal((L, 4))))
            assert H.shape == (L, 6)

    def test_sequence_gradients(self):
        rng = np.random.default_rng(11)
        enc = BiGru(3, 2, rng)
        xs = Parameter("xs", rng.standard_normal((4, 3)))

        def loss_fn():
            H, v = enc(xs)
            return ad.add(ad.sum_all(ad.tanh(H)), ad.dot(v, v))

        report = grad_check(loss_fn, enc.parameters() + [xs])
        assert max(report.values()) < 1e-4, report
