# test_autodiff.py

import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from autodiff_modules import (GruParams, Value, backward, concat, constant, conv1d, dense,
                              finite_diff_check, grl, gru_sequence, mean_pool_time,
                              weighted_cross_entropy)
from autodiff_modules.autodiff_value import node
from errors import DegenerateInputError, DimensionError, DomainError, GraphError, LabelIndexError
from utils.rng import make_rng

EPS = 1e-5


def projected_sum(out, rng):
    """Scalar read-out with random weights so every output coordinate matters"""
    W = constant(rng.standard_normal((1, out.shape[-1])))
    return dense(out, W, constant(np.zeros(1)), 'identity').sum()


class TestDense(unittest.TestCase):

    def test_identity_map(self):
        y = dense(constant([3.0, -1.0]), constant(np.eye(2)), constant(np.zeros(2)), 'identity')
        assert_array_equal(y.data, [3.0, -1.0])

    def test_zero_weights_relu(self):
        y = dense(constant([5.0, 7.0]), constant(np.zeros((2, 2))), constant(np.zeros(2)), 'relu')
        assert_array_equal(y.data, [0.0, 0.0])

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            dense(constant(np.ones(3)), constant(np.ones((2, 2))), constant(np.zeros(2)))

    def test_unknown_activation(self):
        with self.assertRaises(DomainError):
            dense(constant(np.ones(2)), constant(np.ones((2, 2))), constant(np.zeros(2)), 'gelu')

    def test_gradients_match_finite_differences(self):
        for seed in range(20):
            rng = make_rng(seed, 'test', 'dense')
            n, m = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            x = Value(rng.standard_normal((3, n)))
            W = Value(rng.standard_normal((m, n)))
            b = Value(rng.standard_normal(m))
            activation = ('tanh', 'sigmoid', 'identity')[seed % 3]
            head = make_rng(seed, 'test', 'dense', 'readout')
            readout = head.standard_normal((1, m))

            def f():
                return dense(dense(x, W, b, activation), constant(readout), constant(np.zeros(1)),
                             'identity').sum()
            self.assertLess(finite_diff_check(f, [x, W, b], eps=EPS), 1e-5)


class TestConv1d(unittest.TestCase):

    def test_output_length(self):
        x = constant(np.ones((7, 3)))
        y = conv1d(x, constant(np.ones((4, 2, 3))), 2)
        self.assertEqual(y.shape, (6, 4))

    def test_hand_example(self):
        y = conv1d(constant([[1.0], [2.0], [3.0]]), constant(np.ones((1, 2, 1))), 2)
        assert_array_equal(y.data, [[3.0], [5.0]])

    def test_too_short(self):
        with self.assertRaises(DegenerateInputError):
            conv1d(constant(np.ones((1, 3))), constant(np.ones((4, 2, 3))), 2)

    def test_kernel_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            conv1d(constant(np.ones((5, 3))), constant(np.ones((4, 3, 3))), 2)

    def test_gradients_match_finite_differences(self):
        for seed in range(20):
            rng = make_rng(seed, 'test', 'conv')
            width = 2 + seed % 2
            c_in, c_out = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            x = Value(rng.standard_normal((2, 6, c_in)))
            kernels = Value(0.1 * rng.standard_normal((c_out, width, c_in)))
            # biases well above zero keep every pre-activation away from the relu kink
            bias = Value(2.0 + rng.random(c_out))
            readout = rng.standard_normal((1, c_out))

            def f():
                return dense(conv1d(x, kernels, width, bias), constant(readout), constant(np.zeros(1)),
                             'identity').sum()
            self.assertLess(finite_diff_check(f, [x, kernels, bias], eps=EPS), 1e-5)


class TestGru(unittest.TestCase):

    def test_hidden_states_shape(self):
        params = GruParams.create(make_rng(0, 'gru'), 4, 3)
        self.assertEqual(gru_sequence(constant(np.ones((5, 4))), params).shape, (5, 3))
        self.assertEqual(gru_sequence(constant(np.ones((2, 5, 4))), params).shape, (2, 5, 3))

    def test_zero_weights_keep_zero_state(self):
        params = GruParams.create(make_rng(0, 'gru'), 4, 3)
        for value in params.values():
            value.data = np.zeros_like(value.data)
        out = gru_sequence(constant(np.ones((5, 4))), params)
        assert_array_equal(out.data, np.zeros((5, 3)))

    def test_single_step_by_hand(self):
        rng = make_rng(1, 'test', 'gru-step')
        params = GruParams.create(rng, 3, 2)
        for value in params.values()[6:]:
            value.data = rng.standard_normal(2)
        x, h = rng.standard_normal(3), rng.standard_normal(2)
        p = {name: getattr(params, name).data for name in GruParams.FIELDS}

        def sigmoid(a):
            return 1.0 / (1.0 + np.exp(-a))
        z = sigmoid(p['W_z'] @ x + p['U_z'] @ h + p['b_z'])
        r = sigmoid(p['W_r'] @ x + p['U_r'] @ h + p['b_r'])
        n = np.tanh(p['W_h'] @ x + p['U_h'] @ (r * h) + p['b_h'])
        out = gru_sequence(constant(x[None]), params, h0=constant(h))
        assert_allclose(out.data, [(1.0 - z) * h + z * n], rtol=1e-12)

    def test_input_dim_mismatch(self):
        params = GruParams.create(make_rng(0, 'gru'), 4, 3)
        with self.assertRaises(DimensionError):
            gru_sequence(constant(np.ones((5, 2))), params)

    def test_gradients_match_finite_differences(self):
        for seed in range(20):
            rng = make_rng(seed, 'test', 'gru')
            dim, width = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            params = GruParams.create(rng, dim, width)
            for value in params.values()[6:]:
                value.data = 0.1 * rng.standard_normal(value.shape)
            x = Value(rng.standard_normal((2, 4, dim)))

            def f():
                return projected_sum(gru_sequence(x, params), make_rng(seed, 'readout'))
            self.assertLess(finite_diff_check(f, [x] + params.values(), eps=EPS), 1e-5)


class TestPoolingAndLoss(unittest.TestCase):

    def test_mean_pool_respects_lengths(self):
        x = constant(np.array([[[1.0], [3.0], [100.0]], [[2.0], [4.0], [6.0]]]))
        assert_allclose(mean_pool_time(x, [2, 3]).data, [[2.0], [4.0]])

    def test_mean_pool_empty(self):
        with self.assertRaises(DegenerateInputError):
            mean_pool_time(constant(np.zeros((0, 3))))

    def test_pool_gradients(self):
        rng = make_rng(0, 'test', 'pool')
        x = Value(rng.standard_normal((3, 5, 4)))

        def f():
            return projected_sum(mean_pool_time(x, [5, 2, 3]), make_rng(1, 'readout'))
        self.assertLess(finite_diff_check(f, [x], eps=EPS), 1e-5)

    def test_uniform_logits_loss(self):
        loss = weighted_cross_entropy(constant(np.zeros(3)), 1, np.ones(3))
        assert_allclose(float(loss.data), np.log(3.0))

    def test_class_weight_scales_loss(self):
        logits = constant(np.array([[0.2, -0.1], [1.0, 0.5]]))
        plain = float(weighted_cross_entropy(logits, [0, 1], np.ones(2)).data)
        doubled = float(weighted_cross_entropy(logits, [0, 1], 2.0 * np.ones(2)).data)
        assert_allclose(doubled, 2.0 * plain)

    def test_label_out_of_range(self):
        with self.assertRaises(LabelIndexError):
            weighted_cross_entropy(constant(np.zeros((1, 3))), [3], np.ones(3))

    def test_loss_gradients(self):
        for seed in range(20):
            rng = make_rng(seed, 'test', 'ce')
            logits = Value(rng.standard_normal((4, 3)))
            labels = rng.integers(0, 3, size=4)
            weights = 0.5 + rng.random(3)

            def f():
                return weighted_cross_entropy(logits, labels, weights)
            self.assertLess(finite_diff_check(f, [logits], eps=EPS), 1e-5)


class TestComposedNetwork(unittest.TestCase):
    """conv -> GRU -> pool -> dense -> weighted CE, with and without a reversal layer"""

    def _network(self, seed, lam):
        rng = make_rng(seed, 'test', 'net')
        x = Value(rng.standard_normal((2, 6, 3)))
        kernels = Value(0.1 * rng.standard_normal((4, 2, 3)))
        bias = Value(2.0 + rng.random(4))
        gru = GruParams.create(rng, 4, 3)
        W = Value(rng.standard_normal((3, 3)))
        b = Value(rng.standard_normal(3))
        labels = rng.integers(0, 3, size=2)
        weights = 0.5 + rng.random(3)

        def f():
            h = mean_pool_time(gru_sequence(conv1d(x, kernels, 2, bias), gru), [5, 3])
            if lam is not None:
                h = grl(h, lam)
            return weighted_cross_entropy(dense(h, W, b, 'identity'), labels, weights)
        return f, [x, kernels, bias, W, b] + gru.values()

    def test_gradients_without_reversal(self):
        for seed in range(20):
            f, params = self._network(seed, None)
            self.assertLess(finite_diff_check(f, params, eps=EPS), 1e-5)

    def test_reversal_flips_upstream_gradients(self):
        for seed in range(5):
            f_plain, params_plain = self._network(seed, None)
            backward(f_plain())
            plain = [p.grad.copy() for p in params_plain]
            f_rev, params_rev = self._network(seed, 0.75)
            backward(f_rev())
            # x, conv kernels, conv bias sit upstream of the reversal; the dense head does not
            for before, after in zip(plain[:3], params_rev[:3]):
                assert_allclose(after.grad, -0.75 * before, rtol=0, atol=1e-12)
            for before, after in zip(plain[3:5], params_rev[3:5]):
                assert_array_equal(after.grad, before)


class TestGrl(unittest.TestCase):

    def test_forward_is_identity(self):
        x = Value(np.array([[1.5, -2.0], [0.25, 3.0]]))
        assert_array_equal(grl(x, 0.5).data, x.data)

    def test_backward_scales_by_minus_lambda(self):
        for lam in (0.0, 0.3, 1.0):
            x = Value(np.array([1.0, -2.0, 3.0]))
            W = constant(np.array([[2.0, 1.0, -1.0]]))
            backward(dense(grl(x, lam), W, constant(np.zeros(1)), 'identity').sum())
            assert_allclose(x.grad, -lam * np.array([2.0, 1.0, -1.0]), rtol=0, atol=1e-12)

    def test_negative_lambda(self):
        with self.assertRaises(DomainError):
            grl(Value(np.ones(2)), -0.1)


def square(theta, slope=2.0):
    """theta^2 as a custom op; slope != 2 plants a wrong derivative"""
    out = node(theta.data ** 2, (theta,), 'square')

    def _backward(grad):
        theta.grad += slope * theta.data * grad
    out._backward = _backward
    return out.sum()


class TestFiniteDiffCheck(unittest.TestCase):

    def test_square_at_three(self):
        theta = Value([3.0])
        self.assertLess(finite_diff_check(lambda: square(theta), [theta]), 1e-8)
        assert_allclose(theta.grad, [6.0])
        assert_array_equal(theta.data, [3.0])

    def test_wrong_derivative_is_caught(self):
        theta = Value([3.0])
        self.assertGreater(finite_diff_check(lambda: square(theta, slope=3.0), [theta]), 0.3)

    def test_linear_function_is_exact(self):
        W, b = Value([[2.0, -1.0, 0.5]]), Value([0.3])
        x = constant([1.0, 4.0, -2.0])
        self.assertLess(finite_diff_check(lambda: dense(x, W, b, 'identity').sum(), [W, b]), 1e-9)


class TestGraph(unittest.TestCase):

    def test_non_scalar_loss(self):
        with self.assertRaises(GraphError):
            backward(Value(np.ones(3)))

    def test_fan_out_accumulates(self):
        x = Value(np.array([1.0, 2.0]))
        y = (x + x).sum()
        backward(y)
        assert_array_equal(x.grad, [2.0, 2.0])

    def test_backward_resets_gradients(self):
        x = Value(np.array([1.0, 2.0]))
        y = (x * 3.0).sum()
        backward(y)
        backward(y)
        assert_array_equal(x.grad, [3.0, 3.0])

    def test_concat_splits_gradient(self):
        a, b = Value(np.ones(2)), Value(np.ones(3))
        W = constant(np.arange(5.0)[None])
        backward(dense(concat([a, b]), W, constant(np.zeros(1)), 'identity').sum())
        assert_array_equal(a.grad, [0.0, 1.0])
        assert_array_equal(b.grad, [2.0, 3.0, 4.0])


if __name__ == '__main__':
    unittest.main()
