import numpy as np
import pytest

from src.models.network import LossKind, Mode
from src.services.cnn_layers import (
    BN_EPS,
    batchnorm_forward,
    conv1d_backward,
    conv1d_forward,
    fc_forward,
    global_avg_pool,
    loss,
    loss_grad_logits,
    relu,
    softmax,
)
from src.utils.errors import ShapeError


def _bn_params(channels, gamma=1.0, beta=0.0):
    return {
        "gamma": np.full(channels, gamma),
        "beta": np.full(channels, beta),
        "running_mean": np.zeros(channels),
        "running_var": np.ones(channels),
    }


def _conv_reference(x, weight, bias):
    out_ch, in_ch, K = weight.shape
    L = x.shape[1]
    out = np.zeros((out_ch, L))
    for o in range(out_ch):
        for t in range(L):
            acc = bias[o]
            for i in range(in_ch):
                for tau in range(K):
                    if t - tau >= 0:
                        acc += weight[o, i, tau] * x[i, t - tau]
            out[o, t] = acc
    return out


class TestConv1d:

    def test_unit_kernel_is_identity(self, rng):
        x = rng.normal(size=(1, 20))
        out = conv1d_forward(x, np.ones((1, 1, 1)), np.zeros(1))
        np.testing.assert_array_equal(out, x)

    def test_difference_kernel(self):
        out = conv1d_forward(np.array([[1.0, 2.0, 3.0]]), np.array([[[1.0, -1.0]]]), np.zeros(1))
        np.testing.assert_allclose(out, [[1.0, 1.0, 1.0]])

    def test_matches_nested_loops(self, rng):
        x = rng.normal(size=(4, 32))
        weight = rng.normal(size=(3, 4, 5))
        bias = rng.normal(size=3)
        np.testing.assert_allclose(conv1d_forward(x, weight, bias), _conv_reference(x, weight, bias),
                                   rtol=0, atol=1e-12)

    def test_kernel_longer_than_signal(self, rng):
        x = rng.normal(size=(2, 3))
        weight = rng.normal(size=(2, 2, 6))
        bias = np.zeros(2)
        np.testing.assert_allclose(conv1d_forward(x, weight, bias), _conv_reference(x, weight, bias), atol=1e-12)

    def test_causal(self, rng):
        x = rng.normal(size=(2, 16))
        weight = rng.normal(size=(3, 2, 4))
        changed = x.copy()
        changed[:, 10:] += 1.0
        a = conv1d_forward(x, weight, np.zeros(3))
        b = conv1d_forward(changed, weight, np.zeros(3))
        np.testing.assert_array_equal(a[:, :10], b[:, :10])

    def test_backward_matches_adjoint(self, rng):
        x = rng.normal(size=(2, 12))
        weight = rng.normal(size=(3, 2, 4))
        dout = rng.normal(size=(3, 12))
        dx, dweight, dbias = conv1d_backward(dout, x, weight)
        h = 1e-6
        for idx in [(0, 0), (1, 5), (0, 11)]:
            step = np.zeros_like(x)
            step[idx] = h
            numeric = np.sum(dout * (conv1d_forward(x + step, weight, np.zeros(3))
                                     - conv1d_forward(x - step, weight, np.zeros(3)))) / (2 * h)
            assert dx[idx] == pytest.approx(numeric, rel=1e-6)
        for idx in [(0, 0, 0), (2, 1, 3)]:
            step = np.zeros_like(weight)
            step[idx] = h
            numeric = np.sum(dout * (conv1d_forward(x, weight + step, np.zeros(3))
                                     - conv1d_forward(x, weight - step, np.zeros(3)))) / (2 * h)
            assert dweight[idx] == pytest.approx(numeric, rel=1e-6)
        np.testing.assert_allclose(dbias, dout.sum(axis=1))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            conv1d_forward(np.zeros((2, 8)), np.zeros((1, 3, 2)), np.zeros(1))
        with pytest.raises(ShapeError):
            conv1d_forward(np.zeros((2, 8)), np.zeros((1, 2, 2)), np.zeros(2))


class TestRelu:

    def test_clips_negatives(self):
        np.testing.assert_array_equal(relu(np.array([[-1.0, 0.0, 2.5]])), [[0.0, 0.0, 2.5]])


class TestBatchNorm:

    def test_train_mode_normalizes(self, rng):
        x = rng.normal(3.0, 2.0, size=(3, 64))
        out, cache = batchnorm_forward(x, _bn_params(3, gamma=2.0, beta=0.5), Mode.TRAIN)
        np.testing.assert_allclose(out.mean(axis=1), 0.5, atol=1e-12)
        expected_std = 2.0 * np.sqrt(x.var(axis=1) / (x.var(axis=1) + BN_EPS))
        np.testing.assert_allclose(out.std(axis=1), expected_std, rtol=1e-10)

    def test_constant_channel_maps_to_shift(self):
        out, _ = batchnorm_forward(np.full((1, 10), 7.0), _bn_params(1, gamma=3.0, beta=-0.25), Mode.TRAIN)
        np.testing.assert_allclose(out, -0.25, atol=1e-12)

    def test_running_statistics_travel_in_cache(self, rng):
        x = rng.normal(1.0, 1.5, size=(2, 20))
        params = _bn_params(2)
        _, cache = batchnorm_forward(x, params, Mode.TRAIN, momentum=0.1)
        np.testing.assert_allclose(cache["running_mean"], 0.1 * x.mean(axis=1))
        np.testing.assert_allclose(cache["running_var"], 0.9 + 0.1 * x.var(axis=1, ddof=1))
        np.testing.assert_array_equal(params["running_mean"], 0.0)
        np.testing.assert_array_equal(params["running_var"], 1.0)

    def test_infer_mode_uses_running_statistics(self, rng):
        x = rng.normal(size=(2, 8))
        params = _bn_params(2, gamma=1.5, beta=0.2)
        params["running_mean"] = np.array([0.3, -0.4])
        params["running_var"] = np.array([2.0, 0.5])
        out, _ = batchnorm_forward(x, params, Mode.INFER)
        expected = 1.5 * (x - params["running_mean"][:, None]) / np.sqrt(params["running_var"][:, None] + BN_EPS) + 0.2
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_train_mode_needs_two_samples(self):
        with pytest.raises(ShapeError):
            batchnorm_forward(np.ones((1, 1)), _bn_params(1), Mode.TRAIN)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            batchnorm_forward(np.ones((3, 5)), _bn_params(2), Mode.INFER)


class TestPoolingAndFc:

    def test_global_average_pool(self):
        np.testing.assert_allclose(global_avg_pool(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 6.0]])), [2.0, 2.0])

    def test_fc(self):
        out = fc_forward(np.array([1.0, 2.0]), np.array([[1.0, 0.0], [0.5, -1.0], [0.0, 0.0]]), np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(out, [1.0, -0.5, 2.0])

    def test_fc_shape_mismatch(self):
        with pytest.raises(ShapeError):
            fc_forward(np.ones(3), np.ones((2, 2)), np.zeros(2))


class TestSoftmaxAndLoss:

    def test_uniform_logits(self):
        np.testing.assert_allclose(softmax(np.zeros(4)), 0.25)

    def test_large_logits_do_not_overflow(self):
        probs = softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(probs))
        assert probs[0] == pytest.approx(1.0)

    def test_shift_invariant(self, rng):
        z = rng.normal(size=5)
        np.testing.assert_allclose(softmax(z + 37.0), softmax(z), rtol=1e-12)
        assert softmax(z).sum() == pytest.approx(1.0)

    def test_cross_entropy(self):
        assert loss(np.array([0.0, 1.0, 0.0]), np.array([0.0, 1.0, 0.0])) == 0.0
        assert loss(np.full(3, 1 / 3), np.array([1.0, 0.0, 0.0])) == pytest.approx(np.log(3))

    def test_cross_entropy_is_clamped(self):
        assert loss(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(-np.log(1e-15))

    def test_squared_error(self):
        target = np.array([0.0, 0.0, 1.0])
        assert loss(target, target, LossKind.MSE) == 0.0
        assert loss(np.full(3, 1 / 3), target, LossKind.MSE) == pytest.approx(2 / 3)

    @pytest.mark.parametrize("kind", list(LossKind))
    def test_gradient_through_softmax(self, rng, kind):
        z = rng.normal(size=4)
        target = np.array([0.0, 0.0, 1.0, 0.0])
        analytic = loss_grad_logits(softmax(z), target, kind)
        h = 1e-6
        for j in range(4):
            step = np.zeros(4)
            step[j] = h
            numeric = (loss(softmax(z + step), target, kind) - loss(softmax(z - step), target, kind)) / (2 * h)
            assert analytic[j] == pytest.approx(numeric, rel=1e-6, abs=1e-9)
