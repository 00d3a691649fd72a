#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for tensor_core: analytic gradients against central differences,
graph mechanics and the optimizer.
"""

import numpy as np
import pytest

from errors import ConfigError, DimensionError, NonFiniteError
from tensor_core import (
    SGD, StepDecay, Tensor, bilinear_resize, channel_stats, check_gradients, concat, conv2d, default_dtype,
    get_default_dtype, maxpool2x2, no_grad, ops, relu, reshape, sigmoid, smooth_l1, softmax_cross_entropy,
    transpose,
)
from tensor_core.ops import interpolation_matrix

TOLERANCE = 1e-4
INSTANCES = 10


def _away_from(values: np.ndarray, points, margin: float = 0.05) -> np.ndarray:
    """Push values off the kinks of piecewise ops"""
    for p in points:
        close = np.abs(values - p) < margin
        values[close] += 2 * margin
    return values


@pytest.mark.parametrize('stride,pad', [(1, 1), (1, 0), (2, 1)])
def test_conv2d_gradients(rng, stride, pad):
    for _ in range(INSTANCES):
        x = rng.standard_normal((2, 3, 5, 5))
        k = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        err = check_gradients(lambda x, k, b: conv2d(x, k, b, stride=stride, pad=pad), [x, k, b])
        assert err < TOLERANCE


def test_conv2d_matches_direct_loop(rng):
    x = rng.standard_normal((1, 2, 4, 4))
    k = rng.standard_normal((3, 2, 3, 3))
    out = conv2d(Tensor(x), Tensor(k), pad=1).data
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    expected = np.zeros((1, 3, 4, 4))
    for o in range(3):
        for i in range(4):
            for j in range(4):
                expected[0, o, i, j] = (padded[0, :, i:i + 3, j:j + 3] * k[o]).sum()
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(DimensionError):
        conv2d(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((2, 4, 3, 3))))


def test_conv2d_identity_kernel_returns_input(rng):
    x = rng.standard_normal((2, 3, 5, 5))
    kernel = np.eye(3).reshape(3, 3, 1, 1)
    np.testing.assert_array_equal(conv2d(Tensor(x), Tensor(kernel)).data, x)


def test_maxpool_gradients_odd_size(rng):
    for _ in range(INSTANCES):
        # distinct values keep the argmax stable under the finite-difference step
        x = rng.permutation(2 * 3 * 5 * 5).reshape(2, 3, 5, 5) * 0.01
        assert check_gradients(maxpool2x2, [x]) < TOLERANCE


def test_maxpool_drops_trailing_rows():
    x = np.arange(25, dtype=np.float64).reshape(1, 1, 5, 5)
    out = maxpool2x2(Tensor(x)).data
    np.testing.assert_array_equal(out[0, 0], [[6, 8], [16, 18]])


@pytest.mark.parametrize('out_size', [(6, 5), (2, 3), (4, 4)])
def test_bilinear_resize_gradients(rng, out_size):
    for _ in range(INSTANCES):
        x = rng.standard_normal((2, 3, 4, 4))
        assert check_gradients(lambda x: bilinear_resize(x, *out_size), [x]) < TOLERANCE


def test_bilinear_resize_identity_and_constant():
    np.testing.assert_array_equal(interpolation_matrix(5, 5), np.eye(5))
    constant = np.full((1, 2, 2, 2), 3.0)
    out = bilinear_resize(Tensor(constant), 4, 4).data
    np.testing.assert_allclose(out, 3.0, rtol=0, atol=1e-12)


def test_bilinear_resize_upsamples_half_pixel_centers():
    out = bilinear_resize(Tensor(np.array([[[[0.0, 2.0]]]])), 1, 4).data
    np.testing.assert_allclose(out[0, 0, 0], [0.0, 0.5, 1.5, 2.0], rtol=0, atol=1e-12)


def test_elementwise_gradients(rng):
    for _ in range(INSTANCES):
        x = _away_from(rng.standard_normal((3, 4)), [0.0])
        y = rng.uniform(0.5, 2.0, (3, 4))
        assert check_gradients(relu, [x]) < TOLERANCE
        assert check_gradients(sigmoid, [x]) < TOLERANCE
        assert check_gradients(lambda a, b: ops.div(ops.mul(a, b), b + a * a), [x, y]) < TOLERANCE
        assert check_gradients(lambda a: ops.mean(ops.square(a), axis=1), [x]) < TOLERANCE


def test_shape_op_gradients(rng):
    x = rng.standard_normal((2, 3, 4))
    y = rng.standard_normal((2, 5, 4))
    assert check_gradients(lambda a: transpose(reshape(a, (6, 4)), (1, 0)), [x]) < TOLERANCE
    assert check_gradients(lambda a, b: concat([a, b], axis=1), [x, y]) < TOLERANCE


def test_smooth_l1_gradients(rng):
    for _ in range(INSTANCES):
        pred = rng.standard_normal((5, 4)) * 2
        target = rng.standard_normal((5, 4)) * 2
        diff = _away_from(pred - target, [-1.0, 1.0])
        assert check_gradients(lambda p, t: smooth_l1(p, t), [target + diff, target]) < TOLERANCE


def test_smooth_l1_values():
    out = smooth_l1(Tensor(np.array([0.2, 3.0, -2.0])), np.zeros(3)).data
    np.testing.assert_allclose(out, [0.5 * 0.04, 2.5, 1.5])


def test_softmax_cross_entropy_gradients(rng):
    for _ in range(INSTANCES):
        logits = rng.standard_normal((6, 3))
        labels = rng.integers(0, 3, 6)
        assert check_gradients(lambda z: softmax_cross_entropy(z, labels), [logits]) < TOLERANCE


def test_softmax_cross_entropy_uniform_logits():
    out = softmax_cross_entropy(Tensor(np.zeros((2, 3))), [0, 2]).data
    np.testing.assert_allclose(out, np.log(3.0))


@pytest.mark.parametrize('mode', ['mean', 'variance'])
def test_channel_stats_gradients(rng, mode):
    for _ in range(INSTANCES):
        x = rng.standard_normal((2, 4, 3, 3))
        assert check_gradients(lambda f: channel_stats(f, mode), [x]) < TOLERANCE


def test_channel_stats_unknown_mode():
    with pytest.raises(ConfigError):
        channel_stats(Tensor(np.ones((1, 2, 2, 2))), 'median')


def test_backward_accumulates_reused_inputs():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    y = ops.sum(x * x + x)
    y.backward()
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_no_grad_disables_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad
    assert (x * 2.0).requires_grad


def test_op_outputs_are_read_only():
    y = Tensor(np.ones(3)) + 1.0
    with pytest.raises(ValueError):
        y.data[0] = 5.0


def test_default_dtype_context():
    assert Tensor([1.0]).dtype == np.float32
    with default_dtype(np.float64):
        assert get_default_dtype() == np.float64
        assert Tensor([1.0]).dtype == np.float64
    assert get_default_dtype() == np.float32


def test_finite_check(monkeypatch):
    monkeypatch.setenv('HGD_CHECK_FINITE', '1')
    with np.errstate(divide='ignore'):
        with pytest.raises(NonFiniteError):
            ops.div(Tensor(np.array([1.0])), Tensor(np.array([0.0])))


def test_item_requires_single_element():
    with pytest.raises(DimensionError):
        Tensor(np.ones(2)).item()


def test_sgd_replaces_parameter_arrays():
    w = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    optimizer = SGD({'w': w}, momentum=0.9, weight_decay=0.0)
    before = w.data
    for _ in range(3):
        optimizer.zero_grad()
        ops.sum(ops.square(w)).backward()
        optimizer.step(0.1)
    np.testing.assert_array_equal(before, [1.0, -1.0])
    assert np.all(np.abs(w.data) < 1.0)


def test_sgd_skips_parameters_without_gradient():
    w = Tensor(np.array([2.0]), requires_grad=True)
    SGD({'w': w}, weight_decay=0.5).step(0.1)
    np.testing.assert_array_equal(w.data, [2.0])


def test_step_decay():
    schedule = StepDecay(0.1, 0.1, [2, 4])
    assert [schedule.lr_at(e) for e in range(5)] == pytest.approx([0.1, 0.1, 0.01, 0.01, 0.001])
    with pytest.raises(ConfigError):
        StepDecay(0.1, 0.1, [3, 3])
