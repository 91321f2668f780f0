"""Layer primitives: forward oracles and gradient checks."""

import numpy as np
import pytest

from featsr.nn import (
    ConfigurationError,
    DimensionError,
    Tensor,
    activation,
    batch_norm,
    conv2d,
    cross_entropy,
    dense,
    finite_difference_check,
    kernels,
    leaky_relu,
    pixel_shuffle,
    prelu,
)
from featsr.nn.kernels import _pure


def t64(arr, grad=True):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=grad)


def rand64(shape, seed, grad=True):
    return t64(np.random.default_rng(seed).normal(size=shape), grad=grad)


# ---------------------------------------------------------------------------
# conv2d


def test_conv2d_scalar_scaling():
    # 1x1x3x3 ones, 1x1x1x1 weight [2], bias 0 -> all 2s
    x = t64(np.ones((1, 1, 3, 3)))
    w = t64(np.full((1, 1, 1, 1), 2.0))
    b = t64(np.zeros(1))
    out = conv2d(x, w, b)
    np.testing.assert_array_equal(out.data, np.full((1, 1, 3, 3), 2.0))


def test_conv2d_same_padding_shape():
    x = rand64((1, 64, 8, 8), 0)
    w = rand64((64, 64, 3, 3), 1)
    b = rand64((64,), 2)
    assert conv2d(x, w, b, stride=1, pad=1).data.shape == (1, 64, 8, 8)


def test_conv2d_parameter_count_3x3_64_64():
    # k^2 * Cin * Cout + Cout
    w = np.zeros((64, 64, 3, 3))
    b = np.zeros(64)
    assert w.size + b.size == 36_928


def test_conv2d_channel_mismatch_names_axis():
    x = t64(np.ones((1, 3, 4, 4)))
    w = t64(np.ones((2, 4, 3, 3)))
    b = t64(np.zeros(2))
    with pytest.raises(DimensionError, match="channel"):
        conv2d(x, w, b)


def test_conv2d_kernel_larger_than_input():
    with pytest.raises(DimensionError):
        conv2d(t64(np.ones((1, 1, 2, 2))), t64(np.ones((1, 1, 3, 3))), t64(np.zeros(1)))


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 0)])
def test_conv2d_gradients(stride, pad):
    x = rand64((2, 3, 5, 5), 10)
    w = rand64((4, 3, 3, 3), 11)
    b = rand64((4,), 12)
    err = finite_difference_check(lambda a, ww, bb: conv2d(a, ww, bb, stride, pad), [x, w, b])
    assert err < 1e-6


def test_conv_backends_agree():
    rng = np.random.default_rng(3)
    for dtype in (np.float32, np.float64):
        x = rng.normal(size=(2, 3, 7, 6)).astype(dtype)
        cols_active = kernels.im2col(x, 3, 2, 1)
        cols_pure = _pure.im2col(x, 3, 2, 1)
        np.testing.assert_array_equal(cols_active, cols_pure)
        g = rng.normal(size=cols_active.shape).astype(dtype)
        np.testing.assert_array_equal(
            kernels.col2im(g, x.shape, 3, 2, 1), _pure.col2im(g, x.shape, 3, 2, 1)
        )


# ---------------------------------------------------------------------------
# batch_norm


def _bn_state(c):
    return (
        t64(np.ones(c)),
        t64(np.zeros(c)),
        np.zeros(c, dtype=np.float64),
        np.ones(c, dtype=np.float64),
    )


def test_batch_norm_two_sample_oracle():
    # values {1, 3} normalize to {-1, +1} up to eps
    x = t64(np.array([1.0, 3.0]).reshape(2, 1, 1, 1))
    gamma, beta, rm, rv = _bn_state(1)
    out = batch_norm(x, gamma, beta, rm, rv, training=True)
    np.testing.assert_allclose(out.data.reshape(-1), [-1.0, 1.0], atol=1e-4)


def test_batch_norm_gamma_zero_annihilates():
    x = rand64((2, 3, 4, 4), 0)
    gamma = t64(np.zeros(3))
    beta = t64(np.full(3, 0.7))
    _, _, rm, rv = _bn_state(3)
    out = batch_norm(x, gamma, beta, rm, rv, training=True)
    np.testing.assert_allclose(out.data, 0.7, atol=1e-12)


def test_batch_norm_eval_identity_statistics():
    x = rand64((2, 3, 4, 4), 1)
    gamma, beta, rm, rv = _bn_state(3)
    out = batch_norm(x, gamma, beta, rm, rv, training=False)
    np.testing.assert_allclose(out.data, x.data, atol=1e-4)


def test_batch_norm_train_stats_near_standard():
    x = rand64((4, 3, 8, 8), 2)
    gamma, beta, rm, rv = _bn_state(3)
    out = batch_norm(x, gamma, beta, rm, rv, training=True)
    np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
    np.testing.assert_allclose(out.data.var(axis=(0, 2, 3)), 1.0, atol=1e-4)


def test_batch_norm_degenerate_single_sample():
    x = t64(np.ones((1, 3, 1, 1)))
    gamma, beta, rm, rv = _bn_state(3)
    with pytest.raises(ValueError, match="degenerate"):
        batch_norm(x, gamma, beta, rm, rv, training=True)


@pytest.mark.parametrize("training", [True, False])
def test_batch_norm_gradients(training):
    x = rand64((3, 2, 4, 4), 20)
    gamma = rand64((2,), 21)
    beta = rand64((2,), 22)
    rm = np.array([0.1, -0.2])
    rv = np.array([1.3, 0.8])

    def op(a, g, b):
        return batch_norm(a, g, b, rm.copy(), rv.copy(), training=training)

    assert finite_difference_check(op, [x, gamma, beta]) < 1e-6


# ---------------------------------------------------------------------------
# dense


def test_dense_identity_weight():
    x = rand64((2, 3), 0)
    w = t64(np.eye(3))
    b = t64(np.zeros(3))
    np.testing.assert_array_equal(dense(x, w, b).data, x.data)


def test_dense_hand_oracle():
    x = t64([[1.0, 2.0]])
    w = t64([[1.0, 0.0], [0.0, 1.0]])
    b = t64([1.0, 1.0])
    np.testing.assert_array_equal(dense(x, w, b).data, [[2.0, 3.0]])


def test_dense_zero_weight_broadcasts_bias():
    x = rand64((4, 3), 1)
    w = t64(np.zeros((3, 2)))
    b = t64([5.0, -1.0])
    np.testing.assert_array_equal(dense(x, w, b).data, np.tile([5.0, -1.0], (4, 1)))


def test_dense_mismatch_raises():
    with pytest.raises(DimensionError):
        dense(rand64((2, 3), 0), t64(np.zeros((4, 2))), t64(np.zeros(2)))


def test_dense_gradient_at_precision_floor():
    x = rand64((3, 4), 30)
    w = rand64((4, 2), 31)
    b = rand64((2,), 32)
    assert finite_difference_check(dense, [x, w, b]) < 1e-8


# ---------------------------------------------------------------------------
# pixel_shuffle


def test_pixel_shuffle_shape_law():
    x = rand64((1, 4, 2, 2), 0)
    assert pixel_shuffle(x, 2).data.shape == (1, 1, 4, 4)


def test_pixel_shuffle_index_formula():
    # channels [a,b,c,d] at one location -> 2x2 block [[a,b],[c,d]]
    x = t64(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1))
    out = pixel_shuffle(x, 2)
    np.testing.assert_array_equal(out.data[0, 0], [[1.0, 2.0], [3.0, 4.0]])


def test_pixel_shuffle_r1_identity():
    x = rand64((2, 3, 4, 4), 1)
    np.testing.assert_array_equal(pixel_shuffle(x, 1).data, x.data)


def test_pixel_shuffle_preserves_values():
    x = rand64((2, 8, 3, 3), 2)
    out = pixel_shuffle(x, 2)
    np.testing.assert_array_equal(np.sort(out.data.reshape(-1)), np.sort(x.data.reshape(-1)))


def test_pixel_shuffle_bad_channels():
    with pytest.raises(DimensionError):
        pixel_shuffle(rand64((1, 3, 2, 2), 0), 2)


def test_pixel_shuffle_gradient():
    x = rand64((2, 8, 3, 3), 40)
    assert finite_difference_check(lambda a: pixel_shuffle(a, 2), [x]) < 1e-8


# ---------------------------------------------------------------------------
# activations


def test_leaky_relu_alpha():
    x = t64([-2.0, 3.0])
    np.testing.assert_allclose(leaky_relu(x).data, [-0.4, 3.0])


def test_prelu_slope_gradient_oracle():
    # d(a*x)/da = x for x < 0; x = -3, upstream grad 1 -> -3
    x = t64(np.full((1, 1, 1, 1), -3.0), grad=False)
    slope = t64(np.array([0.25]))
    prelu(x, slope).sum().backward()
    np.testing.assert_allclose(slope.grad, [-3.0])


def test_prelu_gradients():
    x = rand64((2, 3, 4, 4), 50)
    slope = t64(np.array([0.1, 0.25, 0.5]))
    assert finite_difference_check(prelu, [x, slope]) < 1e-6


@pytest.mark.parametrize("kind", ["tanh", "sigmoid", "leaky_relu"])
def test_activation_dispatch(kind):
    x = rand64((2, 3), 60)
    assert activation(kind, x).data.shape == (2, 3)


def test_activation_unknown_kind():
    with pytest.raises(ConfigurationError):
        activation("swish", rand64((2, 2), 0))


# ---------------------------------------------------------------------------
# cross_entropy


def test_cross_entropy_uniform_logits():
    logits = t64(np.zeros((1, 4)))
    loss = cross_entropy(logits, np.array([2]))
    np.testing.assert_allclose(loss.data, np.log(4.0), rtol=1e-12)


def test_cross_entropy_confident_correct():
    logits = t64(np.array([[50.0, 0.0, 0.0]]))
    assert float(cross_entropy(logits, np.array([0])).data) < 1e-6


def test_cross_entropy_averages_over_batch():
    l1 = t64(np.array([[1.0, 2.0]]))
    l2 = t64(np.array([[0.5, -1.0]]))
    both = t64(np.vstack([l1.data, l2.data]))
    a = float(cross_entropy(l1, np.array([0])).data)
    b = float(cross_entropy(l2, np.array([1])).data)
    c = float(cross_entropy(both, np.array([0, 1])).data)
    np.testing.assert_allclose(c, (a + b) / 2, rtol=1e-12)


def test_cross_entropy_label_out_of_range():
    with pytest.raises((IndexError, ValueError)):
        cross_entropy(t64(np.zeros((1, 3))), np.array([3]))


def test_cross_entropy_gradient():
    logits = rand64((4, 5), 70)
    labels = np.array([0, 2, 4, 1])
    assert finite_difference_check(lambda l: cross_entropy(l, labels), [logits]) < 1e-6
