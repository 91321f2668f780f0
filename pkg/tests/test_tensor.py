"""Autodiff core: elementwise ops, reductions, broadcasting, backward."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featsr.nn import Tensor, finite_difference_check


def t(arr, grad=True):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=grad)


def test_add_backward_accumulates():
    a = t([1.0, 2.0])
    b = t([3.0, 4.0])
    (a + b).sum().backward()
    np.testing.assert_array_equal(a.grad, [1.0, 1.0])
    np.testing.assert_array_equal(b.grad, [1.0, 1.0])


def test_reuse_of_node_sums_gradients():
    a = t([2.0])
    y = a * a + a  # dy/da = 2a + 1 = 5
    y.sum().backward()
    np.testing.assert_allclose(a.grad, [5.0])


def test_broadcast_grad_is_reduced():
    a = t(np.ones((2, 3)))
    b = t(np.ones((3,)))
    (a * b).sum().backward()
    assert b.grad.shape == (3,)
    np.testing.assert_array_equal(b.grad, [2.0, 2.0, 2.0])


def test_mean_gradient():
    a = t(np.arange(4.0))
    a.mean().backward()
    np.testing.assert_allclose(a.grad, np.full(4, 0.25))


def test_detach_blocks_gradient():
    a = t([1.0, 2.0])
    y = (a.detach() * 3.0).sum()
    y.backward()
    assert a.grad is None


def test_no_grad_tensor_untouched():
    a = t([1.0], grad=False)
    b = t([2.0])
    (a * b).sum().backward()
    assert a.grad is None
    assert b.grad is not None


def test_tanh_codomain_and_grad():
    x = t(np.linspace(-5, 5, 11))
    y = x.tanh()
    assert np.all(np.abs(y.data) < 1.0)
    err = finite_difference_check(lambda a: a.tanh(), [t(np.random.default_rng(0).normal(size=(3, 4)))])
    assert err < 1e-6


@pytest.mark.parametrize(
    "op",
    [
        lambda a: a.sigmoid(),
        lambda a: a.square(),
        lambda a: (a * 0.3 + 1.7).log(),  # shifted to stay positive-ish
        lambda a: a.mean(),
        lambda a: a.reshape((4, 3)),
        lambda a: a * a,
        lambda a: a - 2.0 * a,
    ],
)
def test_elementwise_gradients(op):
    rng = np.random.default_rng(7)
    x = t(rng.uniform(0.5, 2.0, size=(3, 4)))
    assert finite_difference_check(op, [x]) < 1e-6


def test_clamp_gradient_masks_boundaries():
    x = t([-2.0, 0.0, 2.0])
    y = x.clamp(-1.0, 1.0)
    y.sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_unbroadcastable_shapes_raise():
    with pytest.raises(ValueError):
        t(np.ones((2, 3))) + t(np.ones((4, 5)))


def test_non_finite_construction_rejected():
    with pytest.raises(ValueError):
        Tensor(np.array([1.0, np.nan]))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_sum_grad_is_ones(n, m, seed):
    x = t(np.random.default_rng(seed).normal(size=(n, m)))
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((n, m)))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_mul_commutes_in_value_and_grad(seed):
    rng = np.random.default_rng(seed)
    av, bv = rng.normal(size=4), rng.normal(size=4)
    a1, b1 = t(av), t(bv)
    (a1 * b1).sum().backward()
    a2, b2 = t(av), t(bv)
    (b2 * a2).sum().backward()
    np.testing.assert_array_equal(a1.grad, a2.grad)
    np.testing.assert_array_equal(b1.grad, b2.grad)
