"""Tape autodiff: primitive correctness, stability and the FD checker."""

import numpy as np
import pytest
from scipy import special

from bbalpha import autodiff as ad
from bbalpha.errors import NonFiniteIntermediate


def test_ops_work_on_plain_arrays():
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(ad.exp(x), np.exp(x))
    assert np.allclose(ad.logsumexp(x), special.logsumexp(x))
    assert np.allclose(ad.dot(x, x), x @ x)
    assert ad.relu(-1.0) == 0.0


def test_arithmetic_gradients():
    rng = np.random.default_rng(0)

    def f(a, b):
        return ad.asum(a * b + a / (b + 3.0) - 2.0 * a ** 2)

    rep = ad.check_gradient(f, [rng.normal(size=5), rng.normal(size=5)])
    assert rep.passed, rep


def test_numpy_left_operand_defers_to_var():
    # ndarray - Var must hit Var.__rsub__, not produce an object array
    def f(a):
        return ad.asum(np.ones(3) - a + np.full(3, 2.0) * a)

    val, grads = ad.value_and_grad(f, [np.array([1.0, 2.0, 3.0])])
    assert np.allclose(grads[0], 1.0)


def test_unary_gradients():
    rng = np.random.default_rng(1)

    def f(a):
        return ad.asum(ad.log(ad.exp(a) + 1.0) + ad.sqrt(a * a + 1.0))

    rep = ad.check_gradient(f, [rng.normal(size=7)])
    assert rep.passed, rep


def test_relu_subgradient_zero_at_kink():
    grads = ad.gradient(lambda a: ad.asum(ad.relu(a)), [np.array([0.0, -1.0, 2.0])])
    assert np.allclose(grads[0], [0.0, 0.0, 1.0])


def test_logsumexp_is_shift_stable():
    big = np.array([1000.0, 1000.0])
    assert np.isfinite(ad.logsumexp(big))

    def f(a):
        return ad.logsumexp(a)

    _, grads = ad.value_and_grad(f, [big])
    assert np.allclose(grads[0], [0.5, 0.5])


def test_logsumexp_axis_gradient():
    rng = np.random.default_rng(2)

    def f(a):
        return ad.asum(ad.logsumexp(a, axis=0)) + ad.asum(ad.logsumexp(a, axis=1))

    rep = ad.check_gradient(f, [rng.normal(size=(4, 3))])
    assert rep.passed, rep


def test_log_norm_cdf_deep_tail():
    z = np.array([-40.0])
    assert np.isfinite(ad.log_norm_cdf(z)[0])
    _, grads = ad.value_and_grad(lambda a: ad.asum(ad.log_norm_cdf(a)), [z])
    # d/dz log Phi(z) ~ -z for z << 0
    assert np.isfinite(grads[0][0])
    assert abs(grads[0][0] - 40.0) < 0.1


def test_log_norm_cdf_gradient():
    rng = np.random.default_rng(3)
    rep = ad.check_gradient(lambda a: ad.asum(ad.log_norm_cdf(a)),
                            [rng.normal(size=6) * 2.0])
    assert rep.passed, rep


@pytest.mark.parametrize("sa,sb", [((4,), (4,)), ((3, 4), (4,)),
                                   ((4,), (4, 3)), ((3, 4), (4, 2))])
def test_dot_gradients_all_rank_combos(sa, sb):
    rng = np.random.default_rng(4)

    def f(a, b):
        return ad.asum(ad.dot(a, b))

    rep = ad.check_gradient(f, [rng.normal(size=sa), rng.normal(size=sb)])
    assert rep.passed, rep


def test_bmm_gradient_with_broadcast():
    rng = np.random.default_rng(5)

    def f(a, b):
        return ad.asum(ad.bmm(a, b))

    rep = ad.check_gradient(f, [rng.normal(size=(3, 2, 4)),
                                rng.normal(size=(4, 5))])
    assert rep.passed, rep


def test_take_accumulates_duplicate_indices():
    idx = np.array([0, 0, 2])
    grads = ad.gradient(lambda a: ad.asum(a[idx]), [np.arange(4.0)])
    assert np.allclose(grads[0], [2.0, 0.0, 1.0, 0.0])


def test_reshape_stack_concat_gradients():
    rng = np.random.default_rng(6)

    def f(a, b):
        m = ad.reshape(a, (2, 3))
        s = ad.stack([b, b * 2.0])
        return ad.asum(m) + ad.asum(s) + ad.asum(ad.concat([a, b]))

    rep = ad.check_gradient(f, [rng.normal(size=6), rng.normal(size=3)])
    assert rep.passed, rep


def test_broadcasting_gradient_unbroadcasts():
    def f(a, b):
        return ad.asum(a * b)  # a is (1,), b is (4,)

    _, grads = ad.value_and_grad(f, [np.array([2.0]), np.arange(4.0)])
    assert grads[0].shape == (1,)
    assert np.allclose(grads[0], np.arange(4.0).sum())


def test_value_and_grad_constant_expression():
    val, grads = ad.value_and_grad(lambda a: 3.5, [np.zeros(2)])
    assert val == 3.5
    assert np.allclose(grads[0], 0.0)


def test_nonfinite_intermediate_raises_with_op_name():
    with pytest.raises(NonFiniteIntermediate) as e:
        ad.value_and_grad(lambda a: ad.asum(ad.log(a)), [np.array([-1.0])])
    assert "log" in str(e.value)


def test_check_gradient_report_fields():
    rep = ad.check_gradient(lambda a: ad.asum(a * a), [np.array([1.0, -2.0])])
    assert rep.passed
    assert rep.max_rel_err < 1e-5
    assert rep.worst_slot == 0
    assert len(rep.errors) == 1


def test_check_gradient_catches_wrong_gradient():
    # power() with a deliberately perturbed closure is hard to fake; instead
    # check the checker flags a function whose taped path differs from its
    # numeric value path via a non-differentiable trick
    def f(a):
        return ad.asum(a * ad._val(a))  # treats one factor as a constant

    rep = ad.check_gradient(f, [np.array([1.0, 2.0])])
    assert not rep.passed


def test_repeated_use_of_node_accumulates():
    def f(a):
        h = a * 2.0
        return ad.asum(h * h + h)

    rep = ad.check_gradient(f, [np.array([0.3, -1.2])])
    assert rep.passed, rep
