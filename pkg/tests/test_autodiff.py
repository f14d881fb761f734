"""Tape and dual-number mechanics, checked against finite differences."""

import numpy as np
import pytest

from rvpinn.autodiff import (
    Dual,
    Tape,
    Var,
    dot,
    dual_linear,
    dual_tanh,
    linear,
    matvec,
    reshape,
    tanh,
)

RNG = np.random.default_rng(1234)


def fd_grad(fn, x, step=1e-6):
    """Central-difference gradient of a scalar fn of one flat array."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    flat = x.ravel()
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += step
        dn[i] -= step
        grad.ravel()[i] = (fn(up.reshape(x.shape)) - fn(dn.reshape(x.shape))) / (2 * step)
    return grad


def taped_grad(build, x):
    tape = Tape()
    leaf = tape.leaf(x)
    out = build(leaf)
    tape.backward(out)
    return np.zeros(np.shape(x)) if leaf.grad is None else np.asarray(leaf.grad)


@pytest.mark.parametrize(
    "build",
    [
        lambda v: dot(v, v),
        lambda v: dot(v + v, 2.0 * v - 1.5),
        lambda v: dot(tanh(v), np.arange(1.0, 5.0)),
        lambda v: dot(v * v * v, np.ones(4)),
        lambda v: dot(1.0 - v, v * np.array([1.0, -2.0, 3.0, 0.5])),
        lambda v: dot(-v, tanh(v)),
    ],
)
def test_elementwise_ops_match_finite_differences(build):
    x = RNG.normal(size=4)
    analytic = taped_grad(build, x)
    numeric = fd_grad(lambda z: _scalar(build, z), x)
    assert np.allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


def _scalar(build, x):
    tape = Tape()
    out = build(tape.leaf(x))
    return float(out.value)


def test_linear_gradients_for_all_operands():
    x = RNG.normal(size=(3, 2))
    w = RNG.normal(size=(4, 2))
    b = RNG.normal(size=4)
    coeff = RNG.normal(size=(3, 4))

    def full(xv, wv, bv):
        return float(np.sum(coeff * (xv @ wv.T + bv)))

    tape = Tape()
    lx, lw, lb = tape.leaf(x), tape.leaf(w), tape.leaf(b)
    out = dot(reshape(linear(lx, lw, lb), (12,)), coeff.ravel())
    tape.backward(out)

    assert np.allclose(lx.grad, fd_grad(lambda z: full(z, w, b), x), rtol=1e-6)
    assert np.allclose(lw.grad, fd_grad(lambda z: full(x, z, b), w), rtol=1e-6)
    assert np.allclose(lb.grad, fd_grad(lambda z: full(x, w, z), b), rtol=1e-6)


def test_linear_with_constant_input():
    x = RNG.normal(size=(5, 3))
    w = RNG.normal(size=(2, 3))
    tape = Tape()
    lw = tape.leaf(w)
    out = dot(reshape(linear(x, lw), (10,)), np.ones(10))
    tape.backward(out)
    expected = fd_grad(lambda z: float(np.sum(x @ z.T)), w)
    assert np.allclose(lw.grad, expected, rtol=1e-6)


def test_matvec_backward():
    mat = RNG.normal(size=(3, 5))
    v = RNG.normal(size=5)
    tape = Tape()
    lv = tape.leaf(v)
    out = dot(matvec(mat, lv), np.array([1.0, -1.0, 2.0]))
    tape.backward(out)
    expected = mat.T @ np.array([1.0, -1.0, 2.0])
    assert np.allclose(lv.grad, expected, rtol=0, atol=1e-14)


def test_constant_pipeline_leaves_grad_none():
    tape = Tape()
    leaf = tape.leaf(np.ones(3))
    other = tape.leaf(np.ones(3))
    out = dot(other, other)
    tape.backward(out)
    assert leaf.grad is None
    assert np.allclose(other.grad, 2.0 * np.ones(3))


def test_backward_requires_scalar_root():
    tape = Tape()
    leaf = tape.leaf(np.ones(3))
    with pytest.raises(ValueError):
        tape.backward(leaf + 1.0)


def test_ndarray_minus_var_uses_reflected_op():
    tape = Tape()
    leaf = tape.leaf(np.array([1.0, 2.0]))
    out = np.array([5.0, 5.0]) - leaf
    assert isinstance(out, Var)
    assert np.allclose(out.value, [4.0, 3.0])
    final = dot(out, np.ones(2))
    tape.backward(final)
    assert np.allclose(leaf.grad, [-1.0, -1.0])


def test_broadcast_bias_gradient_sums_over_rows():
    tape = Tape()
    b = tape.leaf(np.array([1.0, 2.0]))
    z = np.ones((4, 2)) + b
    out = dot(reshape(z, (8,)), np.ones(8))
    tape.backward(out)
    assert np.allclose(b.grad, [4.0, 4.0])


def test_dual_tanh_chain_rule():
    # dx_out must equal (1 - value_out^2) * dx_in
    value = np.array([0.3, -1.2, 0.0])
    dx = np.array([2.0, 0.5, -1.0])
    out = dual_tanh(Dual(value, dx))
    t = np.tanh(value)
    assert np.allclose(out.value, t)
    assert np.allclose(out.dx, (1.0 - t * t) * dx)


def test_dual_tanh_taped_matches_plain():
    value = RNG.normal(size=(4, 3))
    dx = RNG.normal(size=(4, 3))
    plain = dual_tanh(Dual(value, dx))
    tape = Tape()
    taped = dual_tanh(Dual(tape.leaf(value), tape.leaf(dx)))
    assert np.allclose(taped.value.value, plain.value)
    assert np.allclose(taped.dx.value, plain.dx)


def test_dual_tanh_taped_backward_matches_fd():
    value = RNG.normal(size=3)
    dx = RNG.normal(size=3)
    weights = np.array([1.0, -2.0, 0.5])

    def scalar(v):
        out = dual_tanh(Dual(v, dx))
        return float(np.dot(weights, out.dx))

    tape = Tape()
    leaf = tape.leaf(value)
    out = dual_tanh(Dual(leaf, dx))
    tape.backward(dot(weights, out.dx))
    assert np.allclose(leaf.grad, fd_grad(scalar, value), rtol=1e-6, atol=1e-9)


def test_dual_product_rule():
    a = Dual(np.array([2.0]), np.array([3.0]))
    b = Dual(np.array([5.0]), np.array([-1.0]))
    out = a * b
    assert np.allclose(out.value, [10.0])
    assert np.allclose(out.dx, [2.0 * -1.0 + 3.0 * 5.0])


def test_dual_linear_applies_weights_to_both_channels():
    w = RNG.normal(size=(3, 2))
    b = RNG.normal(size=3)
    z = Dual(RNG.normal(size=(5, 2)), RNG.normal(size=(5, 2)))
    out = dual_linear(z, w, b)
    assert np.allclose(out.value, z.value @ w.T + b)
    # bias is constant in x, so it drops from the derivative channel
    assert np.allclose(out.dx, z.dx @ w.T)
