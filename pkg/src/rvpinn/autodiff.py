"""Reverse-mode automatic differentiation over numpy arrays.

The tape records array-valued operations in creation order; a single reverse
sweep then accumulates gradients with respect to every leaf. Spatial
derivatives of the network are carried alongside values as dual-number pairs
(`Dual`), so differentiating a loss that contains du/dx terms automatically
produces the mixed second derivatives d2u/(dx dtheta) through the same tape.
"""

from __future__ import annotations

from typing import Callable, Optional, Union

import numpy as np

ArrayLike = Union[np.ndarray, float]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> ArrayLike:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if shape == ():
        return float(np.sum(grad))
    extra = np.ndim(grad) - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Var:
    """A value recorded on a tape. `grad` is filled by `Tape.backward`."""

    __slots__ = ("tape", "value", "grad", "_backward")

    # make `ndarray <op> Var` defer to Var's reflected operators instead of
    # numpy coercing the Var into an object array
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", value: ArrayLike, backward: Optional[Callable] = None):
        self.tape = tape
        self.value = value
        self.grad: Optional[ArrayLike] = None
        self._backward = backward

    @property
    def shape(self):
        return np.shape(self.value)

    def _accum(self, g: ArrayLike) -> None:
        # first contribution is stored by reference (ops never mutate
        # gradients in place, they rebind), later ones rebind to a fresh sum
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    # arithmetic builds new tape entries; the other operand may be a plain
    # ndarray/float constant, which stays off the tape
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def tanh(self):
        return tanh(self)

    def reshape(self, shape):
        return reshape(self, shape)


class Tape:
    """Operation recorder. One forward build, one `backward` sweep."""

    __slots__ = ("_entries",)

    def __init__(self):
        self._entries: list[Var] = []

    def record(self, value: ArrayLike, backward: Optional[Callable] = None) -> Var:
        var = Var(self, value, backward)
        self._entries.append(var)
        return var

    def leaf(self, value: ArrayLike) -> Var:
        """A differentiation root: gradients accumulate here."""
        return self.record(np.asarray(value, dtype=float))

    def backward(self, root: Var) -> None:
        """Accumulate d(root)/d(v) into `v.grad` for every var on this tape.

        Creation order is a topological order, so the reverse sweep needs no
        sorting. Vars whose grad is still None are off the path to `root`.
        """
        if np.ndim(root.value) != 0:
            raise ValueError("backward root must be a scalar")
        root.grad = 1.0
        for var in reversed(self._entries):
            if var.grad is not None and var._backward is not None:
                var._backward(var.grad)


def _value(x) -> ArrayLike:
    return x.value if isinstance(x, Var) else x


def _tape_of(*operands) -> Tape:
    for x in operands:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a Var")


def add(a, b) -> Var:
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)

    def backward(g):
        if isinstance(a, Var):
            a._accum(_unbroadcast(np.asarray(g), np.shape(va)))
        if isinstance(b, Var):
            b._accum(_unbroadcast(np.asarray(g), np.shape(vb)))

    return tape.record(va + vb, backward)


def sub(a, b) -> Var:
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)

    def backward(g):
        if isinstance(a, Var):
            a._accum(_unbroadcast(np.asarray(g), np.shape(va)))
        if isinstance(b, Var):
            b._accum(-_unbroadcast(np.asarray(g), np.shape(vb)))

    return tape.record(va - vb, backward)


def mul(a, b) -> Var:
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)

    def backward(g):
        if isinstance(a, Var):
            a._accum(_unbroadcast(np.asarray(g) * vb, np.shape(va)))
        if isinstance(b, Var):
            b._accum(_unbroadcast(np.asarray(g) * va, np.shape(vb)))

    return tape.record(va * vb, backward)


def tanh(x):
    """Elementwise tanh; dispatches between tape vars and plain arrays."""
    if not isinstance(x, Var):
        return np.tanh(x)
    t = np.tanh(x.value)

    def backward(g):
        x._accum(g * (1.0 - t * t))

    return x.tape.record(t, backward)


def linear(x, weight, bias=None) -> Var:
    """Affine layer `x @ weight.T + bias` with fused backward.

    x: (Q, n_in), weight: (n_out, n_in), bias: (n_out,) or None. Any operand
    may be a constant array; gradients only flow into Var operands.
    """
    tape = _tape_of(x, weight, bias)
    vx, vw = _value(x), _value(weight)
    out = vx @ vw.T
    if bias is not None:
        out = out + _value(bias)

    def backward(g):
        g = np.asarray(g)
        if isinstance(x, Var):
            x._accum(g @ vw)
        if isinstance(weight, Var):
            weight._accum(g.T @ vx)
        if bias is not None and isinstance(bias, Var):
            bias._accum(g.sum(axis=0))

    return tape.record(out, backward)


def matvec(matrix: np.ndarray, vec) -> Var:
    """`matrix @ vec` for a constant matrix and a Var (or array) vector."""
    if not isinstance(vec, Var):
        return matrix @ vec

    def backward(g):
        vec._accum(matrix.T @ np.asarray(g))

    return vec.tape.record(matrix @ vec.value, backward)


def dot(a, b):
    """Inner product of two 1-D operands, returning a scalar."""
    if not isinstance(a, Var) and not isinstance(b, Var):
        return float(np.dot(a, b))
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)

    def backward(g):
        if isinstance(a, Var):
            a._accum(g * vb)
        if isinstance(b, Var):
            b._accum(g * va)

    return tape.record(float(np.dot(va, vb)), backward)


def reshape(x, shape) -> Var:
    if not isinstance(x, Var):
        return np.reshape(x, shape)
    old_shape = np.shape(x.value)

    def backward(g):
        x._accum(np.reshape(np.asarray(g), old_shape))

    return x.tape.record(np.reshape(x.value, shape), backward)


class Dual:
    """Value/spatial-derivative pair obeying the chain rule.

    Components are either numpy arrays (plain evaluation) or tape Vars
    (differentiable evaluation); the same arithmetic works on both.
    """

    __slots__ = ("value", "dx")

    def __init__(self, value, dx):
        self.value = value
        self.dx = dx

    def __add__(self, other: "Dual") -> "Dual":
        return Dual(self.value + other.value, self.dx + other.dx)

    def __sub__(self, other: "Dual") -> "Dual":
        return Dual(self.value - other.value, self.dx - other.dx)

    def __mul__(self, other: "Dual") -> "Dual":
        return Dual(
            self.value * other.value,
            self.value * other.dx + self.dx * other.value,
        )


def dual_tanh(z: Dual) -> Dual:
    """tanh on a dual pair: dx_out = (1 - value_out^2) * dx_in.

    Fused into two tape entries (instead of four elementwise ones) because
    this sits on the hot path of every hidden layer.
    """
    a, b = z.value, z.dx
    if not isinstance(a, Var):
        t = np.tanh(a)
        return Dual(t, (1.0 - t * t) * b)
    t_val = np.tanh(a.value)
    damp = 1.0 - t_val * t_val
    b_val = _value(b)

    def backward_value(g):
        a._accum(g * damp)

    t = a.tape.record(t_val, backward_value)

    def backward_dx(g):
        # d/d(a) of damp*b is -2*t*damp*b
        a._accum(g * (-2.0 * t_val * damp * b_val))
        if isinstance(b, Var):
            b._accum(g * damp)

    dx = a.tape.record(damp * b_val, backward_dx)
    return Dual(t, dx)


def dual_linear(z: Dual, weight, bias) -> Dual:
    """Affine layer applied to a dual pair (bias drops from the dx channel)."""
    if isinstance(weight, Var) or isinstance(z.value, Var):
        return Dual(linear(z.value, weight, bias), linear(z.dx, weight))
    out = z.value @ weight.T + bias
    return Dual(out, z.dx @ weight.T)
