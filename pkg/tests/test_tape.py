"""Gradient engine checks against central finite differences."""

import numpy as np
import pytest

from pinncal.tape import Tape, grad_loss, mean, square, tanh, total


def finite_difference(func, x, eps=1e-6):
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = eps
        grad.flat[i] = (func(x + step) - func(x - step)) / (2 * eps)
    return grad


def test_scalar_chain():
    tape = Tape()
    a = tape.leaf(np.array(2.0))
    b = tape.leaf(np.array(3.0))
    loss = square(a * b + a / b - b)
    g = grad_loss(tape, loss, [a, b])
    # f = (ab + a/b - b)^2, df/da = 2(ab + a/b - b)(b + 1/b)
    val = 2.0 * 3.0 + 2.0 / 3.0 - 3.0
    assert g[0] == pytest.approx(2 * val * (3.0 + 1.0 / 3.0), rel=1e-12)
    assert g[1] == pytest.approx(2 * val * (2.0 - 2.0 / 9.0 - 1.0), rel=1e-12)


def test_matmul_and_broadcast_gradient():
    rng = np.random.default_rng(3)
    w0 = rng.standard_normal((4, 3))
    b0 = rng.standard_normal(3)
    x = rng.standard_normal((7, 4))

    def loss_of(vec):
        w = vec[:12].reshape(4, 3)
        b = vec[12:]
        return float(np.mean(np.tanh(x @ w + b) ** 2))

    tape = Tape()
    xn = tape.leaf(x)
    wn = tape.leaf(w0)
    bn = tape.leaf(b0)
    loss = mean(square(tanh(xn @ wn + bn)))
    g = grad_loss(tape, loss, [wn, bn])
    ref = finite_difference(loss_of, np.concatenate([w0.ravel(), b0]))
    assert np.max(np.abs(g - ref)) / np.max(np.abs(ref)) < 1e-6


def test_sum_mean_consistency():
    rng = np.random.default_rng(5)
    v0 = rng.standard_normal(11)
    tape = Tape()
    v = tape.leaf(v0)
    g_mean = grad_loss(tape, mean(square(v)), [v])
    tape2 = Tape()
    v2 = tape2.leaf(v0)
    g_sum = grad_loss(tape2, total(square(v2)), [v2])
    assert np.allclose(g_sum, 11 * g_mean)


def test_neg_sub_div_gradients():
    rng = np.random.default_rng(9)
    a0 = rng.standard_normal(6) + 3.0
    b0 = rng.standard_normal(6) + 3.0

    def loss_of(vec):
        a, b = vec[:6], vec[6:]
        return float(np.mean((-a - b / a) ** 2))

    tape = Tape()
    a = tape.leaf(a0)
    b = tape.leaf(b0)
    loss = mean(square(-a - b / a))
    g = grad_loss(tape, loss, [a, b])
    ref = finite_difference(loss_of, np.concatenate([a0, b0]))
    assert np.max(np.abs(g - ref)) < 1e-6 * max(1.0, np.max(np.abs(ref)))


def test_non_scalar_loss_rejected():
    tape = Tape()
    v = tape.leaf(np.ones(3))
    with pytest.raises(ValueError):
        grad_loss(tape, square(v), [v])


def test_constant_mixing():
    # plain ndarrays mix freely with nodes on either side
    tape = Tape()
    a = tape.leaf(np.full(4, 2.0))
    c = np.arange(4.0)
    loss = mean(square(c * a + a * c + c - a))
    g = grad_loss(tape, loss, [a])
    ref = finite_difference(
        lambda v: float(np.mean((c * v + v * c + c - v) ** 2)), np.full(4, 2.0))
    assert np.allclose(g, ref, atol=1e-6)
