"""Reverse-mode automatic differentiation on a tape of array-valued nodes.

The tape records elementary operations (affine maps, tanh, arithmetic) in
creation order, which is automatically topological: every node's parents are
created before it. A single reverse sweep over the tape accumulates the
gradient of a scalar node with respect to any set of leaf nodes.

All values are float64 numpy arrays. Evaluation and the backward sweep are
deterministic: identical inputs produce bit-identical values and gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class Tape:
    """Ordered record of nodes; append-only during forward construction."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _register(self, node: "Node") -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def leaf(self, value) -> "Node":
        """Create a differentiable leaf (trainable parameter)."""
        return Node(self, np.asarray(value, dtype=np.float64), (), None)

    def constant(self, value) -> "Node":
        """Create a non-differentiable input node."""
        node = Node(self, np.asarray(value, dtype=np.float64), (), None)
        node.requires_grad = False
        return node


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Node:
    """One recorded value. `backward_fn(g)` maps the output adjoint to
    per-parent adjoint contributions."""

    __slots__ = ("tape", "value", "parents", "backward_fn", "index", "requires_grad")

    def __init__(self, tape, value, parents, backward_fn):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = True
        self.index = tape._register(self)

    # -- arithmetic -------------------------------------------------------

    def _lift(self, other) -> "Node":
        if isinstance(other, Node):
            return other
        return self.tape.constant(other)

    # keep numpy from broadcasting element-wise over Node objects; the
    # reflected operators below handle ndarray-on-the-left expressions
    __array_ufunc__ = None

    def __add__(self, other):
        other = self._lift(other)
        return Node(self.tape, self.value + other.value, (self, other),
                    lambda g: (g, g))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return Node(self.tape, self.value - other.value, (self, other),
                    lambda g: (g, -g))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        return Node(self.tape, self.value * other.value, (self, other),
                    lambda g, a=self, b=other: (g * b.value, g * a.value))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return Node(self.tape, self.value / other.value, (self, other),
                    lambda g, a=self, b=other: (g / b.value,
                                                -g * a.value / b.value ** 2))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        return Node(self.tape, -self.value, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        other = self._lift(other)
        return Node(self.tape, self.value @ other.value, (self, other),
                    lambda g, a=self, b=other: (g @ b.value.T, a.value.T @ g))

    def __rmatmul__(self, other):
        return self._lift(other) @ self

    def square(self):
        return Node(self.tape, self.value ** 2, (self,),
                    lambda g, a=self: (2.0 * g * a.value,))

    def tanh(self):
        out = np.tanh(self.value)
        return Node(self.tape, out, (self,),
                    lambda g, y=out: (g * (1.0 - y ** 2),))

    def sum(self):
        return Node(self.tape, np.asarray(self.value.sum()), (self,),
                    lambda g, s=self.value.shape: (np.broadcast_to(g, s),))

    def mean(self):
        n = self.value.size
        return Node(self.tape, np.asarray(self.value.mean()), (self,),
                    lambda g, s=self.value.shape, n=n:
                    (np.broadcast_to(g / n, s),))


def tanh(x):
    """Dispatching tanh so derivative-propagation code runs on Nodes or arrays."""
    if isinstance(x, Node):
        return x.tanh()
    return np.tanh(x)


def square(x):
    if isinstance(x, Node):
        return x.square()
    return np.square(x)


def mean(x):
    if isinstance(x, Node):
        return x.mean()
    return np.mean(x)


def total(x):
    if isinstance(x, Node):
        return x.sum()
    return np.sum(x)


@dataclass
class DualBundle:
    """Value with exact first and second derivatives w.r.t. the d_in inputs.

    `second` is built symmetric by construction (mixed terms assigned to
    both (j,k) and (k,j))."""

    value: float
    first: np.ndarray
    second: np.ndarray = field(default=None)


def grad_loss(tape: Tape, loss_node: Node, wrt: list[Node]) -> np.ndarray:
    """Gradient of a scalar loss node w.r.t. the given leaf nodes.

    The result is the concatenation of the flattened per-leaf gradients, in
    the order of `wrt` (the caller owns the flattening convention).
    """
    if loss_node.value.ndim != 0 and loss_node.value.size != 1:
        raise ValueError(
            f"loss node must be scalar, got shape {loss_node.value.shape}")
    adjoints: dict[int, np.ndarray] = {
        loss_node.index: np.ones_like(loss_node.value)}
    for node in reversed(tape.nodes[: loss_node.index + 1]):
        g = adjoints.get(node.index)
        if g is None or node.backward_fn is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if not parent.requires_grad and parent.backward_fn is None:
                continue
            pg = _unbroadcast(np.asarray(pg), parent.value.shape)
            acc = adjoints.get(parent.index)
            adjoints[parent.index] = pg if acc is None else acc + pg
    parts = []
    for leaf in wrt:
        g = adjoints.get(leaf.index)
        if g is None:
            g = np.zeros_like(leaf.value)
        parts.append(np.asarray(g, dtype=np.float64).ravel())
    return np.concatenate(parts) if parts else np.zeros(0)
