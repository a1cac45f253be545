"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A `Tensor` wraps an ndarray and records the operation that produced it.
Calling `backward` on a scalar result walks the graph in reverse topological
order and accumulates exact gradients; gradients of named leaves come back as
a dict keyed by leaf name, which is how network parameters are addressed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["Tensor", "concat", "backward"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's original shape."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    squeeze = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if squeeze:
        grad = grad.sum(axis=squeeze, keepdims=True)
    return grad


class Tensor:
    """Node in a scalar-rooted computation graph."""

    # keep numpy from intercepting mixed ndarray/Tensor arithmetic
    __array_ufunc__ = None
    __slots__ = ("values", "grad", "name", "_parents", "_backward")

    def __init__(self, values, parents: tuple = (), name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents = parents
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        return float(self.values)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += grad

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.values + other.values, (self, other))

            def bk():
                self._accumulate(_unbroadcast(out.grad, self.shape))
                other._accumulate(_unbroadcast(out.grad, other.shape))

        else:
            out = Tensor(self.values + np.asarray(other, dtype=np.float64), (self,))

            def bk():
                self._accumulate(_unbroadcast(out.grad, self.shape))

        out._backward = bk
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.values, (self,))

        def bk():
            self._accumulate(-out.grad)

        out._backward = bk
        return out

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.values * other.values, (self, other))

            def bk():
                self._accumulate(_unbroadcast(out.grad * other.values, self.shape))
                other._accumulate(_unbroadcast(out.grad * self.values, other.shape))

        else:
            const = np.asarray(other, dtype=np.float64)
            out = Tensor(self.values * const, (self,))

            def bk():
                self._accumulate(_unbroadcast(out.grad * const, self.shape))

        out._backward = bk
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other ** (-1.0)
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def __pow__(self, exponent: float):
        p = float(exponent)
        out = Tensor(self.values**p, (self,))

        def bk():
            self._accumulate(out.grad * p * self.values ** (p - 1.0))

        out._backward = bk
        return out

    def __matmul__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.values @ other.values, (self, other))

            def bk():
                self._accumulate(out.grad @ other.values.T)
                other._accumulate(self.values.T @ out.grad)

        else:
            const = np.asarray(other, dtype=np.float64)
            out = Tensor(self.values @ const, (self,))

            def bk():
                self._accumulate(out.grad @ const.T)

        out._backward = bk
        return out

    def __rmatmul__(self, other):
        const = np.asarray(other, dtype=np.float64)
        out = Tensor(const @ self.values, (self,))

        def bk():
            self._accumulate(const.T @ out.grad)

        out._backward = bk
        return out

    # -- shape and selection -------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.values.reshape(shape), (self,))

        def bk():
            self._accumulate(out.grad.reshape(self.shape))

        out._backward = bk
        return out

    def __getitem__(self, index):
        """Gather along the first axis; repeated indices accumulate gradient."""
        idx = np.asarray(index, dtype=np.intp)
        out = Tensor(self.values[idx], (self,))

        def bk():
            if self.grad is None:
                self.grad = np.zeros_like(self.values)
            np.add.at(self.grad, idx, out.grad)

        out._backward = bk
        return out

    def sum(self, axis: int | None = None, keepdims: bool = False):
        out = Tensor(self.values.sum(axis=axis, keepdims=keepdims), (self,))

        def bk():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape).copy())

        out._backward = bk
        return out

    # -- nonlinearities -------------------------------------------------------

    def exp(self):
        out = Tensor(np.exp(self.values), (self,))

        def bk():
            self._accumulate(out.grad * out.values)

        out._backward = bk
        return out

    def relu(self):
        out = Tensor(np.maximum(self.values, 0.0), (self,))

        def bk():
            self._accumulate(out.grad * (self.values > 0.0))

        out._backward = bk
        return out

    def leaky_relu(self, slope: float = 0.2):
        out = Tensor(np.where(self.values > 0.0, self.values, slope * self.values), (self,))

        def bk():
            self._accumulate(out.grad * np.where(self.values > 0.0, 1.0, slope))

        out._backward = bk
        return out

    def sigmoid(self):
        v = self.values
        # evaluate on the side that keeps exp() from overflowing
        s = np.where(v >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
        out = Tensor(s, (self,))

        def bk():
            self._accumulate(out.grad * out.values * (1.0 - out.values))

        out._backward = bk
        return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an axis; gradient splits back to each operand."""
    out = Tensor(np.concatenate([t.values for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bk():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(lo, hi)
            t._accumulate(out.grad[tuple(sl)])

    out._backward = bk
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> dict[str, np.ndarray]:
    """Run reverse-mode differentiation from a scalar; return named-leaf gradients.

    Leaves constructed with a name (network parameters) are reported even when
    they did not influence the loss, in which case their gradient is zero.
    """
    if loss.values.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None:
            node._backward()
    grads: dict[str, np.ndarray] = {}
    for node in order:
        if node.name is not None:
            grads[node.name] = (
                node.grad if node.grad is not None else np.zeros_like(node.values)
            )
    return grads
