"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Every operation builds a node holding its output value and a closure that
routes the incoming gradient to the operation's inputs. Calling
``Tensor.backward()`` on a scalar root walks the graph once in reverse
topological order and accumulates gradients additively into every
reachable tensor with ``requires_grad=True``. Graphs are throwaway: each
forward pass builds a fresh one, nothing persists between training steps.

Conventions: all arithmetic is float64; the subgradient of ``relu`` at 0
and of ``abs`` at 0 is 0; broadcasting is limited to adding a vector bias
across the leading (batch) axis.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


class Tensor:
    """A float64 array plus the bookkeeping needed for backpropagation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, g):
        if self.requires_grad:
            self.grad = g if self.grad is None else self.grad + g

    def backward(self):
        """Backpropagate from a scalar root, accumulating into ``.grad``."""
        if self.data.ndim != 0:
            raise ValueError(
                f"backward: root must be scalar, got shape {self.data.shape}"
            )
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operations ----------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        out_data = a @ b

        def backward(g):
            self._accumulate(g @ b.T)
            other._accumulate(a.T @ g)

        return Tensor._make(out_data, (self, other), backward)

    def add(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        if a.shape == b.shape:

            def backward(g):
                self._accumulate(g)
                other._accumulate(g)

        elif a.ndim == b.ndim + 1 and a.shape[1:] == b.shape:
            # bias broadcast across the batch axis
            def backward(g):
                self._accumulate(g)
                other._accumulate(g.sum(axis=0))

        else:
            raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
        return Tensor._make(a + b, (self, other), backward)

    def sub(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        if a.shape != b.shape:
            raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")

        def backward(g):
            self._accumulate(g)
            other._accumulate(-g)

        return Tensor._make(a - b, (self, other), backward)

    def mul(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        if a.shape != b.shape:
            raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")

        def backward(g):
            self._accumulate(g * b)
            other._accumulate(g * a)

        return Tensor._make(a * b, (self, other), backward)

    def scale(self, c: float) -> "Tensor":
        c = float(c)

        def backward(g):
            self._accumulate(g * c)

        return Tensor._make(self.data * c, (self,), backward)

    def relu(self) -> "Tensor":
        mask = self.data > 0.0

        def backward(g):
            self._accumulate(g * mask)

        return Tensor._make(np.where(mask, self.data, 0.0), (self,), backward)

    def sigmoid(self) -> "Tensor":
        x = self.data
        # split positive/negative branches so exp never overflows
        s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

        def backward(g):
            self._accumulate(g * s * (1.0 - s))

        return Tensor._make(s, (self,), backward)

    def powi(self, k: int) -> "Tensor":
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValueError(f"powi: exponent must be an integer >= 1, got {k!r}")
        x = self.data

        def backward(g):
            self._accumulate(g * (k * x ** (k - 1)))

        return Tensor._make(x ** k, (self,), backward)

    def abs(self) -> "Tensor":
        x = self.data

        def backward(g):
            self._accumulate(g * np.sign(x))

        return Tensor._make(np.abs(x), (self,), backward)

    def l2norm(self) -> "Tensor":
        """Euclidean norm over the last axis; zero rows get zero gradient."""
        x = self.data
        if x.ndim < 1:
            raise ShapeError(f"l2norm: needs at least one axis, got shape {x.shape}")
        n = np.sqrt((x * x).sum(axis=-1))

        def backward(g):
            safe = np.where(n == 0.0, 1.0, n)
            self._accumulate((g / safe)[..., None] * x)

        return Tensor._make(n, (self,), backward)

    def sum(self, axis=None) -> "Tensor":
        if axis not in (None, 0):
            raise ValueError(f"sum: axis must be None or 0, got {axis!r}")
        x = self.data

        def backward(g):
            self._accumulate(np.broadcast_to(g, x.shape))

        return Tensor._make(x.sum(axis=axis), (self,), backward)

    def mean(self, axis=None) -> "Tensor":
        if axis not in (None, 0):
            raise ValueError(f"mean: axis must be None or 0, got {axis!r}")
        x = self.data
        count = x.size if axis is None else x.shape[0]
        if count == 0:
            raise ShapeError(f"mean: empty input of shape {x.shape}")

        def backward(g):
            self._accumulate(np.broadcast_to(g, x.shape) / count)

        return Tensor._make(x.mean(axis=axis), (self,), backward)

    def log(self) -> "Tensor":
        x = self.data

        def backward(g):
            self._accumulate(g / x)

        return Tensor._make(np.log(x), (self,), backward)

    def clamp(self, lo: float, hi: float) -> "Tensor":
        x = self.data
        inside = (x > lo) & (x < hi)

        def backward(g):
            self._accumulate(g * inside)

        return Tensor._make(np.clip(x, lo, hi), (self,), backward)

    # -- operator sugar -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=np.float64))

    def __matmul__(self, other):
        return self.matmul(self._coerce(other))

    def __add__(self, other):
        return self.add(self._coerce(other))

    def __radd__(self, other):
        return self._coerce(other).add(self)

    def __sub__(self, other):
        return self.sub(self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other).sub(self)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(other)
        return self.mul(self._coerce(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return self.scale(-1.0)

    def __truediv__(self, c):
        if not isinstance(c, (int, float, np.floating, np.integer)):
            raise TypeError("division is only supported by a plain number")
        return self.scale(1.0 / c)


_KINDS = {
    "matmul": lambda a, b: a.matmul(b),
    "add": lambda a, b: a.add(b),
    "mul": lambda a, b: a.mul(b),
    "sub": lambda a, b: a.sub(b),
    "relu": lambda a: a.relu(),
    "sigmoid": lambda a: a.sigmoid(),
    "powi": lambda a, k: a.powi(k),
    "abs": lambda a: a.abs(),
    "l2norm": lambda a: a.l2norm(),
    "sum": lambda a, *ax: a.sum(*ax),
    "mean": lambda a, *ax: a.mean(*ax),
    "log": lambda a: a.log(),
    "clamp": lambda a, lo, hi: a.clamp(lo, hi),
    "scale": lambda a, c: a.scale(c),
}


def apply_op(kind: str, *args):
    """Dispatch an operation by kind name (see ``_KINDS`` for the registry)."""
    try:
        op = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind: {kind!r}") from None
    return op(*args)


def zero_grad(tensors):
    """Drop accumulated gradients before building a new graph."""
    for t in tensors:
        t.grad = None
