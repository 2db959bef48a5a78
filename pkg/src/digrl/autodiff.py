"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and records its producing operation; calling
`backward()` on a scalar loss walks the recorded graph in reverse topological
order and accumulates gradients on every tensor created with
requires_grad=True. Just enough ops for dense layers, LSTM cells, Gaussian
log-likelihoods, and expectile/TD losses.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # keep numpy from absorbing Tensor operands into object arrays
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None})"

    # --- graph construction helpers ---

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad or p._parents for p in parents):
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = grad.copy() if isinstance(grad, np.ndarray) else np.asarray(grad)
        else:
            self.grad = self.grad + grad

    # --- arithmetic ---

    def __add__(self, other):
        other = as_tensor(other)
        out_data = self.data + other.data

        def backward(g):
            return (_unbroadcast(g, self.data.shape),
                    _unbroadcast(g, other.data.shape))

        return Tensor._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        out_data = self.data - other.data

        def backward(g):
            return (_unbroadcast(g, self.data.shape),
                    _unbroadcast(-g, other.data.shape))

        return Tensor._make(out_data, (self, other), backward)

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        out_data = self.data * other.data
        a_data, b_data = self.data, other.data

        def backward(g):
            return (_unbroadcast(g * b_data, a_data.shape),
                    _unbroadcast(g * a_data, b_data.shape))

        return Tensor._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __neg__(self):
        def backward(g):
            return (-g,)

        return Tensor._make(-self.data, (self,), backward)

    def __truediv__(self, other):
        other = as_tensor(other)
        out_data = self.data / other.data
        a_data, b_data = self.data, other.data

        def backward(g):
            return (_unbroadcast(g / b_data, a_data.shape),
                    _unbroadcast(-g * a_data / (b_data * b_data), b_data.shape))

        return Tensor._make(out_data, (self, other), backward)

    def __matmul__(self, other):
        other = as_tensor(other)
        out_data = self.data @ other.data
        a_data, b_data = self.data, other.data
        need_a = self.requires_grad or bool(self._parents)
        need_b = other.requires_grad or bool(other._parents)

        def backward(g):
            return (g @ b_data.T if need_a else None,
                    a_data.T @ g if need_b else None)

        return Tensor._make(out_data, (self, other), backward)

    # --- nonlinearities ---

    def relu(self):
        mask = self.data > 0.0

        def backward(g):
            return (g * mask,)

        return Tensor._make(self.data * mask, (self,), backward)

    def tanh(self):
        out_data = np.tanh(self.data)

        def backward(g):
            return (g * (1.0 - out_data * out_data),)

        return Tensor._make(out_data, (self,), backward)

    def sigmoid(self):
        out_data = 1.0 / (1.0 + np.exp(-self.data))

        def backward(g):
            return (g * out_data * (1.0 - out_data),)

        return Tensor._make(out_data, (self,), backward)

    def exp(self):
        out_data = np.exp(self.data)

        def backward(g):
            return (g * out_data,)

        return Tensor._make(out_data, (self,), backward)

    def log(self):
        def backward(g):
            return (g / self.data,)

        return Tensor._make(np.log(self.data), (self,), backward)

    def square(self):
        def backward(g):
            return (g * 2.0 * self.data,)

        return Tensor._make(self.data * self.data, (self,), backward)

    def clip(self, lo: float, hi: float):
        """Hard clamp; gradient passes through only inside the interval."""
        mask = (self.data > lo) & (self.data < hi)

        def backward(g):
            return (g * mask,)

        return Tensor._make(np.clip(self.data, lo, hi), (self,), backward)

    # --- reductions and shaping ---

    def sum(self):
        shape = self.data.shape

        def backward(g):
            return (np.broadcast_to(g, shape).astype(np.float64, copy=False),)

        return Tensor._make(self.data.sum(), (self,), backward)

    def mean(self):
        shape = self.data.shape
        n = self.data.size

        def backward(g):
            return (np.broadcast_to(g / n, shape).astype(np.float64, copy=False),)

        return Tensor._make(self.data.mean(), (self,), backward)

    def cols(self, a: int, b: int):
        """Column slice [:, a:b] with gradient scatter."""
        shape = self.data.shape

        def backward(g):
            full = np.zeros(shape)
            full[:, a:b] = g
            return (full,)

        return Tensor._make(self.data[:, a:b], (self,), backward)

    # --- reverse pass ---

    def backward(self):
        if self.data.size != 1:
            raise NumericError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node._accumulate(g)
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not (parent.requires_grad or parent._parents):
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat_cols(tensors: list[Tensor]) -> Tensor:
    """Concatenate 2D tensors along columns with gradient splitting."""
    datas = [t.data for t in tensors]
    widths = [d.shape[1] for d in datas]
    offsets = np.cumsum([0] + widths)

    def backward(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(datas)))

    return Tensor._make(np.concatenate(datas, axis=1), tuple(tensors), backward)
