"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Just enough machinery for small recurrent/convolutional text classifiers
trained with plain gradient descent: elementwise ops with broadcasting,
2-D matmul, gather/scatter for embeddings, reductions, and numerically
stable loss composites. Graphs are rebuilt per step; backward walks an
iteratively-built topological order (recursion-free, so long LSTM chains
are fine).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[Array], None] | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def accumulate(self, grad: Array) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value: Array, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(value, parents=parents, backward=backward)
    if not out.requires_grad:
        out._parents = ()
        out._backward = None
    return out


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    value = a.value + b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.value.shape))

    return _make(value, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(-g)

    return _make(-a.value, (a,), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    value = a.value * b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.value, b.value.shape))

    return _make(value, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    value = a.value / b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(g / b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    return _make(value, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    value = a.value @ b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g @ b.value.T)
        if b.requires_grad:
            b.accumulate(a.value.T @ g)

    return _make(value, (a, b), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    value = np.exp(a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g * value)

    return _make(value, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g / a.value)

    return _make(np.log(a.value), (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    value = np.tanh(a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g * (1.0 - value * value))

    return _make(value, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    value = np.exp(-np.logaddexp(0.0, -a.value))

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g * value * (1.0 - value))

    return _make(value, (a,), backward)


def log_sigmoid(a) -> Tensor:
    a = as_tensor(a)
    value = -np.logaddexp(0.0, -a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            # d/dz log sigmoid(z) = sigmoid(-z)
            a.accumulate(g * np.exp(-np.logaddexp(0.0, a.value)))

    return _make(value, (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    keep = a.value > 0.0

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g * keep)

    return _make(a.value * keep, (a,), backward)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    old_shape = a.value.shape

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate(g.reshape(old_shape))

    return _make(a.value.reshape(shape), (a,), backward)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.value.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: Array) -> None:
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if part.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                part.accumulate(g[tuple(index)])

    return _make(np.concatenate([p.value for p in parts], axis=axis), tuple(parts), backward)


def slice_cols(a, lo: int, hi: int) -> Tensor:
    a = as_tensor(a)

    def backward(g: Array) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.value)
            full[..., lo:hi] = g
            a.accumulate(full)

    return _make(a.value[..., lo:hi], (a,), backward)


def take_rows(a, idx) -> Tensor:
    """Gather rows of a 2-D tensor; duplicate indices scatter-add on backward."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g: Array) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.value)
            np.add.at(full, idx, g)
            a.accumulate(full)

    return _make(a.value[idx], (a,), backward)


def pick(a, idx) -> Tensor:
    """Select one column per row of a 2-D tensor: out[i] = a[i, idx[i]]."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.value.shape[0])

    def backward(g: Array) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.value)
            full[rows, idx] = g
            a.accumulate(full)

    return _make(a.value[rows, idx], (a,), backward)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g: Array) -> None:
        if a.requires_grad:
            if axis is None:
                a.accumulate(np.broadcast_to(g, a.value.shape).copy())
            else:
                expanded = g if keepdims else np.expand_dims(g, axis)
                a.accumulate(np.broadcast_to(expanded, a.value.shape).copy())

    return _make(value, (a,), backward)


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reduce_max(a, axis: int, keepdims: bool = False) -> Tensor:
    """Max along one axis; gradient flows to the first argmax (deterministic)."""
    a = as_tensor(a)
    amax = np.argmax(a.value, axis=axis)
    onehot = np.zeros_like(a.value)
    np.put_along_axis(onehot, np.expand_dims(amax, axis), 1.0, axis=axis)
    value = a.value.max(axis=axis, keepdims=keepdims)

    def backward(g: Array) -> None:
        if a.requires_grad:
            expanded = g if keepdims else np.expand_dims(g, axis)
            a.accumulate(onehot * expanded)

    return _make(value, (a,), backward)


def backward(loss: Tensor, grad: Array | None = None) -> None:
    """Run reverse-mode accumulation from a scalar (or given seed grad)."""
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.value) if grad is None else np.asarray(grad, dtype=np.float64)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------

def log_softmax(logits: Tensor) -> Tensor:
    """Row-wise log-softmax; the max shift is treated as a constant."""
    shift = Tensor(logits.value.max(axis=-1, keepdims=True))
    centered = logits - shift
    return centered - log(reduce_sum(exp(centered), axis=-1, keepdims=True))


def softmax_values(logits: Array) -> Array:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: Tensor, target_idx) -> Tensor:
    """Mean negative log-likelihood of integer targets."""
    return neg(reduce_mean(pick(log_softmax(logits), target_idx)))


def binary_cross_entropy(logits: Tensor, targets: Array) -> Tensor:
    """Mean logistic loss against a {0,1} target array of the same shape."""
    t = Tensor(np.asarray(targets, dtype=np.float64))
    losses = neg(add(mul(t, log_sigmoid(logits)), mul(1.0 - t.value, log_sigmoid(neg(logits)))))
    return reduce_mean(losses)


def masked_softmax(scores: Tensor, mask: Array, axis: int = -1) -> Tensor:
    """Softmax over positions where mask == 1; masked entries are exactly 0."""
    mask = np.asarray(mask, dtype=np.float64)
    neg_fill = Tensor((1.0 - mask) * -1e30)
    shifted = add(mul(scores, Tensor(mask)), neg_fill)
    peak = Tensor(shifted.value.max(axis=axis, keepdims=True))
    weights = mul(exp(shifted - peak), Tensor(mask))
    return div(weights, reduce_sum(weights, axis=axis, keepdims=True))


def global_norm(grads: Sequence[Array]) -> float:
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    return float(np.sqrt(total))
