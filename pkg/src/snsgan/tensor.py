"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Every operation on tensors that require gradients records its parents and a
closure mapping the output gradient to per-parent gradients.  ``backward``
walks that tape in reverse topological order.  The tape is rebuilt on every
forward pass, which keeps alternating generator/discriminator updates simple.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import DomainError, NumericError, ShapeError

LEAKY_SLOPE = 0.2

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (generation, evaluation)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self._op = ""

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _from_op(cls, data, parents: Sequence["Tensor"], backward, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data if data.dtype == np.float64 else data.astype(np.float64)
        out.grad = None
        track = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        out._op = op
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag}, op={self._op or 'leaf'!r})"

    # -- backward -------------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every tracked tensor."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            return
        order = _topological_order(self)
        adjoints = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = adjoints.pop(id(node), None)
            if g is None:
                continue
            node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + pg
                else:
                    adjoints[key] = pg

    # -- operator sugar ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def leaky_relu(self, slope: float = LEAKY_SLOPE):
        return leaky_relu(self, slope)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def _topological_order(root: Tensor) -> list:
    # iterative post-order DFS; recurrent graphs are too deep for recursion
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible") from None


def _check_finite(op: str, x: np.ndarray) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"{op}: non-finite input")


# -- elementwise arithmetic -------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._from_op(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._from_op(a.data / b.data, (a, b), backward, "div")


def power(a: Tensor, exponent: float) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return Tensor._from_op(a.data ** exponent, (a,), backward, "pow")


def elementwise(op_tag: str, a, b) -> Tensor:
    """Dispatch ``add``/``sub``/``mul`` by name."""
    try:
        fn = {"add": add, "sub": sub, "mul": mul}[op_tag]
    except KeyError:
        raise DomainError(f"unknown elementwise op {op_tag!r}") from None
    return fn(a, b)


# -- linear algebra and reductions ------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return Tensor._from_op(a.data @ b.data, (a, b), backward, "matmul")


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._from_op(np.asarray(out), (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {a.shape} into {tuple(shape)}") from None

    def backward(g):
        return (g.reshape(a.shape),)

    return Tensor._from_op(out, (a,), backward, "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    a = as_tensor(a)
    out = np.transpose(a.data, axes)
    inverse = None if axes is None else np.argsort(axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return Tensor._from_op(np.ascontiguousarray(out), (a,), backward, "transpose")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice, type(None), type(Ellipsis))) for i in items)


def getitem(a: Tensor, index) -> Tensor:
    a = as_tensor(a)
    out = a.data[index]
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return Tensor._from_op(np.array(out, dtype=np.float64), (a,), backward, "getitem")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._from_op(out, tensors, backward, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"stack: {exc}") from None

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._from_op(out, tensors, backward, "stack")


# -- activations ------------------------------------------------------------------


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return Tensor._from_op(out, (a,), backward, "exp")


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (g / a.data,)

    return Tensor._from_op(np.log(a.data), (a,), backward, "log")


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    _check_finite("sigmoid", a.data)
    out = expit(a.data)

    def backward(g):
        return (g * out * (1.0 - out),)

    return Tensor._from_op(out, (a,), backward, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    _check_finite("tanh", a.data)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return Tensor._from_op(out, (a,), backward, "tanh")


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    _check_finite("relu", a.data)
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor._from_op(a.data * mask, (a,), backward, "relu")


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    a = as_tensor(a)
    _check_finite("leaky_relu", a.data)
    scale = np.where(a.data > 0, 1.0, slope)

    def backward(g):
        return (g * scale,)

    return Tensor._from_op(a.data * scale, (a,), backward, "leaky_relu")


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    a = as_tensor(a)
    _check_finite("softmax", a.data)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor._from_op(out, (a,), backward, "softmax")


def log_softmax(a: Tensor) -> Tensor:
    a = as_tensor(a)
    _check_finite("log_softmax", a.data)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return Tensor._from_op(out, (a,), backward, "log_softmax")


_ACTIVATIONS = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "leaky_relu": leaky_relu,
    "softmax": softmax,
}


def activation(tag: str, x) -> Tensor:
    try:
        fn = _ACTIVATIONS[tag]
    except KeyError:
        raise DomainError(f"unknown activation {tag!r}") from None
    return fn(x)


# -- losses -----------------------------------------------------------------------


def bce_with_logits(logits, targets) -> Tensor:
    """Mean binary cross-entropy of ``sigmoid(logits)`` against 0/1 targets.

    Uses ``softplus(l) - t*l``, which never exponentiates a large positive
    number.
    """
    logits = as_tensor(logits)
    t = targets.data if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    t = np.broadcast_to(t, logits.shape) if t.ndim == 0 else t
    if t.shape != logits.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs targets {t.shape}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise DomainError("bce_with_logits: targets must be 0 or 1")
    _check_finite("bce_with_logits", logits.data)
    l = logits.data
    n = l.size
    value = np.mean(np.logaddexp(0.0, l) - t * l)

    def backward(g):
        return (g * (expit(l) - t) / n,)

    return Tensor._from_op(np.asarray(value), (logits,), backward, "bce_with_logits")


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    logp = log_softmax(logits)
    picked = getitem(logp, (np.arange(len(labels)), labels))
    return -mean(picked)


# -- convolutions -----------------------------------------------------------------


def conv1d_causal(x, w, dilation: int = 1) -> Tensor:
    """Dilated causal 1-D convolution.

    ``x`` is (batch, in_ch, T), ``w`` is (out_ch, in_ch, k).  The input is
    left-padded with (k-1)*dilation zeros so the output keeps length T and
    position t only sees inputs at times <= t.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv1d: input {x.shape} incompatible with kernel {w.shape}")
    batch, _, length = x.shape
    k = w.shape[2]
    pad = (k - 1) * dilation
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, 0)))
    cols = np.stack([xp[:, :, j * dilation: j * dilation + length] for j in range(k)], axis=2)
    out = np.tensordot(cols, w.data, axes=([1, 2], [1, 2])).transpose(0, 2, 1)

    def backward(g):
        gw = np.tensordot(g, cols, axes=([0, 2], [0, 3])) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.tensordot(g, w.data, axes=([1], [0]))  # (B, T, C, k)
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, :, j * dilation: j * dilation + length] += gcols[:, :, :, j].transpose(0, 2, 1)
            gx = gxp[:, :, pad:]
        return gx, gw

    return Tensor._from_op(np.ascontiguousarray(out), (x, w), backward, "conv1d")


def conv2d_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose2d_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def conv2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation; ``x`` is (B, C, H, W), ``w`` is (O, C, kh, kw)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
    _, _, height, width = x.shape
    kh, kw = w.shape[2:]
    for name, size, k in (("height", height, kh), ("width", width, kw)):
        if size + 2 * padding < k:
            raise ShapeError(f"conv2d: padded {name} {size + 2 * padding} smaller than kernel {k}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = cols.shape[2], cols.shape[3]
    out = np.tensordot(cols, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    def backward(g):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3])) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.tensordot(g, w.data, axes=([1], [0]))  # (B, oh, ow, C, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i: i + stride * out_h: stride, j: j + stride * out_w: stride] += (
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, padding: padding + height, padding: padding + width]
        return gx, gw

    return Tensor._from_op(np.ascontiguousarray(out), (x, w), backward, "conv2d")


def conv_transpose2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution; ``x`` is (B, Ci, H, W), ``w`` is (Ci, Co, kh, kw).

    This is the input-gradient map of :func:`conv2d` with the same geometry.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"conv_transpose2d: input {x.shape} incompatible with kernel {w.shape}")
    batch, _, height, width = x.shape
    cout, kh, kw = w.shape[1:]
    full_h = (height - 1) * stride + kh
    full_w = (width - 1) * stride + kw
    for name, full in (("height", full_h), ("width", full_w)):
        if full - 2 * padding < 1:
            raise ShapeError(f"conv_transpose2d: output {name} {full - 2 * padding} is not positive")
    cols = np.tensordot(x.data, w.data, axes=([1], [0]))  # (B, H, W, Co, kh, kw)
    full = np.zeros((batch, cout, full_h, full_w))
    for i in range(kh):
        for j in range(kw):
            full[:, :, i: i + stride * (height - 1) + 1: stride, j: j + stride * (width - 1) + 1: stride] += (
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    out = full[:, :, padding: full_h - padding, padding: full_w - padding]

    def backward(g):
        gfull = np.zeros((batch, cout, full_h, full_w))
        gfull[:, :, padding: full_h - padding, padding: full_w - padding] = g
        win = sliding_window_view(gfull, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        gx = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2) if x.requires_grad else None
        gw = np.tensordot(x.data, win, axes=([0, 2, 3], [0, 2, 3])) if w.requires_grad else None
        return gx, gw

    return Tensor._from_op(np.ascontiguousarray(out), (x, w), backward, "conv_transpose2d")
