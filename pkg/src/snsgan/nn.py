"""Layers used by every generator, discriminator and evaluation classifier."""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor

INIT_STD = 0.02


class Module:
    """Container that discovers parameters and submodules from its attributes."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: dict) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ShapeError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"{name}: expected {p.shape}, got {value.shape}")
            p.data = np.ascontiguousarray(value)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _param(*shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def init_params(module: Module, rng: np.random.Generator, scheme: str = "normal") -> None:
    """Weights ~ N(0, 0.02^2), biases zero.

    A parameter counts as a bias when its name ends in ``bias``.  Parameters
    are visited in registration order, so a fixed seed fixes every value.
    ``scheme="he"`` uses std sqrt(2 / fan_in) instead, with fan_in the
    product of all but the leading weight axis; the evaluation classifiers
    train faster that way.
    """
    if scheme not in ("normal", "he"):
        raise ConfigError(f"unknown init scheme {scheme!r}")
    for name, p in module.named_parameters():
        if name.rsplit(".", 1)[-1].startswith("bias"):
            p.data = np.zeros(p.shape)
        else:
            std = INIT_STD if scheme == "normal" else np.sqrt(2.0 / max(1, int(np.prod(p.shape[1:]))))
            p.data = rng.normal(0.0, std, size=p.shape)


class Dense(Module):
    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = _param(out_features, in_features)
        self.bias = _param(out_features)

    def forward(self, x) -> Tensor:
        x = T.as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"Dense expects (batch, {self.in_features}), got {x.shape}")
        return x @ self.weight.T + self.bias


class GRUCell(Module):
    """Gated recurrent unit with the reset gate applied before the hidden matmul.

        z  = sigmoid(x W_z^T + h U_z^T + b_z)
        r  = sigmoid(x W_r^T + h U_r^T + b_r)
        h~ = tanh(x W_h^T + (r * h) U_h^T + b_h)
        h' = (1 - z) * h + z * h~
    """

    def __init__(self, input_size: int, hidden_size: int):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.weight_xz = _param(hidden_size, input_size)
        self.weight_xr = _param(hidden_size, input_size)
        self.weight_xh = _param(hidden_size, input_size)
        self.weight_hz = _param(hidden_size, hidden_size)
        self.weight_hr = _param(hidden_size, hidden_size)
        self.weight_hh = _param(hidden_size, hidden_size)
        self.bias_z = _param(hidden_size)
        self.bias_r = _param(hidden_size)
        self.bias_h = _param(hidden_size)

    def initial_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden_size)))

    def forward(self, x_t, h_prev) -> Tensor:
        x_t, h_prev = T.as_tensor(x_t), T.as_tensor(h_prev)
        if x_t.ndim != 2 or x_t.shape[1] != self.input_size:
            raise ShapeError(f"GRUCell input expects (batch, {self.input_size}), got {x_t.shape}")
        if h_prev.shape != (x_t.shape[0], self.hidden_size):
            raise ShapeError(f"GRUCell hidden expects ({x_t.shape[0]}, {self.hidden_size}), got {h_prev.shape}")
        z = T.sigmoid(x_t @ self.weight_xz.T + h_prev @ self.weight_hz.T + self.bias_z)
        r = T.sigmoid(x_t @ self.weight_xr.T + h_prev @ self.weight_hr.T + self.bias_r)
        candidate = T.tanh(x_t @ self.weight_xh.T + (r * h_prev) @ self.weight_hh.T + self.bias_h)
        return (1.0 - z) * h_prev + z * candidate


def gru_step(cell: GRUCell, x_t, h_prev) -> Tensor:
    return cell(x_t, h_prev)


class CausalConv1d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, dilation: int = 1):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.weight = _param(out_channels, in_channels, kernel_size)
        self.bias = _param(out_channels, 1)

    def forward(self, x) -> Tensor:
        return T.conv1d_causal(x, self.weight, self.dilation) + self.bias


class TCNBlock(Module):
    """One dilated causal convolution, leaky ReLU, and a residual path.

    The residual path is the identity when channel counts match and a 1x1
    convolution otherwise.  ``residual=False`` drops it entirely.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 8,
                 dilation: int = 1, residual: bool = True):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.residual = residual
        self.conv = CausalConv1d(in_channels, out_channels, kernel_size, dilation)
        self.projection: Optional[CausalConv1d] = None
        if residual and in_channels != out_channels:
            self.projection = CausalConv1d(in_channels, out_channels, 1)

    @property
    def receptive_field(self) -> int:
        return (self.kernel_size - 1) * self.dilation + 1

    def forward(self, x) -> Tensor:
        x = T.as_tensor(x)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"TCNBlock expects (batch, {self.in_channels}, T), got {x.shape}")
        out = T.leaky_relu(self.conv(x))
        if not self.residual:
            return out
        skip = x if self.projection is None else self.projection(x)
        return out + skip


def tcn_forward(block: TCNBlock, x) -> Tensor:
    return block(x)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 4,
                 stride: int = 2, padding: int = 1):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = _param(out_channels, in_channels, kernel_size, kernel_size)
        self.bias = _param(out_channels, 1, 1)

    def output_size(self, size: int) -> int:
        return T.conv2d_output_size(size, self.kernel_size, self.stride, self.padding)

    def forward(self, x) -> Tensor:
        return T.conv2d(x, self.weight, self.stride, self.padding) + self.bias


class ConvTranspose2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 4,
                 stride: int = 2, padding: int = 1):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = _param(in_channels, out_channels, kernel_size, kernel_size)
        self.bias = _param(out_channels, 1, 1)

    def output_size(self, size: int) -> int:
        return T.conv_transpose2d_output_size(size, self.kernel_size, self.stride, self.padding)

    def forward(self, x) -> Tensor:
        return T.conv_transpose2d(x, self.weight, self.stride, self.padding) + self.bias


def conv2d_forward(layer: Conv2d, x) -> Tensor:
    return layer(x)


def conv2d_transpose_forward(layer: ConvTranspose2d, x) -> Tensor:
    return layer(x)


def dense_forward(layer: Dense, x) -> Tensor:
    return layer(x)
