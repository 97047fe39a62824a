"""Generator/discriminator pairs for the six supported variants.

SNS variants receive class information only through the structured noise
vector; their discriminators take a sample and nothing else.  RCGAN variants
concatenate a one-hot condition to the per-step inputs of both networks and
judge every time step separately.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .nn import CausalConv1d, Conv2d, ConvTranspose2d, Dense, GRUCell, Module, TCNBlock, init_params
from .noise import NoiseSpec, sample_batch
from .tensor import Tensor

SERIES_VARIANTS = ("SNS-Linear", "SNS-RNN", "SNS-TCN", "RCGAN-RNN", "RCGAN-TCN")
IMAGE_VARIANTS = ("SNS-Image",)
VARIANTS = SERIES_VARIANTS + IMAGE_VARIANTS

_DEFAULT_HIDDEN = {"SNS-Linear": 500, "SNS-RNN": 512, "RCGAN-RNN": 256}


@dataclass
class ModelVariant:
    """Architecture choice plus hyperparameters.

    ``hidden_size`` of None picks the per-variant default: 500 for the dense
    layer of SNS-Linear, 512 GRU units for SNS-RNN and 256 for RCGAN-RNN.
    """

    tag: str
    hidden_size: Optional[int] = None
    kernel_size: int = 8
    dilation: int = 1
    tcn_channels: int = 32
    rcgan_noise_dim: int = 32
    image_layers: int = 2
    image_base_channels: int = 64

    def __post_init__(self):
        if self.tag not in VARIANTS:
            raise ConfigError(f"unknown variant {self.tag!r}; choose from {', '.join(VARIANTS)}")
        if self.hidden_size is None:
            self.hidden_size = _DEFAULT_HIDDEN.get(self.tag, 0)
        if self.image_layers < 1:
            raise ConfigError("image_layers must be >= 1")

    @property
    def family(self) -> str:
        return "rcgan" if self.tag.startswith("RCGAN") else "sns"

    @property
    def is_image(self) -> bool:
        return self.tag in IMAGE_VARIANTS

    def replace(self, **changes) -> "ModelVariant":
        return dataclasses.replace(self, **changes)


def _onehot(classes, num_classes: int) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int64)
    if classes.size and (classes.min() < 0 or classes.max() >= num_classes):
        raise ShapeError(f"classes must lie in [0, {num_classes})")
    return np.eye(num_classes)[classes]


def _check_series(x: Tensor, length: Optional[int], who: str) -> None:
    if x.ndim != 2 or (length is not None and x.shape[1] != length):
        want = f"(batch, {length})" if length is not None else "(batch, T)"
        raise ShapeError(f"{who} expects series {want}, got {x.shape}")


# -- SNS generators ----------------------------------------------------------------


class SNSGenerator(Module):
    family = "sns"

    def __init__(self, noise_dim: int, output_shape: tuple):
        self.noise_dim = noise_dim
        self.output_shape = tuple(output_shape)

    def _check_noise(self, z) -> Tensor:
        z = T.as_tensor(z)
        if z.ndim != 2 or z.shape[1] != self.noise_dim:
            raise ShapeError(f"generator expects noise (batch, {self.noise_dim}), got {z.shape}")
        return z


class LinearGenerator(SNSGenerator):
    def __init__(self, noise_dim: int, length: int, hidden: int):
        super().__init__(noise_dim, (length,))
        self.hidden = Dense(noise_dim, hidden)
        self.out = Dense(hidden, length)

    def forward(self, z) -> Tensor:
        z = self._check_noise(z)
        return T.tanh(self.out(T.leaky_relu(self.hidden(z))))


class RNNGenerator(SNSGenerator):
    """Autoregressive GRU generator.

    The noise vector sets the initial hidden state; the first step sees a
    zero input and each later step sees the previously emitted value.
    """

    def __init__(self, noise_dim: int, length: int, hidden: int):
        super().__init__(noise_dim, (length,))
        self.length = length
        self.to_hidden = Dense(noise_dim, hidden)
        self.cell = GRUCell(1, hidden)
        self.head = Dense(hidden, 1)

    def forward(self, z, length: Optional[int] = None) -> Tensor:
        z = self._check_noise(z)
        steps = self.length if length is None else length
        h = self.to_hidden(z)
        x = Tensor(np.zeros((z.shape[0], 1)))
        outputs = []
        for _ in range(steps):
            h = self.cell(x, h)
            x = T.tanh(self.head(h))
            outputs.append(x)
        return T.concat(outputs, axis=1)


class TCNGenerator(SNSGenerator):
    """Dense expansion of the noise to a (channels, T) seed map, then one TCN block."""

    def __init__(self, noise_dim: int, length: int, channels: int, kernel_size: int, dilation: int):
        super().__init__(noise_dim, (length,))
        self.length = length
        self.channels = channels
        self.seed = Dense(noise_dim, channels * length)
        self.block = TCNBlock(channels, channels, kernel_size, dilation)
        self.head = CausalConv1d(channels, 1, 1)

    def forward(self, z) -> Tensor:
        z = self._check_noise(z)
        seed = T.leaky_relu(self.seed(z)).reshape(z.shape[0], self.channels, self.length)
        return T.tanh(self.head(self.block(seed))).reshape(z.shape[0], self.length)


class ImageGenerator(SNSGenerator):
    """Dense seed map followed by stride-2 transposed convolutions, each doubling the map."""

    def __init__(self, noise_dim: int, image_shape: tuple, layers: int, base_channels: int):
        super().__init__(noise_dim, image_shape)
        channels, height, width = image_shape
        scale = 2 ** layers
        if height % scale or width % scale:
            raise ConfigError(f"image {height}x{width} not divisible by 2^{layers}")
        self.seed_hw = (height // scale, width // scale)
        widths = [base_channels * 2 ** (layers - 1 - i) for i in range(layers)] + [channels]
        self.seed_channels = widths[0]
        self.seed = Dense(noise_dim, widths[0] * self.seed_hw[0] * self.seed_hw[1])
        self.deconvs = [ConvTranspose2d(widths[i], widths[i + 1], 4, 2, 1) for i in range(layers)]

    def forward(self, z) -> Tensor:
        z = self._check_noise(z)
        x = T.leaky_relu(self.seed(z)).reshape(z.shape[0], self.seed_channels, *self.seed_hw)
        for i, layer in enumerate(self.deconvs):
            x = layer(x)
            x = T.tanh(x) if i == len(self.deconvs) - 1 else T.leaky_relu(x)
        return x


# -- SNS discriminators (class-blind) ----------------------------------------------


class SNSDiscriminator(Module):
    family = "sns"

    def __init__(self, input_shape: tuple):
        self.input_shape = tuple(input_shape)


class LinearDiscriminator(SNSDiscriminator):
    def __init__(self, length: int, hidden: int):
        super().__init__((length,))
        self.hidden = Dense(length, hidden)
        self.out = Dense(hidden, 1)

    def forward(self, sample) -> Tensor:
        x = T.as_tensor(sample)
        _check_series(x, self.input_shape[0], "discriminator")
        return self.out(T.leaky_relu(self.hidden(x))).reshape(x.shape[0])


class RNNDiscriminator(SNSDiscriminator):
    def __init__(self, length: int, hidden: int):
        super().__init__((length,))
        self.cell = GRUCell(1, hidden)
        self.out = Dense(hidden, 1)

    def forward(self, sample) -> Tensor:
        x = T.as_tensor(sample)
        _check_series(x, None, "discriminator")
        h = self.cell.initial_state(x.shape[0])
        for t in range(x.shape[1]):
            h = self.cell(x[:, t:t + 1], h)
        return self.out(h).reshape(x.shape[0])


class TCNDiscriminator(SNSDiscriminator):
    def __init__(self, length: int, channels: int, kernel_size: int, dilation: int):
        super().__init__((length,))
        self.channels = channels
        self.block = TCNBlock(1, channels, kernel_size, dilation)
        self.out = Dense(channels * length, 1)

    def forward(self, sample) -> Tensor:
        x = T.as_tensor(sample)
        _check_series(x, self.input_shape[0], "discriminator")
        batch, length = x.shape
        feats = self.block(x.reshape(batch, 1, length)).reshape(batch, self.channels * length)
        return self.out(feats).reshape(batch)


class ImageDiscriminator(SNSDiscriminator):
    def __init__(self, image_shape: tuple, layers: int, base_channels: int):
        super().__init__(image_shape)
        channels, height, width = image_shape
        widths = [channels] + [base_channels * 2 ** i for i in range(layers)]
        self.convs = [Conv2d(widths[i], widths[i + 1], 4, 2, 1) for i in range(layers)]
        for layer in self.convs:
            height, width = layer.output_size(height), layer.output_size(width)
        if height < 1 or width < 1:
            raise ConfigError(f"image {image_shape} too small for {layers} stride-2 convolutions")
        self.flat = widths[-1] * height * width
        self.out = Dense(self.flat, 1)

    def forward(self, sample) -> Tensor:
        x = T.as_tensor(sample)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ShapeError(f"discriminator expects (batch, {self.input_shape}), got {x.shape}")
        for layer in self.convs:
            x = T.leaky_relu(layer(x))
        return self.out(x.reshape(x.shape[0], self.flat)).reshape(x.shape[0])


# -- RCGAN -------------------------------------------------------------------------


class RCGANGenerator(Module):
    family = "rcgan"

    def __init__(self, noise_dim: int, num_classes: int, length: int):
        self.noise_dim = noise_dim
        self.num_classes = num_classes
        self.length = length
        self.output_shape = (length,)

    def step_inputs(self, noise_steps, classes) -> Tensor:
        """Per-step inputs ``[noise_t || one_hot(c)]`` of shape (batch, T, noise_dim + N)."""
        noise = T.as_tensor(noise_steps)
        if noise.ndim != 3 or noise.shape[2] != self.noise_dim:
            raise ShapeError(f"noise must be (batch, T, {self.noise_dim}), got {noise.shape}")
        batch, length, _ = noise.shape
        cond = np.broadcast_to(_classes_for(classes, batch, self.num_classes)[:, None, :],
                               (batch, length, self.num_classes))
        return T.concat([noise, Tensor(cond)], axis=2)


def _classes_for(classes, batch: int, num_classes: int) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int64)
    if classes.ndim == 0:
        classes = np.full(batch, int(classes))
    if classes.shape != (batch,):
        raise ShapeError(f"need one class per row ({batch}), got shape {classes.shape}")
    return _onehot(classes, num_classes)


class RCGANRNNGenerator(RCGANGenerator):
    def __init__(self, noise_dim: int, num_classes: int, length: int, hidden: int):
        super().__init__(noise_dim, num_classes, length)
        self.cell = GRUCell(noise_dim + num_classes, hidden)
        self.head = Dense(hidden, 1)

    def forward(self, noise_steps, classes) -> Tensor:
        inputs = self.step_inputs(noise_steps, classes)
        batch, length, _ = inputs.shape
        h = self.cell.initial_state(batch)
        outputs = []
        for t in range(length):
            h = self.cell(inputs[:, t], h)
            outputs.append(T.tanh(self.head(h)))
        return T.concat(outputs, axis=1)


class RCGANTCNGenerator(RCGANGenerator):
    def __init__(self, noise_dim: int, num_classes: int, length: int, channels: int,
                 kernel_size: int, dilation: int):
        super().__init__(noise_dim, num_classes, length)
        self.block = TCNBlock(noise_dim + num_classes, channels, kernel_size, dilation)
        self.head = CausalConv1d(channels, 1, 1)

    def forward(self, noise_steps, classes) -> Tensor:
        inputs = self.step_inputs(noise_steps, classes).transpose(0, 2, 1)
        batch, _, length = inputs.shape
        return T.tanh(self.head(self.block(inputs))).reshape(batch, length)


class RCGANDiscriminator(Module):
    family = "rcgan"

    def __init__(self, num_classes: int, length: int):
        self.num_classes = num_classes
        self.input_shape = (length,)

    def step_inputs(self, series, classes) -> Tensor:
        x = T.as_tensor(series)
        _check_series(x, self.input_shape[0], "RCGAN discriminator")
        batch, length = x.shape
        cond = np.broadcast_to(_classes_for(classes, batch, self.num_classes)[:, None, :],
                               (batch, length, self.num_classes))
        return T.concat([x.reshape(batch, length, 1), Tensor(cond)], axis=2)


class RCGANRNNDiscriminator(RCGANDiscriminator):
    def __init__(self, num_classes: int, length: int, hidden: int):
        super().__init__(num_classes, length)
        self.cell = GRUCell(1 + num_classes, hidden)
        self.out = Dense(hidden, 1)

    def forward(self, series, classes) -> Tensor:
        inputs = self.step_inputs(series, classes)
        batch, length, _ = inputs.shape
        h = self.cell.initial_state(batch)
        logits = []
        for t in range(length):
            h = self.cell(inputs[:, t], h)
            logits.append(self.out(h))
        return T.concat(logits, axis=1)


class RCGANTCNDiscriminator(RCGANDiscriminator):
    def __init__(self, num_classes: int, length: int, channels: int, kernel_size: int, dilation: int):
        super().__init__(num_classes, length)
        self.block = TCNBlock(1 + num_classes, channels, kernel_size, dilation)
        self.out = CausalConv1d(channels, 1, 1)

    def forward(self, series, classes) -> Tensor:
        inputs = self.step_inputs(series, classes).transpose(0, 2, 1)
        batch, _, length = inputs.shape
        return self.out(self.block(inputs)).reshape(batch, length)


# -- construction and generation ---------------------------------------------------


def build(variant: ModelVariant, data_shape, noise_spec: NoiseSpec,
          rng: np.random.Generator | int = 0):
    """Construct and initialise a (generator, discriminator) pair.

    ``data_shape`` is ``(T,)`` for series variants and ``(ch, H, W)`` for
    images.  The generator is initialised before the discriminator from the
    same stream.
    """
    if isinstance(variant, str):
        variant = ModelVariant(variant)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    data_shape = tuple(int(d) for d in data_shape)
    if variant.is_image and len(data_shape) != 3:
        raise ConfigError(f"{variant.tag} needs an image shape (ch, H, W), got {data_shape}")
    if not variant.is_image and len(data_shape) != 1:
        raise ConfigError(f"{variant.tag} needs a series shape (T,), got {data_shape}")

    v, n = variant, noise_spec.num_classes
    if v.tag == "SNS-Linear":
        length = data_shape[0]
        gen = LinearGenerator(noise_spec.dim, length, v.hidden_size)
        dis = LinearDiscriminator(length, v.hidden_size)
    elif v.tag == "SNS-RNN":
        length = data_shape[0]
        gen = RNNGenerator(noise_spec.dim, length, v.hidden_size)
        dis = RNNDiscriminator(length, v.hidden_size)
    elif v.tag == "SNS-TCN":
        length = data_shape[0]
        gen = TCNGenerator(noise_spec.dim, length, v.tcn_channels, v.kernel_size, v.dilation)
        dis = TCNDiscriminator(length, v.tcn_channels, v.kernel_size, v.dilation)
    elif v.tag == "SNS-Image":
        gen = ImageGenerator(noise_spec.dim, data_shape, v.image_layers, v.image_base_channels)
        dis = ImageDiscriminator(data_shape, v.image_layers, v.image_base_channels)
    elif v.tag == "RCGAN-RNN":
        length = data_shape[0]
        gen = RCGANRNNGenerator(v.rcgan_noise_dim, n, length, v.hidden_size)
        dis = RCGANRNNDiscriminator(n, length, v.hidden_size)
    else:
        length = data_shape[0]
        gen = RCGANTCNGenerator(v.rcgan_noise_dim, n, length, v.tcn_channels, v.kernel_size, v.dilation)
        dis = RCGANTCNDiscriminator(n, length, v.tcn_channels, v.kernel_size, v.dilation)
    gen.variant = dis.variant = v
    init_params(gen, rng)
    init_params(dis, rng)
    return gen, dis


def sns_generate(gen: SNSGenerator, z_c) -> Tensor:
    return gen(z_c)


def sns_discriminate(dis: SNSDiscriminator, sample) -> Tensor:
    return dis(sample)


def rcgan_generate(gen: RCGANGenerator, noise_steps, c) -> Tensor:
    return gen(noise_steps, c)


def rcgan_discriminate(dis: RCGANDiscriminator, series, c) -> Tensor:
    return dis(series, c)


def rcgan_noise(gen: RCGANGenerator, batch: int, rng: np.random.Generator) -> Tensor:
    return Tensor(rng.normal(size=(batch, gen.length, gen.noise_dim)))


def generate(gen, noise_spec: NoiseSpec, classes, rng: np.random.Generator) -> Tensor:
    """Generate one sample per entry of ``classes``, whichever family ``gen`` is."""
    classes = np.asarray(classes, dtype=np.int64)
    if gen.family == "sns":
        return gen(sample_batch(noise_spec, classes, rng))
    return gen(rcgan_noise(gen, len(classes), rng), classes)


def generate_for_class(gen, noise_spec: NoiseSpec, c: int, count: int,
                       rng: np.random.Generator, batch_size: int = 256) -> np.ndarray:
    """``count`` samples of class ``c`` as a plain array, without recording a tape."""
    c = noise_spec.check_class(c)
    chunks = []
    with T.no_grad():
        for start in range(0, count, batch_size):
            rows = min(batch_size, count - start)
            chunks.append(generate(gen, noise_spec, np.full(rows, c), rng).data)
    if not chunks:
        return np.zeros((0,) + tuple(gen.output_shape))
    return np.concatenate(chunks, axis=0)
