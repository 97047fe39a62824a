"""Adversarial training: losses, Adam, and the alternating update loop."""
from __future__ import annotations

import contextlib
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError, NumericError, ShapeError
from .models import generate
from .noise import NoiseSpec
from .tensor import Tensor

logger = logging.getLogger(__name__)

G_LOSS_MODES = ("minimax", "non_saturating")


@dataclass
class TrainConfig:
    learning_rate: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.99
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 1
    d_steps_per_g_step: int = 1
    g_loss: str = "non_saturating"
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if self.batch_size < 1 or self.epochs < 0 or self.d_steps_per_g_step < 1:
            raise ConfigError("batch_size and d_steps_per_g_step must be >= 1, epochs >= 0")
        if self.g_loss not in G_LOSS_MODES:
            raise ConfigError(f"unknown generator loss mode {self.g_loss!r}")


# -- losses ------------------------------------------------------------------------


def d_loss(real_logits, fake_logits) -> Tensor:
    """-(mean log D(real) + mean log(1 - D(fake))); per-step logits are averaged jointly."""
    real_logits, fake_logits = T.as_tensor(real_logits), T.as_tensor(fake_logits)
    return (T.bce_with_logits(real_logits, np.ones(real_logits.shape))
            + T.bce_with_logits(fake_logits, np.zeros(fake_logits.shape)))


def g_loss(fake_logits, mode: str = "non_saturating") -> Tensor:
    fake_logits = T.as_tensor(fake_logits)
    if mode == "minimax":
        # +mean log(1 - D(G(z))), the generator's side of the value function
        return -T.bce_with_logits(fake_logits, np.zeros(fake_logits.shape))
    if mode == "non_saturating":
        return T.bce_with_logits(fake_logits, np.ones(fake_logits.shape))
    raise ConfigError(f"unknown generator loss mode {mode!r}")


# -- Adam --------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(state: AdamState, params, grads, lr: float, beta1: float, beta2: float,
              eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, in place.  A ``None`` gradient counts as zero."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeError("Adam state, params and grads differ in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} differs from parameter {p.shape}")
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, params, lr=0.0002, beta1=0.5, beta2=0.99, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState.for_params(self.params)

    @classmethod
    def from_config(cls, params, config: TrainConfig) -> "Adam":
        return cls(params, config.learning_rate, config.beta1, config.beta2, config.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        adam_step(self.state, self.params, [p.grad for p in self.params],
                  self.lr, self.beta1, self.beta2, self.eps)


# -- training loop -----------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    d_loss: float
    g_loss: float
    wall_ms: float
    batches: int
    evaluation: Optional[dict] = None


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)

    @property
    def d_losses(self) -> list:
        return [r.d_loss for r in self.epochs]

    @property
    def g_losses(self) -> list:
        return [r.g_loss for r in self.epochs]


@contextlib.contextmanager
def frozen(module):
    """Stop gradients from accumulating into ``module``'s parameters."""
    params = module.parameters()
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p in params:
            p.requires_grad = True


def _discriminate(dis, samples, classes):
    return dis(samples) if dis.family == "sns" else dis(samples, classes)


def _check_finite(loss: Tensor, what: str, epoch: int, batch: int, other: dict) -> float:
    value = loss.item()
    if not np.isfinite(value):
        detail = ", ".join(f"{k}={v:.6g}" for k, v in other.items())
        raise NumericError(f"non-finite {what} at epoch {epoch} batch {batch} ({detail})")
    return value


def train_gan(gen, dis, dataset, noise_spec: NoiseSpec, config: TrainConfig,
              callbacks: Iterable = (), checkpoint_every: int = 0) -> TrainReport:
    """Alternate discriminator and generator updates over ``dataset``.

    SNS fakes are generated from structured noise with uniformly drawn
    classes and the discriminator is never given a label.  RCGAN fakes reuse
    the labels of the real batch as their conditions.  Callback objects may
    define ``on_epoch_end(record)`` (its return value is stored on the
    record) and ``on_checkpoint(snapshot)``.
    """
    x, y = np.asarray(dataset.x), np.asarray(dataset.y)
    n = len(x)
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    if gen.family != dis.family:
        raise ConfigError("generator and discriminator come from different families")
    if tuple(x.shape[1:]) != tuple(gen.output_shape):
        raise ShapeError(f"dataset samples {x.shape[1:]} do not match generator output {gen.output_shape}")
    callbacks = list(callbacks)
    rng = np.random.default_rng(config.seed)
    opt_g = Adam.from_config(gen.parameters(), config)
    opt_d = Adam.from_config(dis.parameters(), config)
    report = TrainReport()
    sns = gen.family == "sns"

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n)
        d_total = g_total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            real = Tensor(x[idx])
            labels = y[idx]
            rows = len(idx)

            for _ in range(config.d_steps_per_g_step):
                fake_classes = rng.integers(0, noise_spec.num_classes, size=rows) if sns else labels
                with T.no_grad():
                    fake = generate(gen, noise_spec, fake_classes, rng)
                loss_d = d_loss(_discriminate(dis, real, labels), _discriminate(dis, fake, fake_classes))
                opt_d.zero_grad()
                loss_d.backward()
                opt_d.step()
            d_value = _check_finite(loss_d, "discriminator loss", epoch, batches, {})

            fake_classes = rng.integers(0, noise_spec.num_classes, size=rows) if sns else labels
            fake = generate(gen, noise_spec, fake_classes, rng)
            with frozen(dis):
                loss_g = g_loss(_discriminate(dis, fake, fake_classes), config.g_loss)
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()
            g_value = _check_finite(loss_g, "generator loss", epoch, batches, {"d_loss": d_value})

            d_total += d_value
            g_total += g_value
            batches += 1

        record = EpochRecord(epoch, d_total / batches, g_total / batches,
                             (time.perf_counter() - started) * 1000.0, batches)
        for cb in callbacks:
            hook = getattr(cb, "on_epoch_end", None)
            if hook is not None:
                result = hook(record)
                if result is not None:
                    record.evaluation = result
        if checkpoint_every and epoch % checkpoint_every == 0:
            snapshot = {"epoch": epoch, "generator": gen.state_dict(), "discriminator": dis.state_dict()}
            for cb in callbacks:
                hook = getattr(cb, "on_checkpoint", None)
                if hook is not None:
                    hook(snapshot)
        report.epochs.append(record)
        logger.debug("epoch %d d_loss=%.4f g_loss=%.4f", epoch, record.d_loss, record.g_loss)
    return report
