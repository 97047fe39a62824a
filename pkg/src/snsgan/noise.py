"""Class-conditioned noise built by mean-shifting class-linked dimensions.

The noise vector has ``num_classes * block_size`` entries laid out as
contiguous per-class blocks.  A sample for class ``c`` is a standard
Gaussian draw (scaled by ``base_std``) with ``shift`` added to every entry of
block ``c``.  With ``block_size=1`` and ``shift=1`` this is exactly
``z + one_hot(c)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class NoiseSpec:
    num_classes: int
    block_size: int = 1
    shift: float = 1.0
    base_std: float = 1.0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {self.block_size}")
        if not self.base_std > 0:
            raise ConfigError(f"base_std must be > 0, got {self.base_std}")

    @property
    def dim(self) -> int:
        return self.num_classes * self.block_size

    def check_class(self, c) -> int:
        if isinstance(c, (bool, np.bool_)) or not isinstance(c, (int, np.integer)):
            raise DomainError(f"class must be an integer, got {c!r}")
        if not 0 <= c < self.num_classes:
            raise DomainError(f"class {c} outside [0, {self.num_classes})")
        return int(c)


def block_one_hot(spec: NoiseSpec, c: int) -> np.ndarray:
    """The mean vector of class ``c``: ``shift`` on block ``c``, zero elsewhere."""
    c = spec.check_class(c)
    out = np.zeros(spec.dim)
    out[c * spec.block_size:(c + 1) * spec.block_size] = spec.shift
    return out


def base_draw(spec: NoiseSpec, rng: np.random.Generator, rows: int | None = None) -> np.ndarray:
    """Unshifted Gaussian noise, consuming the rng exactly as the samplers do."""
    size = spec.dim if rows is None else (rows, spec.dim)
    return rng.normal(0.0, spec.base_std, size=size)


def sample_structured(spec: NoiseSpec, c: int, rng: np.random.Generator) -> np.ndarray:
    c = spec.check_class(c)
    z = base_draw(spec, rng)
    z[c * spec.block_size:(c + 1) * spec.block_size] += spec.shift
    return z


def sample_batch(spec: NoiseSpec, classes, rng: np.random.Generator) -> Tensor:
    """One independent structured draw per entry of ``classes``.

    Rows are drawn in order from a single (rows, dim) normal draw, so a batch
    of one consumes the stream exactly like :func:`sample_structured`.
    """
    classes = np.asarray(classes)
    if classes.ndim != 1:
        raise ShapeError(f"classes must be a vector, got shape {classes.shape}")
    checked = [spec.check_class(c) for c in classes.tolist()] if classes.size else []
    z = base_draw(spec, rng, rows=len(checked))
    b = spec.block_size
    offsets = np.asarray(checked, dtype=np.int64)[:, None] * b + np.arange(b)
    np.add.at(z, (np.arange(len(checked))[:, None], offsets), spec.shift)
    return Tensor(z)


def infer_class_from_noise(spec: NoiseSpec, z_c) -> int:
    """Class whose block has the largest mean; ties go to the lowest index."""
    z_c = np.asarray(z_c.data if isinstance(z_c, Tensor) else z_c, dtype=np.float64)
    if z_c.shape != (spec.dim,):
        raise ShapeError(f"noise vector must have shape ({spec.dim},), got {z_c.shape}")
    block_means = z_c.reshape(spec.num_classes, spec.block_size).mean(axis=1)
    return int(np.argmax(block_means))
