"""Labelled series/image datasets: UCR TSV and MNIST IDX readers, synthetic sinusoids, normalisation."""
from __future__ import annotations

import dataclasses
import gzip
import os
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ConsistencyError, DomainError, FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Normalizer:
    """Affine map ``(x - center) / scale`` fitted on a train split."""

    mode: str
    center: float
    scale: float

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.center) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.scale + self.center


@dataclass(frozen=True)
class _Labeled:
    x: np.ndarray
    y: np.ndarray
    num_classes: int
    name: str = ""
    x_test: Optional[np.ndarray] = None
    y_test: Optional[np.ndarray] = None
    normalizer: Optional[Normalizer] = None

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ConsistencyError(f"{len(self.x)} samples but {len(self.y)} labels")
        if (self.x_test is None) != (self.y_test is None):
            raise ConsistencyError("test samples and test labels must be given together")
        if self.x_test is not None and len(self.x_test) != len(self.y_test):
            raise ConsistencyError(f"{len(self.x_test)} test samples but {len(self.y_test)} labels")
        for labels in (self.y, self.y_test):
            if labels is not None and labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ConsistencyError(f"labels must lie in [0, {self.num_classes})")

    @property
    def has_test(self) -> bool:
        return self.x_test is not None

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.x.shape[1:])

    @property
    def sizes(self) -> tuple:
        return len(self.x), (len(self.x_test) if self.has_test else 0)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LabeledSeriesDataset(_Labeled):
    """Univariate series, ``x`` of shape (n, T)."""

    @property
    def series(self) -> np.ndarray:
        return self.x

    @property
    def length(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class LabeledImageDataset(_Labeled):
    """Images, ``x`` of shape (n, ch, H, W) with pixels in [-1, 1]."""

    @property
    def images(self) -> np.ndarray:
        return self.x


# -- UCR ---------------------------------------------------------------------------


def _parse_ucr(path) -> tuple:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    labels, rows = [], []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno}: non-numeric field ({exc})") from None
            if len(values) < 2:
                raise FormatError(f"{path}: row {lineno}: need a label and at least one value")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise FormatError(f"{path}: row {lineno}: ragged row with {len(values) - 1} values, "
                                  f"expected {width - 1}")
            if not np.all(np.isfinite(values)):
                raise FormatError(f"{path}: row {lineno}: non-finite value")
            labels.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return np.array(labels), np.array(rows, dtype=np.float64)


def load_ucr_tsv(path, test_path=None, name: Optional[str] = None) -> LabeledSeriesDataset:
    """Read a UCR archive TSV (label first, then T values per line).

    Labels are re-indexed to 0..N-1 in sorted order of their original
    values.  When ``test_path`` is given the test file shares the train
    file's label map and must have the same length.
    """
    raw_labels, x = _parse_ucr(path)
    originals = np.unique(raw_labels)
    y = np.searchsorted(originals, raw_labels)
    x_test = y_test = None
    if test_path is not None:
        raw_test, x_test = _parse_ucr(test_path)
        if x_test.shape[1] != x.shape[1]:
            raise ConsistencyError(f"test series length {x_test.shape[1]} differs from train {x.shape[1]}")
        unknown = np.setdiff1d(raw_test, originals)
        if unknown.size:
            raise ConsistencyError(f"test labels {unknown.tolist()} never appear in the train file")
        y_test = np.searchsorted(originals, raw_test)
    if name is None:
        name = os.path.basename(str(path)).split("_")[0].split(".")[0]
    return LabeledSeriesDataset(x, y.astype(np.int64), len(originals), name, x_test,
                                None if y_test is None else y_test.astype(np.int64))


def load_ucr_dir(root, name: str) -> LabeledSeriesDataset:
    """Load ``root/name/name_TRAIN.tsv`` and its ``_TEST`` sibling, the archive's own layout."""
    base = os.path.join(str(root), name)
    train = os.path.join(base, f"{name}_TRAIN.tsv")
    test = os.path.join(base, f"{name}_TEST.tsv")
    return load_ucr_tsv(train, test if os.path.exists(test) else None, name=name)


def write_ucr_tsv(path, series: np.ndarray, labels: Sequence) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(labels, np.asarray(series)):
            fh.write("\t".join([str(label)] + [repr(float(v)) for v in row]) + "\n")


# -- MNIST IDX ---------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "rb") as fh:
            return fh.read()
    except (EOFError, gzip.BadGzipFile) as exc:
        raise FormatError(f"{path}: corrupt compressed file ({exc})") from None


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = _read_bytes(path)
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise FormatError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = header + int(np.prod(dims))
    if len(raw) != expected:
        raise FormatError(f"{path}: {len(raw)} bytes, header promises {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def _mnist_pair(images_path, labels_path) -> tuple:
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise ConsistencyError(f"{images_path} holds {len(images)} images but "
                               f"{labels_path} holds {len(labels)} labels")
    return pixels_to_unit(images)[:, None], labels.astype(np.int64)


def pixels_to_unit(pixels: np.ndarray) -> np.ndarray:
    """Map bytes 0..255 onto [-1, 1] exactly at both ends."""
    return np.asarray(pixels, dtype=np.float64) / 127.5 - 1.0


def load_mnist_idx(images_path, labels_path, test_images_path=None, test_labels_path=None,
                   name: str = "MNIST") -> LabeledImageDataset:
    """Read IDX image/label files (optionally gzip-compressed) into (n, 1, H, W) in [-1, 1].

    A file whose size disagrees with its header is rejected outright.
    """
    x, y = _mnist_pair(images_path, labels_path)
    x_test = y_test = None
    if test_images_path is not None:
        x_test, y_test = _mnist_pair(test_images_path, test_labels_path)
    top = max(int(y.max(initial=0)), int(y_test.max(initial=0)) if y_test is not None else 0)
    return LabeledImageDataset(x, y, top + 1, name, x_test, y_test)


def write_idx(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise FormatError("IDX writer only handles unsigned bytes")
    magic = {1: IDX_LABELS_MAGIC, 3: IDX_IMAGES_MAGIC}.get(array.ndim)
    if magic is None:
        raise FormatError(f"unsupported IDX rank {array.ndim}")
    payload = struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(payload)


def select_classes(dataset: _Labeled, classes: Sequence[int], limit: Optional[int] = None):
    """Keep only ``classes`` (re-indexed in the given order), optionally the first ``limit`` train rows."""
    classes = list(classes)
    remap = {c: i for i, c in enumerate(classes)}

    def pick(x, y, cap=None):
        keep = np.flatnonzero(np.isin(y, classes))
        if cap is not None:
            keep = keep[:cap]
        return x[keep], np.array([remap[int(v)] for v in y[keep]], dtype=np.int64)

    x, y = pick(dataset.x, dataset.y, limit)
    x_test, y_test = (pick(dataset.x_test, dataset.y_test) if dataset.has_test else (None, None))
    return dataset.replace(x=x, y=y, x_test=x_test, y_test=y_test, num_classes=len(classes))


# -- synthetic ---------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Class ``k`` is ``amplitude_k * sin(2 pi f_k t / T + phase_k)`` plus Gaussian noise.

    Frequencies default to ``2k + 1`` cycles per window.
    """

    num_classes: int = 2
    length: int = 32
    n_samples: int = 400
    n_test: int = 200
    noise_std: float = 0.1
    frequencies: Optional[tuple] = None
    amplitudes: Optional[tuple] = None
    phases: Optional[tuple] = None

    def __post_init__(self):
        if self.num_classes < 1 or self.length < 1 or self.n_samples < 1 or self.n_test < 0:
            raise ConfigError("synthetic spec sizes must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        freqs = self.class_frequencies()
        if len(freqs) != self.num_classes or len(set(freqs)) != len(freqs):
            raise ConfigError("need one distinct frequency per class")
        for name in ("amplitudes", "phases"):
            value = getattr(self, name)
            if value is not None and len(value) != self.num_classes:
                raise ConfigError(f"{name} needs one entry per class")

    def class_frequencies(self) -> tuple:
        if self.frequencies is not None:
            return tuple(float(f) for f in self.frequencies)
        return tuple(2.0 * k + 1.0 for k in range(self.num_classes))

    def clean_series(self, k: int) -> np.ndarray:
        t = np.arange(self.length)
        amp = 1.0 if self.amplitudes is None else self.amplitudes[k]
        phase = 0.0 if self.phases is None else self.phases[k]
        return amp * np.sin(2.0 * np.pi * self.class_frequencies()[k] * t / self.length + phase)


def synth_make(spec: SyntheticSpec, rng) -> LabeledSeriesDataset:
    """Balanced noisy sinusoids with a held-out split, deterministic in ``rng``."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    clean = np.stack([spec.clean_series(k) for k in range(spec.num_classes)])

    def draw(n):
        labels = rng.permutation(np.arange(n) % spec.num_classes)
        series = clean[labels].copy()
        if spec.noise_std > 0:
            series += rng.normal(0.0, spec.noise_std, size=(n, spec.length))
        return series, labels.astype(np.int64)

    x, y = draw(spec.n_samples)
    x_test, y_test = draw(spec.n_test) if spec.n_test else (None, None)
    return LabeledSeriesDataset(x, y, spec.num_classes, "synthetic", x_test, y_test)


# -- normalisation -----------------------------------------------------------------


def fit_normalizer(x: np.ndarray, mode: str = "minmax_pm1") -> Normalizer:
    x = np.asarray(x, dtype=np.float64)
    if mode == "minmax_pm1":
        lo, hi = float(x.min()), float(x.max())
        if not hi > lo:
            raise DomainError(f"degenerate value range [{lo}, {hi}] cannot be scaled to [-1, 1]")
        return Normalizer(mode, (hi + lo) / 2.0, (hi - lo) / 2.0)
    if mode == "zscore":
        std = float(x.std())
        if not std > 0:
            raise DomainError("zero standard deviation cannot be z-scored")
        return Normalizer(mode, float(x.mean()), std)
    raise ConfigError(f"unknown normalisation mode {mode!r}")


def normalize(dataset: _Labeled, mode: str = "minmax_pm1") -> _Labeled:
    """Fit on the train split only and apply the same map to the test split."""
    norm = fit_normalizer(dataset.x, mode)
    x_test = norm.apply(dataset.x_test) if dataset.has_test else None
    return dataset.replace(x=norm.apply(dataset.x), x_test=x_test, normalizer=norm)


def denormalize(dataset_or_array, normalizer: Optional[Normalizer] = None):
    """Undo ``normalize``, for a dataset or for a raw array given its normalizer."""
    if isinstance(dataset_or_array, _Labeled):
        ds = dataset_or_array
        if ds.normalizer is None:
            return ds
        x_test = ds.normalizer.invert(ds.x_test) if ds.has_test else None
        return ds.replace(x=ds.normalizer.invert(ds.x), x_test=x_test, normalizer=None)
    if normalizer is None:
        raise ConfigError("denormalizing an array needs its normalizer")
    return normalizer.invert(dataset_or_array)
