"""Classifier-based sample quality metrics.

A small classifier trained on the real data plays the role a pretrained
image network plays for IS/FID: its softmax feeds an inception-like score
and its penultimate activations feed a Frechet distance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist
from scipy.optimize import linear_sum_assignment
from scipy.special import rel_entr

from . import tensor as T
from .errors import ConfigError, DomainError, MetricUnreliableError, ShapeError
from .models import generate_for_class
from .nn import Conv2d, Dense, Module, init_params
from .noise import NoiseSpec
from .tensor import Tensor
from .training import Adam


@dataclass
class EvalConfig:
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 0.001
    feature_dim: int = 128
    conv_channels: tuple = (8, 16)
    # stop early once the mean train cross-entropy of an epoch drops below this
    tolerance: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.feature_dim < 1:
            raise ConfigError("eval epochs, batch_size and feature_dim must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("eval learning_rate must be positive")


class SeriesNet(Module):
    def __init__(self, length: int, num_classes: int, feature_dim: int):
        self.hidden = Dense(length, feature_dim)
        self.out = Dense(feature_dim, num_classes)

    def features(self, x) -> Tensor:
        return T.relu(self.hidden(x))

    def forward(self, x) -> Tensor:
        return self.out(self.features(x))


class ImageNet(Module):
    def __init__(self, image_shape: tuple, num_classes: int, feature_dim: int, channels: tuple):
        ch, h, w = image_shape
        self.conv1 = Conv2d(ch, channels[0], 4, 2, 1)
        self.conv2 = Conv2d(channels[0], channels[1], 4, 2, 1)
        h, w = self.conv2.output_size(self.conv1.output_size(h)), self.conv2.output_size(self.conv1.output_size(w))
        self.flat = channels[1] * h * w
        self.hidden = Dense(self.flat, feature_dim)
        self.out = Dense(feature_dim, num_classes)

    def features(self, x) -> Tensor:
        x = T.leaky_relu(self.conv1(x))
        x = T.leaky_relu(self.conv2(x))
        return T.relu(self.hidden(x.reshape(x.shape[0], self.flat)))

    def forward(self, x) -> Tensor:
        return self.out(self.features(x))


@dataclass
class EvalClassifier:
    net: Module
    num_classes: int
    sample_shape: tuple
    test_accuracy: float
    per_class_test_accuracy: np.ndarray
    epochs_run: int

    @property
    def feature_dim(self) -> int:
        return self.net.out.weight.shape[1]

    @property
    def reliable(self) -> bool:
        return self.test_accuracy >= 1.5 / self.num_classes

    def require_reliable(self) -> None:
        if not self.reliable:
            raise MetricUnreliableError(
                f"classifier test accuracy {self.test_accuracy:.3f} is below 1.5/N = "
                f"{1.5 / self.num_classes:.3f}; metrics would be meaningless")

    def _batched(self, x, fn, batch_size=512) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if tuple(x.shape[1:]) != tuple(self.sample_shape):
            raise ShapeError(f"classifier expects samples of shape {self.sample_shape}, got {x.shape[1:]}")
        with T.no_grad():
            return np.concatenate([fn(Tensor(x[i:i + batch_size])).data
                                   for i in range(0, len(x), batch_size)], axis=0)

    def logits(self, x) -> np.ndarray:
        return self._batched(x, self.net)

    def predict_proba(self, x) -> np.ndarray:
        return self._batched(x, lambda t: T.softmax(self.net(t)))

    def predict(self, x) -> np.ndarray:
        return self.logits(x).argmax(axis=1)

    def features(self, x) -> np.ndarray:
        return self._batched(x, self.net.features)


def train_eval_classifier(dataset, config: Optional[EvalConfig] = None, seed: int = 0,
                          allow_unreliable: bool = False) -> EvalClassifier:
    """Fit the scoring classifier on the train split and measure it on the test split."""
    config = config or EvalConfig()
    if dataset.num_classes < 2:
        raise DomainError("an evaluation classifier needs at least 2 classes")
    if not dataset.has_test:
        raise ConfigError("evaluation classifier needs a dataset with a test split")
    shape = dataset.sample_shape
    if len(shape) == 1:
        net = SeriesNet(shape[0], dataset.num_classes, config.feature_dim)
    elif len(shape) == 3:
        net = ImageNet(shape, dataset.num_classes, config.feature_dim, tuple(config.conv_channels))
    else:
        raise ShapeError(f"unsupported sample shape {shape}")
    rng = np.random.default_rng(seed)
    init_params(net, rng, scheme="he")
    opt = Adam(net.parameters(), lr=config.learning_rate, beta1=0.9, beta2=0.999)
    x, y = np.asarray(dataset.x, dtype=np.float64), np.asarray(dataset.y)
    epochs_run = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss = T.cross_entropy(net(Tensor(x[idx])), y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        epochs_run += 1
        if total / len(x) < config.tolerance:
            break
    clf = EvalClassifier(net, dataset.num_classes, shape, 0.0, np.zeros(dataset.num_classes), epochs_run)
    pred = clf.predict(dataset.x_test)
    clf.test_accuracy = float(np.mean(pred == dataset.y_test))
    clf.per_class_test_accuracy = np.array([
        np.mean(pred[dataset.y_test == c] == c) if np.any(dataset.y_test == c) else np.nan
        for c in range(dataset.num_classes)])
    if not allow_unreliable:
        clf.require_reliable()
    return clf


# -- metrics -----------------------------------------------------------------------


def inception_score_from_probs(probs) -> float:
    """exp(E_x KL(p(y|x) || p(y))) with p(y) the mean of the rows."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"probabilities must be (n, N), got {probs.shape}")
    if len(probs) < 2:
        raise DomainError(f"inception-like score needs at least 2 samples, got {len(probs)}")
    marginal = probs.mean(axis=0)
    # KL is nonnegative; clamping keeps round-off in the marginal from pushing it below 0
    kl = np.maximum(rel_entr(probs, marginal[None, :]).sum(axis=1), 0.0)
    return float(np.exp(kl.mean()))


def inception_like_score(clf: EvalClassifier, samples) -> float:
    clf.require_reliable()
    samples = np.asarray(samples)
    if len(samples) < 2:
        raise DomainError(f"inception-like score needs at least 2 samples, got {len(samples)}")
    return inception_score_from_probs(clf.predict_proba(samples))


def _trace_sqrt_product(c1: np.ndarray, c2: np.ndarray) -> float:
    """Tr (c1 c2)^(1/2) for symmetric PSD inputs.

    c1 c2 is similar to s c2 s with s = c1^(1/2), which is symmetric PSD, so
    its eigenvalues come from ``eigvalsh``; round-off negatives are clamped.
    """
    w, v = np.linalg.eigh(c1)
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    inner = s @ c2 @ s
    ev = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    return float(np.sum(np.sqrt(np.clip(ev, 0.0, None))))


def _moments(features: np.ndarray) -> tuple:
    return features.mean(axis=0), np.atleast_2d(np.cov(features, rowvar=False))


def frechet_from_features(a, b) -> float:
    """|mu_a - mu_b|^2 + Tr(C_a + C_b - 2 (C_a C_b)^(1/2)) over feature rows."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature sets must be (n, d) with equal d, got {a.shape} and {b.shape}")
    need = a.shape[1] + 1
    if len(a) < need or len(b) < need:
        raise DomainError(f"Frechet distance needs at least {need} samples per set "
                          f"(feature dim + 1), got {len(a)} and {len(b)}")
    (mu1, c1), (mu2, c2) = _moments(a), _moments(b)
    # fixed argument order makes the result bit-identical under swapping
    if (c1.tobytes(), mu1.tobytes()) > (c2.tobytes(), mu2.tobytes()):
        mu1, c1, mu2, c2 = mu2, c2, mu1, c1
    diff = mu1 - mu2
    d2 = float(diff @ diff) + float(np.trace(c1) + np.trace(c2)) - 2.0 * _trace_sqrt_product(c1, c2)
    return max(d2, 0.0)


def frechet_feature_distance(clf: EvalClassifier, real_samples, fake_samples) -> float:
    clf.require_reliable()
    return frechet_from_features(clf.features(real_samples), clf.features(fake_samples))


def conditional_accuracy(clf: EvalClassifier, gen, noise_spec: NoiseSpec, per_class_count: int,
                         rng=0) -> tuple:
    """Fraction of class-c generations the classifier labels c; returns (macro mean, per-class array)."""
    clf.require_reliable()
    if per_class_count < 1:
        raise DomainError("per_class_count must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    per_class = np.array([
        np.mean(clf.predict(generate_for_class(gen, noise_spec, c, per_class_count, rng)) == c)
        for c in range(noise_spec.num_classes)])
    return float(per_class.mean()), per_class


def aligned_conditional_accuracy(clf: EvalClassifier, gen, noise_spec: NoiseSpec, per_class_count: int,
                                 rng=0) -> tuple:
    """Conditional accuracy under the best one-to-one relabelling of noise modes.

    Nothing in class-blind adversarial training ties noise mode c to data
    class c, so a generator can separate classes perfectly under a permuted
    labelling.  Returns (accuracy, mapping) where ``mapping[c]`` is the data
    class that noise mode c was matched to.
    """
    clf.require_reliable()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n = noise_spec.num_classes
    confusion = np.zeros((n, clf.num_classes))
    for c in range(n):
        pred = clf.predict(generate_for_class(gen, noise_spec, c, per_class_count, rng))
        confusion[c] = np.bincount(pred, minlength=clf.num_classes) / per_class_count
    rows, cols = linear_sum_assignment(-confusion)
    mapping = np.full(n, -1)
    mapping[rows] = cols
    return float(confusion[rows, cols].sum() / n), mapping


def intra_class_diversity(samples_by_class) -> np.ndarray:
    """Mean pairwise Euclidean distance inside each class."""
    out = []
    for c, samples in enumerate(samples_by_class):
        samples = np.asarray(samples, dtype=np.float64)
        if len(samples) < 2:
            raise DomainError(f"class {c} has {len(samples)} sample(s); diversity needs at least 2")
        out.append(float(pdist(samples.reshape(len(samples), -1)).mean()))
    return np.array(out)


@dataclass
class MetricReport:
    score: float
    frechet_distance: float
    conditional_accuracy: float
    classifier_test_accuracy: float
    per_class_accuracy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intra_class_diversity: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def rows(self) -> list:
        """(metric, class, value) triples; class is "" for whole-set metrics."""
        rows = [("score", "", self.score), ("frechet_distance", "", self.frechet_distance),
                ("conditional_accuracy", "", self.conditional_accuracy)]
        rows += [("conditional_accuracy", c, float(v)) for c, v in enumerate(self.per_class_accuracy)]
        rows += [("intra_class_diversity", c, float(v)) for c, v in enumerate(self.intra_class_diversity)]
        return rows


def evaluate_generator(clf: EvalClassifier, gen, noise_spec: NoiseSpec, real_samples,
                       per_class_count: int, rng=0) -> MetricReport:
    """All metrics for one generator, using ``per_class_count`` generations per class."""
    clf.require_reliable()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    by_class = [generate_for_class(gen, noise_spec, c, per_class_count, rng)
                for c in range(noise_spec.num_classes)]
    fake = np.concatenate(by_class, axis=0)
    per_class = np.array([np.mean(clf.predict(s) == c) for c, s in enumerate(by_class)])
    return MetricReport(
        score=inception_like_score(clf, fake),
        frechet_distance=frechet_feature_distance(clf, real_samples, fake),
        conditional_accuracy=float(per_class.mean()),
        classifier_test_accuracy=clf.test_accuracy,
        per_class_accuracy=per_class,
        intra_class_diversity=intra_class_diversity(by_class),
    )


def evaluate_real(clf: EvalClassifier, dataset) -> MetricReport:
    """Reference row: the real test split scored against the real train split."""
    clf.require_reliable()
    x_test, y_test = dataset.x_test, dataset.y_test
    pred = clf.predict(x_test)
    per_class = np.array([np.mean(pred[y_test == c] == c) for c in range(dataset.num_classes)])
    return MetricReport(
        score=inception_like_score(clf, x_test),
        frechet_distance=frechet_feature_distance(clf, dataset.x, x_test),
        conditional_accuracy=float(per_class.mean()),
        classifier_test_accuracy=clf.test_accuracy,
        per_class_accuracy=per_class,
        intra_class_diversity=intra_class_diversity([x_test[y_test == c] for c in range(dataset.num_classes)]),
    )
