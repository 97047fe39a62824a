"""Class-conditional GANs driven by a structured noise space, on a small numpy autodiff engine."""

from .datasets import LabeledImageDataset, LabeledSeriesDataset, SyntheticSpec, synth_make
from .evaluation import EvalConfig, MetricReport, train_eval_classifier
from .models import ModelVariant, build, generate_for_class
from .noise import NoiseSpec, sample_batch, sample_structured
from .tensor import Tensor, no_grad
from .training import TrainConfig, train_gan

__version__ = "0.1.0"
