"""Experiment configuration files: ``[section]`` headers with ``key = value`` lines."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from typing import Optional

from .datasets import (
    SyntheticSpec,
    load_mnist_idx,
    load_ucr_tsv,
    normalize,
    select_classes,
    synth_make,
)
from .errors import ConfigError
from .evaluation import EvalConfig
from .models import ModelVariant
from .noise import NoiseSpec
from .training import TrainConfig

_INT, _FLOAT, _STR, _INTS, _FLOATS = "int", "float", "str", "ints", "floats"

DATA_KEYS = {
    "source": _STR, "name": _STR, "normalize": _STR,
    "train_path": _STR, "test_path": _STR,
    "train_images": _STR, "train_labels": _STR, "test_images": _STR, "test_labels": _STR,
    "classes": _INTS, "limit": _INT,
    "num_classes": _INT, "length": _INT, "n_samples": _INT, "n_test": _INT, "noise_std": _FLOAT,
    "frequencies": _FLOATS, "amplitudes": _FLOATS, "phases": _FLOATS, "data_seed": _INT,
}

SCHEMA = {
    "experiment": {"variant": _STR, "seed": _INT, "out_dir": _STR},
    "data": DATA_KEYS,
    "noise": {"block_size": _INT, "shift": _FLOAT, "base_std": _FLOAT},
    "model": {"hidden_size": _INT, "kernel_size": _INT, "dilation": _INT, "tcn_channels": _INT,
              "rcgan_noise_dim": _INT, "image_layers": _INT, "image_base_channels": _INT},
    "train": {"epochs": _INT, "batch_size": _INT, "learning_rate": _FLOAT, "beta1": _FLOAT,
              "beta2": _FLOAT, "d_steps_per_g_step": _INT, "g_loss": _STR},
    "eval": {"epochs": _INT, "batch_size": _INT, "learning_rate": _FLOAT, "feature_dim": _INT,
             "per_class_count": _INT},
    "benchmark": {"variants": _STR, "datasets": _STR, "seeds": _INTS},
}


def _convert(kind: str, raw: str, where: str):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _INTS:
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if kind == _FLOATS:
            return tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind}") from None
    return raw.strip()


def _section_schema(section: str) -> Optional[dict]:
    if section.startswith("dataset."):
        return DATA_KEYS
    return SCHEMA.get(section)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse and type-check, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out, unknown = {}, []
    for section in parser.sections():
        schema = _section_schema(section)
        if schema is None:
            unknown.append(f"[{section}]")
            continue
        values = {}
        for key, raw in parser.items(section):
            if key not in schema:
                unknown.append(f"{section}.{key}")
                continue
            values[key] = _convert(schema[key], raw, f"{source}: {section}.{key}")
        out[section] = values
    if unknown:
        raise ConfigError(f"{source}: unknown configuration keys: {', '.join(unknown)}")
    return out


def canonical_text(parsed: dict) -> str:
    """Stable rendering used for the checkpoint digest: sorted sections and keys."""
    lines = []
    for section in sorted(parsed):
        lines.append(f"[{section}]")
        for key in sorted(parsed[section]):
            value = parsed[section][key]
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def digest(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


@dataclass
class DataSource:
    source: str
    options: dict = field(default_factory=dict)
    base_dir: str = "."

    def _path(self, key: str) -> str:
        if key not in self.options:
            raise ConfigError(f"{self.source} data needs '{key}'")
        path = os.path.join(self.base_dir, os.path.expanduser(self.options[key]))
        if not os.path.exists(path):
            raise FileNotFoundError(f"dataset file not found: {path}")
        return path

    def load(self):
        o = self.options
        if self.source == "synthetic":
            spec_fields = {f.name for f in dataclasses.fields(SyntheticSpec)}
            spec = SyntheticSpec(**{k: v for k, v in o.items() if k in spec_fields})
            ds = synth_make(spec, o.get("data_seed", 0))
        elif self.source == "ucr":
            test = self._path("test_path") if "test_path" in o else None
            ds = load_ucr_tsv(self._path("train_path"), test, name=o.get("name"))
        elif self.source == "mnist":
            has_test = "test_images" in o
            ds = load_mnist_idx(self._path("train_images"), self._path("train_labels"),
                                self._path("test_images") if has_test else None,
                                self._path("test_labels") if has_test else None)
        else:
            raise ConfigError(f"unknown data source {self.source!r}; use synthetic, ucr or mnist")
        if "classes" in o:
            ds = select_classes(ds, o["classes"], o.get("limit"))
        elif "limit" in o:
            ds = ds.replace(x=ds.x[:o["limit"]], y=ds.y[:o["limit"]])
        if "name" in o:
            ds = ds.replace(name=o["name"])
        mode = o.get("normalize", "minmax_pm1" if self.source != "mnist" else "none")
        if mode != "none":
            ds = normalize(ds, mode)
        return ds


@dataclass
class ExperimentConfig:
    variant: ModelVariant
    data: DataSource
    noise: dict
    train: TrainConfig
    eval: EvalConfig
    per_class_count: int = 500
    out_dir: str = "."
    seed: int = 0
    text: str = ""

    @property
    def digest(self) -> bytes:
        return digest(self.text)

    def noise_spec(self, num_classes: int) -> NoiseSpec:
        return NoiseSpec(num_classes, **self.noise)


def _pick(section: dict, keys) -> dict:
    return {k: section[k] for k in keys if k in section}


def build_experiment(parsed: dict, base_dir: str = ".", seed: Optional[int] = None,
                     data_section: str = "data") -> ExperimentConfig:
    exp = parsed.get("experiment", {})
    if data_section not in parsed:
        raise ConfigError(f"configuration needs a [{data_section}] section")
    data = dict(parsed[data_section])
    if "source" not in data:
        raise ConfigError(f"[{data_section}] needs 'source'")
    source = data.pop("source")
    seed = exp.get("seed", 0) if seed is None else seed
    train = dict(parsed.get("train", {}))
    ev = dict(parsed.get("eval", {}))
    per_class = ev.pop("per_class_count", 500)
    return ExperimentConfig(
        variant=ModelVariant(exp.get("variant", "SNS-Linear"), **parsed.get("model", {})),
        data=DataSource(source, data, base_dir),
        noise=_pick(parsed.get("noise", {}), ("block_size", "shift", "base_std")),
        train=TrainConfig(seed=seed, **train),
        eval=EvalConfig(**ev),
        per_class_count=per_class,
        out_dir=os.path.join(base_dir, exp.get("out_dir", ".")),
        seed=seed,
        text=canonical_text(parsed),
    )


def load_config(path, seed: Optional[int] = None) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        parsed = parse_config_text(fh.read(), str(path))
    return build_experiment(parsed, os.path.dirname(os.path.abspath(path)), seed)
