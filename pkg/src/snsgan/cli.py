"""Command line entry point: ``snsgan train|generate|evaluate|benchmark|plot``.

Exit codes: 0 success, 1 usage or configuration error, 2 data or format
error, 3 numeric failure (including an unreliable evaluation classifier).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, build_experiment, load_config, parse_config_text
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    MetricUnreliableError,
    NumericError,
    ShapeError,
)
from .evaluation import evaluate_generator, evaluate_real, train_eval_classifier
from .io import (
    image_grid,
    load_checkpoint,
    read_samples_csv,
    save_checkpoint,
    write_pgm,
    write_samples_csv,
    write_series_svg,
    write_table_csv,
)
from .models import build, generate_for_class
from .training import train_gan

logger = logging.getLogger("snsgan")

LOSS_HEADER = ("epoch", "d_loss", "g_loss", "wall_ms")
METRIC_HEADER = ("metric", "class", "value", "classifier_test_accuracy")
RUNS_HEADER = ("dataset", "model", "seed", "score", "frechet_distance", "conditional_accuracy",
               "classifier_test_accuracy", "error")
CHECKPOINT_NAME = "checkpoint.snsg"


# -- shared plumbing ---------------------------------------------------------------


def _models_for(cfg: ExperimentConfig, dataset):
    spec = cfg.noise_spec(dataset.num_classes)
    gen, dis = build(cfg.variant, dataset.sample_shape, spec, rng=cfg.seed)
    return gen, dis, spec


def save_models(path, cfg: ExperimentConfig, gen, dis, dataset) -> None:
    tensors = {f"generator.{k}": v for k, v in gen.state_dict().items()}
    tensors.update({f"discriminator.{k}": v for k, v in dis.state_dict().items()})
    meta = {"config": cfg.text, "base_dir": os.path.abspath(cfg.data.base_dir), "seed": cfg.seed,
            "data_shape": list(dataset.sample_shape), "num_classes": dataset.num_classes}
    save_checkpoint(path, tensors, cfg.digest, meta)


def load_models(checkpoint_path, config_path=None):
    """Rebuild (cfg, gen, dis, noise_spec) from a checkpoint.

    With ``config_path`` the checkpoint must carry that config's digest;
    otherwise the config embedded in the checkpoint is used.
    """
    if config_path is not None:
        cfg = load_config(config_path)
        tensors, _, meta = load_checkpoint(checkpoint_path, expected_digest=cfg.digest)
        cfg.seed = meta.get("seed", cfg.seed)
    else:
        tensors, _, meta = load_checkpoint(checkpoint_path)
        if "config" not in meta:
            raise FormatError(f"{checkpoint_path}: checkpoint carries no configuration")
        cfg = build_experiment(parse_config_text(meta["config"], str(checkpoint_path)),
                               meta.get("base_dir", "."), meta.get("seed"))
    spec = cfg.noise_spec(int(meta["num_classes"]))
    gen, dis = build(cfg.variant, tuple(meta["data_shape"]), spec, rng=cfg.seed)
    gen.load_state_dict({k[len("generator."):]: v for k, v in tensors.items() if k.startswith("generator.")})
    dis.load_state_dict({k[len("discriminator."):]: v for k, v in tensors.items()
                         if k.startswith("discriminator.")})
    return cfg, gen, dis, spec


def _metric_rows(report) -> list:
    return [(m, c, v, report.classifier_test_accuracy) for m, c, v in report.rows()]


# -- commands ----------------------------------------------------------------------


def cmd_train(config_path, out: Optional[str] = None, seed: Optional[int] = None) -> dict:
    """Train per config; writes checkpoint, per-epoch loss CSV and a metric CSV into the output dir."""
    cfg = load_config(config_path, seed)
    dataset = cfg.data.load()
    gen, dis, spec = _models_for(cfg, dataset)
    out_dir = out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    class Progress:
        def on_epoch_end(self, record):
            logger.info("epoch %d  d_loss %.4f  g_loss %.4f", record.epoch, record.d_loss, record.g_loss)

    report = train_gan(gen, dis, dataset, spec, cfg.train, [Progress()])
    paths = {"checkpoint": os.path.join(out_dir, CHECKPOINT_NAME),
             "losses": os.path.join(out_dir, "losses.csv"),
             "metrics": os.path.join(out_dir, "metrics.csv")}
    save_models(paths["checkpoint"], cfg, gen, dis, dataset)
    write_table_csv(paths["losses"], LOSS_HEADER,
                    [(r.epoch, r.d_loss, r.g_loss, round(r.wall_ms, 3)) for r in report.epochs])
    clf = train_eval_classifier(dataset, cfg.eval, seed=cfg.seed)
    metrics = evaluate_generator(clf, gen, spec, dataset.x, cfg.per_class_count, rng=cfg.seed)
    write_table_csv(paths["metrics"], METRIC_HEADER, _metric_rows(metrics))
    return paths


def cmd_generate(checkpoint, c: int, count: int, out, seed: int = 0, config_path=None) -> str:
    """Write ``count`` samples of class ``c``: a CSV for series, a PGM grid for images."""
    if count < 1:
        raise DomainError("count must be >= 1")
    cfg, gen, _, spec = load_models(checkpoint, config_path)
    samples = generate_for_class(gen, spec, c, count, np.random.default_rng(seed))
    meta = {"class": c, "seed": seed, "variant": cfg.variant.tag}
    if samples.ndim == 4:
        write_pgm(out, image_grid(samples), " ".join(f"{k}={v}" for k, v in meta.items()))
    else:
        write_samples_csv(out, samples, meta)
    return out


def cmd_evaluate(out, checkpoint=None, config_path=None, seed: Optional[int] = None) -> str:
    """Metric CSV for a checkpoint, or the real-vs-real reference when no checkpoint is given."""
    if checkpoint is not None:
        cfg, gen, _, spec = load_models(checkpoint, config_path)
        dataset = cfg.data.load()
        clf = train_eval_classifier(dataset, cfg.eval, seed=cfg.seed)
        report = evaluate_generator(clf, gen, spec, dataset.x, cfg.per_class_count,
                                    rng=cfg.seed if seed is None else seed)
    else:
        if config_path is None:
            raise ConfigError("evaluate needs --checkpoint or --config")
        cfg = load_config(config_path, seed)
        dataset = cfg.data.load()
        report = evaluate_real(train_eval_classifier(dataset, cfg.eval, seed=cfg.seed), dataset)
    write_table_csv(out, METRIC_HEADER, _metric_rows(report))
    return out


@dataclass
class BenchmarkResult:
    datasets: list
    variants: list
    runs: list = field(default_factory=list)
    real: dict = field(default_factory=dict)

    def scores(self, dataset: str, variant: str) -> dict:
        return {r["seed"]: r["score"] for r in self.runs
                if r["dataset"] == dataset and r["model"] == variant and not r["error"]}


def _cell(values: list, errors: list, fmt=float):
    if values:
        return fmt(np.mean(values))
    return f"error: {errors[0]}" if errors else ""


def cmd_benchmark(config_path, out, seed: Optional[int] = None) -> BenchmarkResult:
    """Run every variant x dataset x seed cell; failures become error cells and the grid continues."""
    if not os.path.exists(config_path):
        raise ConfigError(f"configuration file not found: {config_path}")
    with open(config_path, "r", encoding="utf-8") as fh:
        parsed = parse_config_text(fh.read(), str(config_path))
    base_dir = os.path.dirname(os.path.abspath(config_path))
    bench = parsed.get("benchmark", {})
    variants = [v.strip() for v in bench.get("variants", "").split(",") if v.strip()]
    names = [d.strip() for d in bench.get("datasets", "").split(",") if d.strip()]
    if not variants or not names:
        raise ConfigError("[benchmark] needs non-empty 'variants' and 'datasets'")
    for name in names:
        if f"dataset.{name}" not in parsed:
            raise ConfigError(f"dataset '{name}' has no [dataset.{name}] section")
    base_seed = parsed.get("experiment", {}).get("seed", 0) if seed is None else seed
    seeds = list(bench.get("seeds", (base_seed,)))
    result = BenchmarkResult(names, variants)

    for name in names:
        try:
            cfg = build_experiment(parsed, base_dir, base_seed, data_section=f"dataset.{name}")
            dataset = cfg.data.load()
            clf = train_eval_classifier(dataset, cfg.eval, seed=base_seed)
            result.real[name] = evaluate_real(clf, dataset)
        except Exception as exc:  # noqa: BLE001 - every failure becomes an error cell
            logger.warning("dataset %s failed: %s", name, exc)
            result.real[name] = exc
            for variant in variants:
                for s in seeds:
                    result.runs.append(_error_run(name, variant, s, exc))
            continue
        for variant in variants:
            for s in seeds:
                try:
                    vcfg = build_experiment(
                        {**parsed, "experiment": {**parsed.get("experiment", {}), "variant": variant}},
                        base_dir, s, data_section=f"dataset.{name}")
                    gen, dis, spec = _models_for(vcfg, dataset)
                    train_gan(gen, dis, dataset, spec, vcfg.train)
                    rep = evaluate_generator(clf, gen, spec, dataset.x, vcfg.per_class_count, rng=s)
                    result.runs.append({"dataset": name, "model": variant, "seed": s, "score": rep.score,
                                        "frechet_distance": rep.frechet_distance,
                                        "conditional_accuracy": rep.conditional_accuracy,
                                        "classifier_test_accuracy": rep.classifier_test_accuracy,
                                        "error": ""})
                    logger.info("%s %s seed %d: score %.3f", name, variant, s, rep.score)
                except Exception as exc:  # noqa: BLE001
                    logger.warning("%s %s seed %d failed: %s", name, variant, s, exc)
                    result.runs.append(_error_run(name, variant, s, exc))

    header = ["model"] + [f"{n} {m}" for n in names for m in ("ITS", "FITD")]
    rows = [["Real Data"] + [v for n in names for v in _real_cells(result.real[n])]]
    for variant in variants:
        row = [variant]
        for n in names:
            runs = [r for r in result.runs if r["dataset"] == n and r["model"] == variant]
            ok = [r for r in runs if not r["error"]]
            errs = [r["error"] for r in runs if r["error"]]
            row += [_cell([r["score"] for r in ok], errs), _cell([r["frechet_distance"] for r in ok], errs)]
        rows.append(row)
    write_table_csv(out, header, rows)
    stem, _ = os.path.splitext(out)
    write_table_csv(f"{stem}_runs.csv", RUNS_HEADER, [[r[k] for k in RUNS_HEADER] for r in result.runs])
    return result


def _error_run(name, variant, seed, exc) -> dict:
    return {"dataset": name, "model": variant, "seed": seed, "score": "", "frechet_distance": "",
            "conditional_accuracy": "", "classifier_test_accuracy": "",
            "error": f"{type(exc).__name__}: {exc}".replace("\n", " ")}


def _real_cells(real) -> list:
    if isinstance(real, Exception):
        msg = f"error: {type(real).__name__}: {real}".replace("\n", " ")
        return [msg, msg]
    return [real.score, real.frechet_distance]


def cmd_plot(out, config_path=None, checkpoint=None, samples: Sequence[str] = (), count: int = 5,
             seed: int = 0) -> str:
    """SVG with one panel per class: real series from the config's data, generated from a
    checkpoint and/or sample CSVs written by ``generate``."""
    real, fake = {}, {}
    if config_path is not None:
        dataset = load_config(config_path).data.load()
        if dataset.x.ndim != 2:
            raise ConfigError("plot draws series data only")
        for c in range(dataset.num_classes):
            real[c] = list(dataset.x[dataset.y == c][:count])
    if checkpoint is not None:
        _, gen, _, spec = load_models(checkpoint)
        if len(gen.output_shape) != 1:
            raise ConfigError("plot draws series data only")
        rng = np.random.default_rng(seed)
        for c in range(spec.num_classes):
            fake.setdefault(c, []).extend(generate_for_class(gen, spec, c, count, rng))
    for path in samples:
        rows, meta = read_samples_csv(path)
        if "class" not in meta:
            raise FormatError(f"{path}: no '# class=...' line")
        fake.setdefault(int(meta["class"]), []).extend(rows)
    classes = sorted(set(real) | set(fake))
    if not classes:
        raise DomainError("plot needs --config, --checkpoint or --samples input")
    write_series_svg(out, [(c, real.get(c, []), fake.get(c, [])) for c in classes])
    return out


# -- argument parsing --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snsgan", description="Structured-noise conditional GANs for series and images")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: out_dir from the config)")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("generate", help="sample one class from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--class", dest="cls", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="refuse the checkpoint unless it was trained with this config")

    p = sub.add_parser("evaluate", help="write the metric report CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("benchmark", help="run a variant x dataset grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="SVG of real and generated series per class")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--samples", nargs="*", default=[])
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (NumericError, MetricUnreliableError)):
        return 3
    if isinstance(exc, (FormatError, ShapeError, OSError)):
        return 2
    if isinstance(exc, (ConfigError, DomainError)):
        return 1
    raise exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = make_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s", stream=sys.stderr)
        if args.verb == "train":
            paths = cmd_train(args.config, args.out, args.seed)
            print("\n".join(paths.values()))
        elif args.verb == "generate":
            print(cmd_generate(args.checkpoint, args.cls, args.count, args.out, args.seed, args.config))
        elif args.verb == "evaluate":
            print(cmd_evaluate(args.out, args.checkpoint, args.config, args.seed))
        elif args.verb == "benchmark":
            cmd_benchmark(args.config, args.out, args.seed)
            print(args.out)
        else:
            print(cmd_plot(args.out, args.config, args.checkpoint, args.samples, args.count, args.seed))
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code
    return 0
