"""Command-line entry point wiring the full workflow.

Subcommands::

    synth-gen         write a synthetic single-grain corpus and bulk scenes
    train-classifier  train the variety classifier on a grain dataset
    train-segmenter   train the grain segmenter on a bulk dataset
    eval-classifier   metrics + confusion matrix from a checkpoint or predictions CSV
    eval-segmenter    IoU metrics from a checkpoint on a bulk dataset
    predict-grain     classify one single-grain image
    predict-bulk      full composition pipeline on one bulk image

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 training
divergence. Every run writes a run-manifest.json with the resolved
configuration, and report files are written atomically (temp + rename).
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import checkpoint as ckpt
from . import metrics as metrics_mod
from .augment import AugmentConfig
from .bulkpredict import predict_bulk
from .classifier import ClassifierConfig, RiceClassifier
from .corpus import load_bulk_dataset, load_grain_dataset, stratified_split
from .errors import (
    CapacityError,
    ConfigError,
    DivergenceError,
    GraindeckError,
    InsufficientClassError,
    LayoutError,
    PairingError,
    ShapeMismatchError,
)
from .instances import ExtractParams
from .segmenter import GrainSegmenter, SegmenterConfig
from .synth import load_styles, write_bulk_corpus, write_grain_corpus
from .training import Hyperparams
from .varieties import VARIETY_NAMES, RiceVariety

OUTPUT_ENV_VAR = "GRAINDECK_OUT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3

DATA_ERRORS = (
    LayoutError,
    PairingError,
    ShapeMismatchError,
    InsufficientClassError,
    CapacityError,
    FileNotFoundError,
)


def sig6(value):
    """Round floats to 6 significant digits for stable report serialization."""
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: sig6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sig6(v) for v in value]
    return value


def write_json_atomic(path, payload) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(sig6(payload), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def write_history_csv(path, history) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_score"])
        for record in history.records:
            writer.writerow(
                [
                    record.epoch,
                    f"{record.train_loss:.6g}",
                    f"{record.val_loss:.6g}",
                    f"{record.val_score:.6g}",
                ]
            )
    os.replace(tmp, path)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graindeck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="global random seed (mandatory)")
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ENV_VAR} or ./out)")

    p = sub.add_parser("synth-gen", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--grains", type=int, help="total single-grain images (multiple of 7)")
    p.add_argument("--scenes", type=int, help="number of bulk scenes")
    p.add_argument("--canvas", type=int, help="scene canvas side, pixels")
    p.add_argument("--styles", type=Path, help="style manifest JSON (default: built-in)")

    p = sub.add_parser("train-classifier", help="train the variety classifier")
    common(p)
    p.add_argument("--data", type=Path, help="single-grain dataset root")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)

    p = sub.add_parser("train-segmenter", help="train the grain segmenter")
    common(p)
    p.add_argument("--data", type=Path, help="bulk dataset root")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)

    p = sub.add_parser("eval-classifier", help="evaluate classification metrics")
    common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--data", type=Path, help="single-grain dataset root")
    p.add_argument("--predictions", type=Path, help="CSV of true,predicted variety names")

    p = sub.add_parser("eval-segmenter", help="evaluate segmentation IoU")
    common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--data", type=Path, help="bulk dataset root")

    p = sub.add_parser("predict-grain", help="classify one grain image")
    common(p)
    p.add_argument("--image", type=Path)
    p.add_argument("--checkpoint", type=Path)

    p = sub.add_parser("predict-bulk", help="composition report for one bulk image")
    common(p)
    p.add_argument("--image", type=Path)
    p.add_argument("--segmenter", type=Path, help="segmenter checkpoint directory")
    p.add_argument("--classifier", type=Path, help="classifier checkpoint directory")
    p.add_argument("--threshold", type=float)

    return parser


def _resolve(args) -> dict:
    """Merge config file and flags (flags win) into one flat mapping."""
    config = {}
    if args.config:
        config.update(json.loads(Path(args.config).read_text()))
    for key, value in vars(args).items():
        if key in ("config",) or value is None:
            continue
        config[key.replace("-", "_")] = value
    if config.get("seed") is None:
        raise ConfigError("a --seed (or config 'seed') is mandatory")
    out = config.get("out") or os.environ.get(OUTPUT_ENV_VAR) or "out"
    config["out"] = str(out)
    config["seed"] = int(config["seed"])
    return config


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_manifest(out_dir: Path, config: dict) -> None:
    write_json_atomic(out_dir / "run-manifest.json", _jsonable(config))


def _section(config, key, cls):
    """Build a dataclass from an optional config-file section."""
    data = dict(config.get(key, {}))
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown keys in config section {key!r}: {sorted(unknown)}")
    for name, value in data.items():
        if isinstance(value, list):
            data[name] = tuple(value)
    return cls(**data)


def _hyper(config) -> Hyperparams:
    hyper = _section(config, "hyper", Hyperparams)
    hyper.seed = config["seed"]
    for flag, attr in (("epochs", "epochs"), ("batch_size", "batch_size"), ("learning_rate", "learning_rate")):
        if flag in config and not isinstance(config[flag], dict):
            setattr(hyper, attr, config[flag])
    return hyper


# -- subcommand implementations ----------------------------------------------


def _cmd_synth_gen(config, out_dir: Path) -> None:
    total = int(config.get("grains", 0))
    scenes = int(config.get("scenes", 0))
    if total <= 0 and scenes <= 0:
        raise ConfigError("synth-gen needs --grains and/or --scenes")
    if total % len(VARIETY_NAMES) != 0:
        raise ConfigError(f"--grains must be a multiple of {len(VARIETY_NAMES)}, got {total}")
    styles = load_styles(config["styles"]) if config.get("styles") else None
    seed = config["seed"]
    if total:
        write_grain_corpus(out_dir / "grains", per_class=total // len(VARIETY_NAMES), seed=seed, styles=styles)
    if scenes:
        canvas = int(config.get("canvas", 192))
        write_bulk_corpus(out_dir / "scenes", n_scenes=scenes, seed=seed, canvas=(canvas, canvas), styles=styles)


def _cmd_train_classifier(config, out_dir: Path) -> None:
    if not config.get("data"):
        raise ConfigError("train-classifier needs --data")
    samples = load_grain_dataset(config["data"])
    ratios = tuple(config.get("split_ratios", (0.7, 0.15, 0.15)))
    split = stratified_split(samples, ratios=ratios, seed=config["seed"])
    model = RiceClassifier(
        config=_section(config, "classifier", ClassifierConfig),
        hyper=_hyper(config),
        augment=_section(config, "augment", AugmentConfig),
    )
    model.fit(split)
    best = model.history_.records[model.best_epoch_]
    metrics = {"val_accuracy": best.val_score, "val_loss": best.val_loss, "best_epoch": model.best_epoch_}
    if split.test:
        pairs = [(s.label, model.predict_label(s.pixels)) for s in split.test]
        cm = metrics_mod.confusion_from_predictions(pairs)
        metrics["test_accuracy"] = metrics_mod.accuracy(cm)
        metrics_mod.confusion_to_csv(cm, out_dir / "confusion.csv")
    ckpt.save_checkpoint(out_dir / "checkpoint", model, seed=config["seed"], metrics=sig6(metrics))
    write_history_csv(out_dir / "history.csv", model.history_)
    write_json_atomic(out_dir / "metrics.json", metrics)


def _cmd_train_segmenter(config, out_dir: Path) -> None:
    if not config.get("data"):
        raise ConfigError("train-segmenter needs --data")
    pairs = load_bulk_dataset(config["data"])
    ratios = tuple(config.get("split_ratios", (0.8, 0.2)))
    rng = np.random.default_rng(config["seed"])
    order = rng.permutation(len(pairs))
    cut = int(round(len(pairs) * ratios[0]))
    train = [pairs[i] for i in order[:cut]]
    val = [pairs[i] for i in order[cut:]]
    hyper = _hyper(config)
    model = GrainSegmenter(config=_section(config, "segmenter", SegmenterConfig), hyper=hyper)
    model.fit(train, val or None)
    best = model.history_.records[model.best_epoch_]
    metrics = {"val_iou": best.val_score, "val_loss": best.val_loss, "best_epoch": model.best_epoch_}
    ckpt.save_checkpoint(out_dir / "checkpoint", model, seed=config["seed"], metrics=sig6(metrics))
    write_history_csv(out_dir / "history.csv", model.history_)
    write_json_atomic(out_dir / "metrics.json", metrics)


def _read_prediction_pairs(path):
    pairs = []
    with open(path, newline="") as handle:
        for row in csv.reader(handle):
            if not row or row[0].strip().lower() == "true":
                continue
            pairs.append((RiceVariety.from_name(row[0].strip()), RiceVariety.from_name(row[1].strip())))
    return pairs


def _cmd_eval_classifier(config, out_dir: Path) -> None:
    if config.get("predictions"):
        pairs = _read_prediction_pairs(config["predictions"])
    elif config.get("checkpoint") and config.get("data"):
        model = ckpt.load_checkpoint(config["checkpoint"])
        samples = load_grain_dataset(config["data"])
        pairs = [(s.label, model.predict_label(s.pixels)) for s in samples]
    else:
        raise ConfigError("eval-classifier needs --predictions, or --checkpoint with --data")
    cm = metrics_mod.confusion_from_predictions(pairs)
    summary = metrics_mod.summary(cm)
    per_class = metrics_mod.class_metrics(cm)
    payload = {
        "accuracy": summary.accuracy,
        "macro_precision": summary.macro_precision,
        "macro_recall": summary.macro_recall,
        "macro_f1": summary.macro_f1,
        "weighted_precision": summary.weighted_precision,
        "weighted_recall": summary.weighted_recall,
        "weighted_f1": summary.weighted_f1,
        "per_class": {
            m.variety.name: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
            for m in per_class
        },
    }
    metrics_mod.confusion_to_csv(cm, out_dir / "confusion.csv")
    write_json_atomic(out_dir / "metrics.json", payload)


def _cmd_eval_segmenter(config, out_dir: Path) -> None:
    if not (config.get("checkpoint") and config.get("data")):
        raise ConfigError("eval-segmenter needs --checkpoint and --data")
    model = ckpt.load_checkpoint(config["checkpoint"])
    pairs = load_bulk_dataset(config["data"])
    mask_pairs = [(model.predict_mask(p.pixels), p.mask) for p in pairs]
    mean_iou, aggregate_iou = metrics_mod.dataset_iou(mask_pairs)
    write_json_atomic(
        out_dir / "metrics.json",
        {"mean_iou": mean_iou, "aggregate_iou": aggregate_iou, "num_images": len(pairs)},
    )


def _load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _cmd_predict_grain(config, out_dir: Path) -> None:
    if not (config.get("image") and config.get("checkpoint")):
        raise ConfigError("predict-grain needs --image and --checkpoint")
    model = ckpt.load_checkpoint(config["checkpoint"])
    probs = model.predict_proba(_load_image(config["image"]))
    label = RiceVariety(int(np.argmax(probs)))
    write_json_atomic(
        out_dir / "prediction.json",
        {
            "label": label.name,
            "probabilities": {name: float(p) for name, p in zip(VARIETY_NAMES, probs)},
        },
    )


def _cmd_predict_bulk(config, out_dir: Path) -> None:
    if not (config.get("image") and config.get("segmenter") and config.get("classifier")):
        raise ConfigError("predict-bulk needs --image, --segmenter, and --classifier")
    segmenter = ckpt.load_checkpoint(config["segmenter"])
    classifier = ckpt.load_checkpoint(config["classifier"])
    report = predict_bulk(
        _load_image(config["image"]),
        segmenter,
        classifier,
        extract_params=_section(config, "extract", ExtractParams),
        threshold=config.get("threshold"),
    )
    write_json_atomic(out_dir / "composition.json", report.to_dict())


COMMANDS = {
    "synth-gen": _cmd_synth_gen,
    "train-classifier": _cmd_train_classifier,
    "train-segmenter": _cmd_train_segmenter,
    "eval-classifier": _cmd_eval_classifier,
    "eval-segmenter": _cmd_eval_segmenter,
    "predict-grain": _cmd_predict_grain,
    "predict-bulk": _cmd_predict_bulk,
}


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        config = _resolve(args)
        out_dir = Path(config["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(out_dir, config)
        COMMANDS[args.command](config, out_dir)
        return EXIT_OK
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except DATA_ERRORS + (ValueError, GraindeckError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
