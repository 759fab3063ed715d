"""Checkpoint directories: manifest.json plus weights.npz.

Layout (format_version 1):

    <dir>/manifest.json   model_kind, config, class order, seed, metrics
    <dir>/weights.npz     one float array per state-dict entry, keyed by name

Weights are stored in their native dtype, so save/load round-trips exactly.
"""

import dataclasses
import json
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .classifier import ClassifierConfig, RiceClassifier, build_classifier
from .errors import ConfigError
from .segmenter import GrainSegmenter, SegmenterConfig, build_unet
from .varieties import VARIETY_NAMES

FORMAT_VERSION = 1


def _state_to_arrays(net) -> dict:
    return {key: value.numpy() for key, value in net.state_dict().items()}


def _arrays_to_state(arrays) -> dict:
    return {key: torch.from_numpy(np.array(arrays[key])) for key in arrays.files}


def save_checkpoint(directory, model, seed: int, metrics: Optional[dict] = None) -> Path:
    """Write a fitted RiceClassifier or GrainSegmenter to a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(model, RiceClassifier):
        kind, config = "classifier", model.config_
    elif isinstance(model, GrainSegmenter):
        kind, config = "segmenter", model.config_
    else:
        raise TypeError(f"cannot checkpoint object of type {type(model).__name__}")
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "config": dataclasses.asdict(config),
        "class_order": list(VARIETY_NAMES),
        "seed": seed,
        "metrics": metrics or {},
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    np.savez(directory / "weights.npz", **_state_to_arrays(model.net_))
    return directory


def load_checkpoint(directory):
    """Rebuild the estimator stored in a checkpoint directory."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported checkpoint format_version {manifest.get('format_version')!r}"
        )
    if manifest.get("class_order") != list(VARIETY_NAMES):
        raise ConfigError(f"checkpoint class order {manifest.get('class_order')} does not match")
    kind = manifest["model_kind"]
    seed = int(manifest.get("seed", 0))
    with np.load(directory / "weights.npz") as arrays:
        state = _arrays_to_state(arrays)
    if kind == "classifier":
        config = ClassifierConfig(
            **{k: tuple(v) if isinstance(v, list) else v for k, v in manifest["config"].items()}
        )
        net = build_classifier(config, seed)
        net.load_state_dict(state)
        return RiceClassifier(config=config)._load_fitted(net, config)
    if kind == "segmenter":
        config = SegmenterConfig(**manifest["config"])
        net = build_unet(config, seed)
        net.load_state_dict(state)
        return GrainSegmenter(config=config)._load_fitted(net, config)
    raise ConfigError(f"unknown model_kind {kind!r}")
