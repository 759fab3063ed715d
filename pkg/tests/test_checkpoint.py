import json

import numpy as np
import pytest
import torch

from graindeck.checkpoint import load_checkpoint, save_checkpoint
from graindeck.classifier import ClassifierConfig, RiceClassifier, build_classifier
from graindeck.errors import ConfigError
from graindeck.segmenter import GrainSegmenter, SegmenterConfig, build_unet

CLS_CONFIG = ClassifierConfig(input_size=32, stage_widths=(8,), blocks_per_stage=(1,))
SEG_CONFIG = SegmenterConfig(input_size=64, depth=2, base_channels=4)


def _classifier():
    return RiceClassifier(config=CLS_CONFIG)._load_fitted(build_classifier(CLS_CONFIG, 3), CLS_CONFIG)


def _segmenter():
    return GrainSegmenter(config=SEG_CONFIG)._load_fitted(build_unet(SEG_CONFIG, 3), SEG_CONFIG)


def _assert_states_equal(a, b):
    state_a, state_b = a.state_dict(), b.state_dict()
    assert state_a.keys() == state_b.keys()
    for key in state_a:
        assert torch.equal(state_a[key], state_b[key]), key
        assert state_a[key].dtype == state_b[key].dtype, key


def test_classifier_round_trip_is_exact(tmp_path, rng):
    model = _classifier()
    save_checkpoint(tmp_path / "ckpt", model, seed=3, metrics={"val_accuracy": 0.5})
    loaded = load_checkpoint(tmp_path / "ckpt")
    assert isinstance(loaded, RiceClassifier)
    assert loaded.config_ == CLS_CONFIG
    _assert_states_equal(model.net_, loaded.net_)
    image = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    assert np.array_equal(model.predict_proba(image), loaded.predict_proba(image))


def test_segmenter_round_trip_is_exact(tmp_path, rng):
    model = _segmenter()
    save_checkpoint(tmp_path / "ckpt", model, seed=3)
    loaded = load_checkpoint(tmp_path / "ckpt")
    assert isinstance(loaded, GrainSegmenter)
    assert loaded.config_ == SEG_CONFIG
    _assert_states_equal(model.net_, loaded.net_)
    image = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
    assert np.array_equal(model.predict_proba_mask(image), loaded.predict_proba_mask(image))


def test_manifest_contents(tmp_path):
    save_checkpoint(tmp_path / "ckpt", _classifier(), seed=9, metrics={"k": 1})
    manifest = json.loads((tmp_path / "ckpt" / "manifest.json").read_text())
    assert manifest["format_version"] == 1
    assert manifest["model_kind"] == "classifier"
    assert manifest["seed"] == 9
    assert manifest["metrics"] == {"k": 1}
    assert manifest["class_order"][0] == "AliKazemi" and len(manifest["class_order"]) == 7


def test_load_rejects_wrong_version(tmp_path):
    save_checkpoint(tmp_path / "ckpt", _classifier(), seed=0)
    path = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest["format_version"] = 99
    path.write_text(json.dumps(manifest))
    with pytest.raises(ConfigError, match="format_version"):
        load_checkpoint(tmp_path / "ckpt")


def test_load_rejects_wrong_class_order(tmp_path):
    save_checkpoint(tmp_path / "ckpt", _classifier(), seed=0)
    path = tmp_path / "ckpt" / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest["class_order"] = list(reversed(manifest["class_order"]))
    path.write_text(json.dumps(manifest))
    with pytest.raises(ConfigError, match="class order"):
        load_checkpoint(tmp_path / "ckpt")


def test_save_rejects_unknown_model(tmp_path):
    with pytest.raises(TypeError):
        save_checkpoint(tmp_path / "ckpt", object(), seed=0)
