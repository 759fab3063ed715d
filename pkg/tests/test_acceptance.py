"""End-to-end acceptance gate.

Each test prints one PASS line so the gate's verdict is readable straight
from the pytest output. Training-based checks share module-scoped fitted
models and assert a CPU-time budget.
"""

import hashlib
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from graindeck.augment import AugmentConfig, flip, identity_config, random_augment, rotate
from graindeck.bulkpredict import compare_composition, predict_bulk, report_from_counts
from graindeck.classifier import ClassifierConfig, RiceClassifier, build_classifier
from graindeck.corpus import DatasetSplit, stratified_split
from graindeck.metrics import accuracy, class_metrics, iou, summary
from graindeck.nets import ResidualBlock, ResidualClassifierNet, UNet, seeded
from graindeck.segmenter import (
    GrainSegmenter,
    SegmenterConfig,
    binarize,
    segmentation_loss,
)
from graindeck.synth import default_styles, gen_bulk_scene, gen_grain, random_scene_spec, write_grain_corpus
from graindeck.training import Hyperparams
from graindeck.varieties import RiceVariety

from conftest import REF_PER_CLASS, REF_CONFUSION, random_labeled

TRAIN_BUDGET_SECONDS = 900  # 15 CPU-minutes per training run


def _report(number, name):
    print(f"acceptance criterion {number} ({name}): PASS")


# -- shared trained models ---------------------------------------------------


@pytest.fixture(scope="module")
def styles():
    return default_styles()


@pytest.fixture(scope="module")
def grain_split(styles):
    train, val = [], []
    for variety in RiceVariety:
        images = [gen_grain(styles[variety], seed=9000 + i) for i in range(122)]
        train.extend(images[:100])
        val.extend(images[100:])
    return DatasetSplit(train=train, validation=val, test=[], seed=0, ratios=(0.82, 0.18, 0.0))


@pytest.fixture(scope="module")
def trained_classifier(grain_split):
    model = RiceClassifier(
        hyper=Hyperparams(epochs=10, seed=1, learning_rate=0.05, lr_decay_every=4),
        augment=AugmentConfig(scale_range=(0.7, 1.4)),
    )
    start = time.process_time()
    model.fit(grain_split)
    elapsed = time.process_time() - start
    return model, elapsed


@pytest.fixture(scope="module")
def scene_samples():
    rng = np.random.default_rng(7)
    specs = [random_scene_spec(rng, canvas=(192, 192), seed=100 + i) for i in range(80)]
    return [gen_bulk_scene(spec) for spec in specs]


@pytest.fixture(scope="module")
def trained_segmenter(scene_samples):
    model = GrainSegmenter(
        config=SegmenterConfig(input_size=192),
        hyper=Hyperparams(epochs=5, seed=2, learning_rate=0.1, batch_size=4, lr_decay_every=3),
    )
    start = time.process_time()
    model.fit(scene_samples[:64], scene_samples[64:])
    elapsed = time.process_time() - start
    return model, elapsed


# -- criterion 1: published per-class table from the confusion matrix --------


def test_criterion_1_per_class_table_and_accuracy():
    per_class = class_metrics(REF_CONFUSION)
    for metrics, (precision, recall, f1) in zip(per_class, REF_PER_CLASS):
        assert round(metrics.precision, 2) == pytest.approx(precision)
        assert round(metrics.recall, 2) == pytest.approx(recall)
        assert round(metrics.f1, 2) == pytest.approx(f1)
    acc = accuracy(REF_CONFUSION)
    assert acc == pytest.approx(245 / 446)
    assert round(acc, 2) == 0.55
    _report(1, "per-class table reproduced from confusion matrix")


# -- criterion 2: macro averages ---------------------------------------------


def test_criterion_2_macro_averages():
    s = summary(REF_CONFUSION)
    assert abs(s.macro_precision - 0.589) <= 0.001
    # The published macro F1 averages the already-rounded per-class column.
    rounded_f1_mean = np.mean([round(m.f1, 2) for m in class_metrics(REF_CONFUSION)])
    assert abs(rounded_f1_mean - 0.524) <= 0.001
    assert s.macro_f1 < s.macro_precision
    _report(2, "macro precision 0.589, macro F1 0.524 and lower")


# -- criterion 3: training reaches target quality within budget --------------


def test_criterion_3a_classifier_validation_accuracy(trained_classifier):
    model, elapsed = trained_classifier
    best = model.history_.records[model.best_epoch_]
    assert elapsed < TRAIN_BUDGET_SECONDS, f"classifier training took {elapsed:.0f}s CPU"
    assert best.val_score >= 0.90, f"best validation accuracy {best.val_score:.3f}"
    _report(3, f"classifier validation accuracy {best.val_score:.3f} in {elapsed:.0f}s CPU")


def test_criterion_3b_segmenter_validation_iou(trained_segmenter):
    model, elapsed = trained_segmenter
    best = model.history_.records[model.best_epoch_]
    assert elapsed < TRAIN_BUDGET_SECONDS, f"segmenter training took {elapsed:.0f}s CPU"
    assert best.val_score >= 0.90, f"best validation IoU {best.val_score:.3f}"
    _report(3, f"segmenter validation IoU {best.val_score:.3f} in {elapsed:.0f}s CPU")


# -- criterion 4: end-to-end bulk pipeline -----------------------------------


def test_criterion_4_bulk_pipeline(trained_classifier, trained_segmenter):
    classifier, _ = trained_classifier
    segmenter, _ = trained_segmenter
    rng = np.random.default_rng(123)
    specs = [
        random_scene_spec(rng, canvas=(192, 192), total_grains=(10, 14), seed=5000 + i)
        for i in range(10)
    ]
    l1_errors = []
    for spec in specs:
        sample = gen_bulk_scene(spec)
        report = predict_bulk(sample.pixels, segmenter, classifier)
        truth_total = sum(spec.counts.values())
        assert report.total == truth_total, (
            f"scene seed {spec.seed}: predicted {report.total} grains, expected {truth_total}"
        )
        l1_errors.append(compare_composition(report, spec.counts).l1_fraction_error)
    mean_l1 = float(np.mean(l1_errors))
    assert mean_l1 <= 0.10, f"mean composition L1 error {mean_l1:.3f}"

    # Worked arithmetic fixture: predicted 7/8/3/3 against a true 5/5/4/7 mixture.
    V = RiceVariety
    predicted = report_from_counts(
        {V.Hashemi: 7, V.AnbarBoo: 8, V.Khazar: 3, V.SadreeDomSiahe: 3}
    )
    truth = {V.Hashemi: 5, V.AnbarBoo: 5, V.Khazar: 4, V.SadreeDomSiahe: 7}
    error = compare_composition(predicted, truth)
    assert error.l1_fraction_error == pytest.approx(10 / 21, abs=1e-12)
    assert round(error.l1_fraction_error, 4) == 0.4762
    _report(4, f"exact grain counts on 10/10 scenes, mean L1 {mean_l1:.3f}")


# -- criterion 5: numerical soundness ----------------------------------------


def _central_difference(loss_fn, flat, idx, original, eps):
    with torch.no_grad():
        flat[idx] = original + eps
        loss_plus = float(loss_fn())
        flat[idx] = original - eps
        loss_minus = float(loss_fn())
        flat[idx] = original
    return (loss_plus - loss_minus) / (2 * eps)


def _finite_difference_check(make_net, make_loss, seed, n_samples=110, eps=1e-6):
    """Compare autograd gradients against central differences in float64.

    The networks are piecewise smooth (ReLU, max-pool), so a finite
    difference only measures the true derivative away from kinks. Points
    where two step sizes disagree are non-smooth and skipped; at least
    `n_samples` smooth parameters must validate.
    """
    torch.manual_seed(seed)
    net = make_net().double()
    net.eval()
    loss_fn = make_loss(net)
    loss = loss_fn()
    loss.backward()
    grads = {name: p.grad.clone() for name, p in net.named_parameters()}
    candidates = [
        (name, idx)
        for name, p in net.named_parameters()
        for idx in range(p.numel())
    ]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(candidates))
    params = dict(net.named_parameters())
    checked = skipped = 0
    for pick in order:
        if checked >= n_samples:
            break
        name, idx = candidates[int(pick)]
        flat = params[name].data.view(-1)
        original = float(flat[idx])
        fd_coarse = _central_difference(loss_fn, flat, idx, original, eps)
        fd = _central_difference(loss_fn, flat, idx, original, eps / 2)
        scale = max(abs(fd), abs(fd_coarse), 1e-4)
        if abs(fd - fd_coarse) / scale > 5e-4:
            skipped += 1  # a kink lies inside the stencil
            continue
        analytic = float(grads[name].view(-1)[idx])
        scale = max(abs(fd), abs(analytic), 1e-4)
        assert abs(fd - analytic) / scale < 1e-3, (
            f"{name}[{idx}]: finite difference {fd:.8g} vs autograd {analytic:.8g}"
        )
        checked += 1
    assert checked >= 100, f"only {checked} smooth parameters validated ({skipped} skipped)"
    assert skipped <= checked // 4, f"too many non-smooth samples: {skipped}"


def test_criterion_5_gradient_checks():
    def make_classifier():
        return ResidualClassifierNet((4, 8), (1, 1), 7)

    def classifier_loss(net):
        torch.manual_seed(99)
        x = torch.randn(2, 3, 16, 16, dtype=torch.float64)
        y = torch.tensor([1, 4])
        return lambda: F.cross_entropy(net(x), y)

    def make_unet():
        return UNet(depth=1, base_channels=2)

    def unet_loss(net):
        torch.manual_seed(99)
        x = torch.randn(2, 3, 8, 8, dtype=torch.float64)
        y = (torch.rand(2, 1, 8, 8, dtype=torch.float64) > 0.5).double()
        return lambda: segmentation_loss(net(x), y)

    _finite_difference_check(make_classifier, classifier_loss, seed=0)
    _finite_difference_check(make_unet, unet_loss, seed=1)
    _report(5, "finite-difference gradient checks, >=100 parameters each model")


def test_criterion_5_architecture_invariants():
    # Residual blocks with a zeroed residual branch are exact identities
    # on non-negative inputs.
    for channels in (2, 4, 8):
        block = ResidualBlock(channels, channels, stride=1)
        block.zero_residual_branch()
        block.eval()
        x = torch.rand(2, channels, 8, 8)
        assert torch.allclose(block(x), x, atol=1e-6)

    # Projection blocks produce the documented output shapes.
    for in_ch, out_ch, stride in ((3, 8, 1), (8, 16, 2), (4, 4, 2)):
        block = ResidualBlock(in_ch, out_ch, stride)
        out = block(torch.randn(2, in_ch, 8, 8))
        assert out.shape == (2, out_ch, 8 // stride, 8 // stride)

    # Encoder-decoder outputs match the input resolution, and every skip
    # connection meets its upsampled counterpart at the same spatial shape.
    for depth in (1, 2, 3):
        for base_channels in (2, 4):
            for size in (16, 32):
                net = seeded(lambda: UNet(depth, base_channels), seed=0)
                x = torch.randn(1, 3, size, size)
                out, traces = net.forward_with_shapes(x)
                assert out.shape == (1, 1, size, size)
                assert len(traces) == depth
                for skip_shape, up_shape in traces:
                    assert skip_shape == up_shape
    _report(5, "residual identity and encoder-decoder shape invariants")


def test_criterion_5_output_range_invariants():
    torch.manual_seed(0)
    classifier = build_classifier(
        ClassifierConfig(input_size=32, stage_widths=(8,), blocks_per_stage=(1,)), seed=0
    )
    classifier.eval()
    with torch.no_grad():
        for _ in range(10):
            logits = classifier(torch.randn(100, 3, 32, 32))
            probs = torch.softmax(logits, dim=1)
            assert torch.all(probs >= 0)
            assert torch.allclose(probs.sum(dim=1), torch.ones(100), atol=1e-5)

    unet = seeded(lambda: UNet(depth=2, base_channels=4), seed=0)
    unet.eval()
    with torch.no_grad():
        for _ in range(10):
            probs = torch.sigmoid(unet(torch.randn(100, 3, 16, 16)))
            assert torch.all(probs > 0) and torch.all(probs < 1)
    _report(5, "softmax simplex and sigmoid range on 1000 random inputs each")


# -- criterion 6: randomized property suites ---------------------------------


def test_criterion_6_iou_properties(rng):
    for _ in range(200):
        a = rng.random((12, 12)) < rng.uniform(0.0, 0.7)
        b = rng.random((12, 12)) < rng.uniform(0.0, 0.7)
        assert iou(a, b) == pytest.approx(iou(b, a))
        assert iou(a, a) == 1.0
        assert 0.0 <= iou(a, b) <= 1.0
    assert iou(np.zeros((5, 5)), np.zeros((5, 5))) == 1.0
    _report(6, "IoU symmetry, identity, and empty-empty properties (200 cases)")


def test_criterion_6_binarize_monotonicity(rng):
    for _ in range(200):
        probs = rng.random((10, 10))
        t_low, t_high = sorted(rng.uniform(0.05, 0.95, size=2))
        if t_low == t_high:
            continue
        low = binarize(probs, t_low)
        high = binarize(probs, t_high)
        assert not np.any(high & ~low)
    _report(6, "binarize threshold monotonicity (200 cases)")


def test_criterion_6_augmentation_properties(rng):
    identity = identity_config()
    for case in range(200):
        sample = random_labeled(rng, int(rng.integers(0, 7)))
        image = sample.pixels
        for axis in ("horizontal", "vertical"):
            assert np.array_equal(flip(flip(image, axis), axis), image)
        assert np.array_equal(rotate(rotate(rotate(rotate(image, 90), 90), 90), 90), image)
        out = random_augment(sample, identity, rng)
        assert np.array_equal(out.pixels, image)
        assert out.label is sample.label
    _report(6, "augmentation involution and identity properties (200 cases)")


def test_criterion_6_split_partition(rng):
    for case in range(200):
        sizes = {int(v): int(rng.integers(3, 10)) for v in rng.choice(7, size=2, replace=False)}
        samples = [
            random_labeled(rng, variety, source_id=f"{variety}-{i}")
            for variety, size in sizes.items()
            for i in range(size)
        ]
        split = stratified_split(samples, seed=case)
        ids = [s.source_id for part in split.parts for s in part]
        assert sorted(ids) == sorted(s.source_id for s in samples)
        assert len(set(ids)) == len(samples)
    _report(6, "split disjointness and exhaustiveness (200 cases)")


# -- criterion 7: CLI determinism --------------------------------------------


def _run_cli(args):
    result = subprocess.run(
        [sys.executable, "-m", "graindeck.cli", *args],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    return result


def _hash_tree(root):
    # The run manifest records the output path itself, so it is excluded
    # from byte-identity comparisons between runs with different --out.
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "run-manifest.json"
    }


def test_criterion_7_cli_determinism(tmp_path):
    # Corpus generation, twice with identical arguments.
    gen_args = ["synth-gen", "--seed", "21", "--grains", "14", "--scenes", "1", "--canvas", "160"]
    _run_cli(gen_args + ["--out", str(tmp_path / "gen-a")])
    _run_cli(gen_args + ["--out", str(tmp_path / "gen-b")])
    assert _hash_tree(tmp_path / "gen-a") == _hash_tree(tmp_path / "gen-b")

    # A small end-to-end training run, twice with identical config and seed.
    data_dir = tmp_path / "corpus"
    write_grain_corpus(data_dir, per_class=10, seed=2)
    config_path = tmp_path / "train.json"
    config_path.write_text(
        json.dumps(
            {
                "classifier": {"input_size": 32, "stage_widths": [8], "blocks_per_stage": [1]},
                "hyper": {"epochs": 2, "batch_size": 16, "learning_rate": 0.02},
            }
        )
    )
    train_args = [
        "train-classifier",
        "--config",
        str(config_path),
        "--data",
        str(data_dir),
        "--seed",
        "13",
    ]
    _run_cli(train_args + ["--out", str(tmp_path / "train-a")])
    _run_cli(train_args + ["--out", str(tmp_path / "train-b")])
    hashes_a = _hash_tree(tmp_path / "train-a")
    hashes_b = _hash_tree(tmp_path / "train-b")
    for artifact in ("metrics.json", "history.csv", "confusion.csv", "checkpoint/weights.npz"):
        assert artifact in hashes_a
        assert hashes_a[artifact] == hashes_b[artifact], artifact
    assert hashes_a == hashes_b
    _report(7, "byte-identical artifacts across repeated CLI runs")
