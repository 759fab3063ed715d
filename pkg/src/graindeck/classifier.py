"""Residual-network variety classifier with a fine-tuning-style training loop.

`RiceClassifier` follows the sklearn estimator protocol: construct with
hyperparameters, `fit` on a dataset split, then `predict` / `predict_proba`.
Training starts with a head-only warmup (only the linear head updates) before
unfreezing the whole network, and returns the best-validation-accuracy epoch.
"""

import copy
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .augment import AugmentConfig, random_augment
from .corpus import DatasetSplit, LabeledImage
from .errors import ConfigError, DivergenceError
from .nets import ResidualClassifierNet, seeded
from .training import EpochRecord, Hyperparams, TrainHistory, to_model_input
from .varieties import NUM_VARIETIES, RiceVariety


@dataclass
class ClassifierConfig:
    """Desk-scale residual network; see `full_scale` for a ResNet50-style preset."""

    input_size: int = 96
    stage_widths: Tuple[int, ...] = (16, 32, 64)
    blocks_per_stage: Tuple[int, ...] = (2, 2, 2)
    num_classes: int = NUM_VARIETIES
    head_only_epochs: int = 1

    def __post_init__(self):
        if len(self.stage_widths) != len(self.blocks_per_stage):
            raise ConfigError("stage_widths and blocks_per_stage must have equal length")
        if any(w <= 0 for w in self.stage_widths):
            raise ConfigError(f"stage widths must be positive, got {self.stage_widths}")
        if self.input_size < 8:
            raise ConfigError(f"input_size too small: {self.input_size}")
        if self.head_only_epochs < 0:
            raise ConfigError("head_only_epochs must be non-negative")

    @classmethod
    def full_scale(cls) -> "ClassifierConfig":
        return cls(
            input_size=224,
            stage_widths=(64, 128, 256, 512),
            blocks_per_stage=(3, 4, 6, 3),
        )


def build_classifier(config: ClassifierConfig, seed: int) -> ResidualClassifierNet:
    """Build the network with deterministic seed-keyed initialization."""
    return seeded(
        lambda: ResidualClassifierNet(
            config.stage_widths, config.blocks_per_stage, config.num_classes
        ),
        seed,
    )


def label_from_probabilities(probs) -> RiceVariety:
    """Argmax over class probabilities; ties break toward the lowest index."""
    probs = np.asarray(probs)
    if probs.shape != (NUM_VARIETIES,):
        raise ValueError(f"expected {NUM_VARIETIES} probabilities, got shape {probs.shape}")
    return RiceVariety(int(np.argmax(probs)))


class RiceClassifier(BaseEstimator):
    """Seven-class grain classifier over RGB images of single grains."""

    def __init__(
        self,
        config: Optional[ClassifierConfig] = None,
        hyper: Optional[Hyperparams] = None,
        augment: Optional[AugmentConfig] = None,
    ):
        self.config = config
        self.hyper = hyper
        self.augment = augment

    # -- fitting ---------------------------------------------------------

    def fit(self, split: DatasetSplit) -> "RiceClassifier":
        """Train on split.train, selecting the best epoch by split.validation accuracy."""
        config = self.config or ClassifierConfig()
        hyper = self.hyper or Hyperparams()
        if not split.train or not split.validation:
            raise ValueError("fit requires non-empty train and validation sets")

        torch.manual_seed(hyper.seed)
        net = build_classifier(config, hyper.seed)
        val_inputs, val_targets = self._batch_tensors(split.validation, config)

        optimizer = torch.optim.SGD(
            net.parameters(), lr=hyper.learning_rate, momentum=hyper.momentum
        )
        history = TrainHistory(hyper=hyper)
        best_state, best_score, best_epoch = None, -1.0, -1
        n = len(split.train)

        for epoch in range(hyper.epochs):
            head_only = epoch < config.head_only_epochs
            for name, param in net.named_parameters():
                param.requires_grad = name.startswith("head.") or not head_only
            for group in optimizer.param_groups:
                group["lr"] = hyper.lr_at(epoch)

            epoch_seq = np.random.SeedSequence((hyper.seed, epoch))
            shuffle_rng = np.random.default_rng(epoch_seq)
            order = shuffle_rng.permutation(n)
            sample_seqs = epoch_seq.spawn(n)

            net.train()
            total_loss = 0.0
            for batch_index, start in enumerate(range(0, n, hyper.batch_size)):
                indices = order[start : start + hyper.batch_size]
                inputs, targets = [], []
                for idx in indices:
                    sample = split.train[idx]
                    if self.augment is not None:
                        rng = np.random.default_rng(sample_seqs[idx])
                        sample = random_augment(sample, self.augment, rng)
                    inputs.append(to_model_input(sample.pixels, config.input_size))
                    targets.append(int(sample.label))
                batch = torch.cat(inputs)
                target = torch.tensor(targets, dtype=torch.long)
                optimizer.zero_grad()
                loss = F.cross_entropy(net(batch), target)
                if not torch.isfinite(loss):
                    raise DivergenceError(epoch, batch_index, float(loss))
                loss.backward()
                optimizer.step()
                total_loss += float(loss.detach()) * len(indices)

            val_loss, val_acc = self._evaluate(net, val_inputs, val_targets)
            history.records.append(
                EpochRecord(epoch=epoch, train_loss=total_loss / n, val_loss=val_loss, val_score=val_acc)
            )
            if val_acc > best_score:
                best_state = copy.deepcopy(net.state_dict())
                best_score, best_epoch = val_acc, epoch

        net.load_state_dict(best_state)
        net.eval()
        self.net_ = net
        self.config_ = config
        self.history_ = history
        self.best_epoch_ = best_epoch
        return self

    def _batch_tensors(self, samples: Sequence[LabeledImage], config: ClassifierConfig):
        inputs = torch.cat([to_model_input(s.pixels, config.input_size) for s in samples])
        targets = torch.tensor([int(s.label) for s in samples], dtype=torch.long)
        return inputs, targets

    @staticmethod
    def _evaluate(net, inputs, targets, batch_size: int = 64):
        net.eval()
        losses, correct = 0.0, 0
        with torch.no_grad():
            for start in range(0, len(inputs), batch_size):
                logits = net(inputs[start : start + batch_size])
                target = targets[start : start + batch_size]
                losses += float(F.cross_entropy(logits, target, reduction="sum"))
                correct += int((logits.argmax(dim=1) == target).sum())
        return losses / len(inputs), correct / len(inputs)

    # -- inference -------------------------------------------------------

    def _require_fitted(self) -> ResidualClassifierNet:
        net = getattr(self, "net_", None)
        if net is None:
            raise NotFittedError("RiceClassifier is not fitted")
        return net

    def predict_proba(self, image: np.ndarray) -> np.ndarray:
        """Class probabilities for one image, in canonical variety order."""
        net = self._require_fitted()
        net.eval()
        with torch.no_grad():
            logits = net(to_model_input(np.asarray(image), self.config_.input_size))
            probs = torch.softmax(logits, dim=1)[0]
        return probs.numpy().astype(np.float64)

    def predict_label(self, image: np.ndarray) -> RiceVariety:
        """Most probable variety; ties break toward the lowest canonical index."""
        return label_from_probabilities(self.predict_proba(image))

    def predict(self, images: Sequence[np.ndarray]) -> List[RiceVariety]:
        return [self.predict_label(image) for image in images]

    def score(self, samples: Sequence[LabeledImage]) -> float:
        """Accuracy over labeled samples."""
        hits = sum(self.predict_label(s.pixels) == s.label for s in samples)
        return hits / len(samples)

    def _load_fitted(self, net: ResidualClassifierNet, config: ClassifierConfig):
        net.eval()
        self.net_ = net
        self.config_ = config
        return self
