"""Encoder-decoder binary segmenter for bulk grain images.

`GrainSegmenter` mirrors the classifier's estimator protocol. The loss is
binary cross-entropy plus the Dice complement with equal weights, and the
checkpoint returned is the best-validation-IoU epoch.
"""

import copy
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import BulkSample
from .errors import ConfigError, DivergenceError
from .nets import UNet, seeded
from .training import EpochRecord, Hyperparams, TrainHistory, normalize_pixels, pad_to_square
from .metrics import iou


@dataclass
class SegmenterConfig:
    input_size: int = 256
    depth: int = 4
    base_channels: int = 16
    threshold: float = 0.5

    def __post_init__(self):
        if self.depth < 1 or self.base_channels < 1:
            raise ConfigError("depth and base_channels must be positive")
        if self.input_size % (2 ** self.depth) != 0:
            raise ConfigError(
                f"input_size {self.input_size} is not divisible by 2^depth = {2 ** self.depth}"
            )
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0,1), got {self.threshold}")


def build_unet(config: SegmenterConfig, seed: int) -> UNet:
    """Build the segmentation network with deterministic initialization."""
    return seeded(lambda: UNet(config.depth, config.base_channels), seed)


def dice_complement(probs: torch.Tensor, targets: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """1 - Dice coefficient, averaged over the batch; 0 iff exact match, <= 1 always."""
    p = probs.flatten(1)
    t = targets.flatten(1)
    intersection = (p * t).sum(dim=1)
    dice = (2 * intersection + eps) / (p.sum(dim=1) + t.sum(dim=1) + eps)
    return (1 - dice).mean()


def segmentation_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Equal-weight sum of BCE and Dice complement."""
    bce = F.binary_cross_entropy_with_logits(logits, targets)
    return bce + dice_complement(torch.sigmoid(logits), targets)


def binarize(prob_mask: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Strictly-greater-than threshold; a value equal to the threshold maps to 0."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0,1), got {threshold}")
    return (np.asarray(prob_mask) > threshold).astype(np.uint8)


class GrainSegmenter(BaseEstimator):
    """Per-pixel grain probability model over RGB bulk images."""

    def __init__(
        self,
        config: Optional[SegmenterConfig] = None,
        hyper: Optional[Hyperparams] = None,
    ):
        self.config = config
        self.hyper = hyper

    # -- fitting ---------------------------------------------------------

    def fit(
        self,
        train_pairs: Sequence[BulkSample],
        val_pairs: Optional[Sequence[BulkSample]] = None,
    ) -> "GrainSegmenter":
        config = self.config or SegmenterConfig()
        hyper = self.hyper or Hyperparams(batch_size=4)
        if not train_pairs:
            raise ValueError("fit requires at least one training pair")
        val_pairs = val_pairs if val_pairs else train_pairs

        torch.manual_seed(hyper.seed)
        net = build_unet(config, hyper.seed)
        train_x, train_y = self._batch_tensors(train_pairs, config)
        val_masks = [p.mask for p in val_pairs]
        val_x, val_y = self._batch_tensors(val_pairs, config)

        optimizer = torch.optim.SGD(
            net.parameters(), lr=hyper.learning_rate, momentum=hyper.momentum
        )
        history = TrainHistory(hyper=hyper)
        best_state, best_score, best_epoch = None, -1.0, -1
        n = len(train_pairs)

        for epoch in range(hyper.epochs):
            for group in optimizer.param_groups:
                group["lr"] = hyper.lr_at(epoch)
            order = np.random.default_rng(np.random.SeedSequence((hyper.seed, epoch))).permutation(n)

            net.train()
            total_loss = 0.0
            for batch_index, start in enumerate(range(0, n, hyper.batch_size)):
                indices = order[start : start + hyper.batch_size]
                batch = train_x[indices]
                target = train_y[indices]
                optimizer.zero_grad()
                loss = segmentation_loss(net(batch), target)
                if not torch.isfinite(loss):
                    raise DivergenceError(epoch, batch_index, float(loss))
                loss.backward()
                optimizer.step()
                total_loss += float(loss.detach()) * len(indices)

            val_loss, val_iou = self._evaluate(net, val_x, val_y, val_pairs, val_masks, config)
            history.records.append(
                EpochRecord(epoch=epoch, train_loss=total_loss / n, val_loss=val_loss, val_score=val_iou)
            )
            if val_iou > best_score:
                best_state = copy.deepcopy(net.state_dict())
                best_score, best_epoch = val_iou, epoch

        net.load_state_dict(best_state)
        net.eval()
        self.net_ = net
        self.config_ = config
        self.history_ = history
        self.best_epoch_ = best_epoch
        return self

    def _batch_tensors(self, pairs: Sequence[BulkSample], config: SegmenterConfig):
        xs, ys = [], []
        for pair in pairs:
            x, y = self._resize_pair(pair.pixels, pair.mask, config.input_size)
            xs.append(x)
            ys.append(y)
        return torch.cat(xs), torch.cat(ys)

    @staticmethod
    def _resize_pair(pixels: np.ndarray, mask: np.ndarray, size: int):
        x = normalize_pixels(pixels).unsqueeze(0)
        y = torch.from_numpy(np.asarray(mask, dtype=np.float32))[None, None]
        if x.shape[-2:] != (size, size):
            x = F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)
            y = (F.interpolate(y, size=(size, size), mode="bilinear", align_corners=False) > 0.5).float()
        return x, y

    def _evaluate(self, net, val_x, val_y, val_pairs, val_masks, config, batch_size: int = 4):
        net.eval()
        losses = 0.0
        ious = []
        with torch.no_grad():
            for start in range(0, len(val_x), batch_size):
                logits = net(val_x[start : start + batch_size])
                target = val_y[start : start + batch_size]
                losses += float(segmentation_loss(logits, target)) * len(target)
        for pair, mask in zip(val_pairs, val_masks):
            prob = self._predict_with_net(net, config, pair.pixels)
            ious.append(iou(binarize(prob, config.threshold), mask))
        return losses / len(val_x), float(np.mean(ious))

    # -- inference -------------------------------------------------------

    def _require_fitted(self) -> UNet:
        net = getattr(self, "net_", None)
        if net is None:
            raise NotFittedError("GrainSegmenter is not fitted")
        return net

    def predict_proba_mask(self, image: np.ndarray) -> np.ndarray:
        """Per-pixel grain probability in [0,1], same shape as the input image."""
        return self._predict_with_net(self._require_fitted(), self.config_, image)

    @staticmethod
    def _predict_with_net(net: UNet, config: SegmenterConfig, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image)
        h, w = image.shape[:2]
        square = pad_to_square(image)
        side = square.shape[0]
        r0, c0 = (side - h) // 2, (side - w) // 2
        x = normalize_pixels(square).unsqueeze(0)
        resized = side != config.input_size
        if resized:
            x = F.interpolate(
                x, size=(config.input_size, config.input_size), mode="bilinear", align_corners=False
            )
        net.eval()
        with torch.no_grad():
            probs = torch.sigmoid(net(x))
            if resized:
                probs = F.interpolate(probs, size=(side, side), mode="bilinear", align_corners=False)
        return probs[0, 0, r0 : r0 + h, c0 : c0 + w].numpy().astype(np.float64)

    def predict_mask(self, image: np.ndarray, threshold: Optional[float] = None) -> np.ndarray:
        """Binary grain mask at the configured (or given) threshold."""
        if threshold is None:
            threshold = self.config_.threshold
        return binarize(self.predict_proba_mask(image), threshold)

    def score(self, pairs: Sequence[BulkSample]) -> float:
        """Mean per-image IoU against ground-truth masks."""
        return float(np.mean([iou(self.predict_mask(p.pixels), p.mask) for p in pairs]))

    def _load_fitted(self, net: UNet, config: SegmenterConfig):
        net.eval()
        self.net_ = net
        self.config_ = config
        return self
