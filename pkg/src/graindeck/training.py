"""Shared training plumbing: hyperparameters, history records, preprocessing."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from .augment import border_median

# Pixel normalization applied before every network: (value/255 - 0.5) / 0.25.
NORM_OFFSET = 0.5
NORM_SCALE = 0.25


@dataclass
class Hyperparams:
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 8
    seed: int = 0
    momentum: float = 0.9
    lr_decay_every: int = 3  # epochs between step decays
    lr_decay_factor: float = 0.5

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay_factor ** (epoch // self.lr_decay_every)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_score: float  # accuracy for the classifier, IoU for the segmenter


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    hyper: Optional[Hyperparams] = None

    @property
    def best_epoch(self) -> int:
        return max(self.records, key=lambda r: (r.val_score, -r.epoch)).epoch


def normalize_pixels(pixels: np.ndarray) -> torch.Tensor:
    """uint8 HxWx3 image to normalized float32 CxHxW tensor."""
    arr = np.asarray(pixels, dtype=np.float32) / 255.0
    tensor = torch.from_numpy(arr).permute(2, 0, 1)
    return (tensor - NORM_OFFSET) / NORM_SCALE


def pad_to_square(pixels: np.ndarray, fill: Optional[Tuple[int, int, int]] = None) -> np.ndarray:
    """Pad the short sides symmetrically to a square canvas."""
    h, w = pixels.shape[:2]
    if h == w:
        return pixels
    side = max(h, w)
    if fill is None:
        fill = border_median(pixels)
    out = np.empty((side, side, 3), dtype=pixels.dtype)
    out[:] = fill
    r0, c0 = (side - h) // 2, (side - w) // 2
    out[r0 : r0 + h, c0 : c0 + w] = pixels
    return out


def to_model_input(pixels: np.ndarray, input_size: int) -> torch.Tensor:
    """Pad to square, normalize, and resize to the network's input size."""
    tensor = normalize_pixels(pad_to_square(pixels)).unsqueeze(0)
    if tensor.shape[-1] != input_size:
        tensor = F.interpolate(tensor, size=(input_size, input_size), mode="bilinear", align_corners=False)
    return tensor
