"""Dataset model, on-disk layout contracts, loading, and stratified splitting.

Single-grain layout::

    <root>/<VarietyName>/<file>.{png,jpg,jpeg}

Bulk layout::

    <root>/images/<id>.png
    <root>/masks/<id>.png          # 8-bit grayscale; value > 127 means grain
    <root>/composition.json        # optional: id -> {variety name -> count}
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    InsufficientClassError,
    LayoutError,
    PairingError,
    ShapeMismatchError,
)
from .varieties import VARIETY_NAMES, RiceVariety

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MASK_THRESHOLD = 127
MIN_IMAGE_SIDE = 32


@dataclass
class LabeledImage:
    """An RGB image of a single grain with its variety label."""

    pixels: np.ndarray  # H x W x 3 uint8
    label: RiceVariety
    source_id: str

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"pixels must be HxWx3, got shape {self.pixels.shape}")
        h, w = self.pixels.shape[:2]
        if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
            raise ValueError(f"image must be at least {MIN_IMAGE_SIDE}px per side, got {h}x{w}")
        self.label = RiceVariety(self.label)


@dataclass
class BulkSample:
    """A bulk scene paired with its binary ground-truth mask."""

    pixels: np.ndarray  # H x W x 3 uint8
    mask: np.ndarray  # H x W, values in {0, 1}
    source_id: str
    composition: Optional[Dict[RiceVariety, int]] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.pixels.shape[:2] != self.mask.shape:
            raise ShapeMismatchError(
                self.pixels.shape[:2], self.mask.shape, f"sample {self.source_id!r}"
            )
        bad = set(np.unique(self.mask)) - {0, 1}
        if bad:
            raise ValueError(f"mask must be binary, found values {sorted(bad)}")


@dataclass
class DatasetSplit:
    """A disjoint, exhaustive train/validation/test partition."""

    train: List[LabeledImage]
    validation: List[LabeledImage]
    test: List[LabeledImage]
    seed: int
    ratios: Tuple[float, float, float]

    @property
    def parts(self):
        return self.train, self.validation, self.test


def binarize_mask(values: np.ndarray) -> np.ndarray:
    """Map 8-bit mask pixels to {0, 1}: value > 127 means grain."""
    values = np.asarray(values)
    return (values > MASK_THRESHOLD).astype(np.uint8)


def _read_rgb(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise LayoutError(f"cannot decode image file {path}: {exc}") from exc


def _read_gray(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"))
    except (UnidentifiedImageError, OSError) as exc:
        raise LayoutError(f"cannot decode mask file {path}: {exc}") from exc


def load_grain_dataset(root_dir) -> List[LabeledImage]:
    """Load the single-grain dataset from its directory layout.

    The root must contain exactly one subdirectory per canonical variety
    name. Result order is deterministic: by (variety index, filename).
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise LayoutError(f"dataset root {root} is not a directory")
    present = sorted(p.name for p in root.iterdir() if p.is_dir())
    missing = sorted(set(VARIETY_NAMES) - set(present))
    extra = sorted(set(present) - set(VARIETY_NAMES))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing class directories: {missing}")
        if extra:
            parts.append(f"unexpected directories: {extra}")
        raise LayoutError(f"bad single-grain layout under {root}: " + "; ".join(parts))

    samples: List[LabeledImage] = []
    for name in VARIETY_NAMES:
        variety = RiceVariety[name]
        class_dir = root / name
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            samples.append(
                LabeledImage(
                    pixels=_read_rgb(path),
                    label=variety,
                    source_id=f"{name}/{path.name}",
                )
            )
    return samples


def load_bulk_dataset(root_dir) -> List[BulkSample]:
    """Load bulk scenes, pairing each image with its same-named mask."""
    root = Path(root_dir)
    images_dir = root / "images"
    masks_dir = root / "masks"
    if not images_dir.is_dir() or not masks_dir.is_dir():
        raise LayoutError(f"bulk root {root} must contain images/ and masks/")

    image_files = {p.name: p for p in images_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
    mask_files = {p.name: p for p in masks_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
    unpaired_images = sorted(set(image_files) - set(mask_files))
    unpaired_masks = sorted(set(mask_files) - set(image_files))
    if unpaired_images:
        raise PairingError(f"images without masks: {unpaired_images}")
    if unpaired_masks:
        raise PairingError(f"masks without images: {unpaired_masks}")

    compositions = {}
    comp_path = root / "composition.json"
    if comp_path.exists():
        raw = json.loads(comp_path.read_text())
        for source_id, counts in raw.items():
            compositions[source_id] = {
                RiceVariety.from_name(name): int(count) for name, count in counts.items()
            }

    samples = []
    for name in sorted(image_files):
        pixels = _read_rgb(image_files[name])
        mask_raw = _read_gray(mask_files[name])
        if pixels.shape[:2] != mask_raw.shape:
            raise ShapeMismatchError(pixels.shape[:2], mask_raw.shape, f"pair {name!r}")
        source_id = Path(name).stem
        samples.append(
            BulkSample(
                pixels=pixels,
                mask=binarize_mask(mask_raw),
                source_id=source_id,
                composition=compositions.get(source_id),
            )
        )
    return samples


def stratified_split(
    samples: Sequence[LabeledImage],
    ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> DatasetSplit:
    """Split samples per class with a seeded shuffle, then contiguous assignment.

    Deterministic: identical inputs and seed reproduce identical splits.
    Every class must have at least 3 samples when all three ratios are
    positive; zero ratios relax that requirement.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios)})")

    by_class: Dict[RiceVariety, List[LabeledImage]] = {v: [] for v in RiceVariety}
    for sample in samples:
        by_class[sample.label].append(sample)

    if all(r > 0 for r in ratios):
        for variety, members in by_class.items():
            if members and len(members) < 3:
                raise InsufficientClassError(
                    f"class {variety.name} has only {len(members)} samples; need at least 3"
                )

    train: List[LabeledImage] = []
    validation: List[LabeledImage] = []
    test: List[LabeledImage] = []
    root_seq = np.random.SeedSequence(seed)
    class_seqs = root_seq.spawn(len(RiceVariety))
    for variety, seq in zip(RiceVariety, class_seqs):
        members = list(by_class[variety])
        if not members:
            continue
        rng = np.random.default_rng(seq)
        order = rng.permutation(len(members))
        n = len(members)
        cut1 = int(round(n * ratios[0]))
        cut2 = int(round(n * (ratios[0] + ratios[1])))
        for pos, idx in enumerate(order):
            if pos < cut1:
                train.append(members[idx])
            elif pos < cut2:
                validation.append(members[idx])
            else:
                test.append(members[idx])
    return DatasetSplit(train=train, validation=validation, test=test, seed=seed, ratios=ratios)
