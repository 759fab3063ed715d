"""Label-preserving augmentation: flips, rotation, and scaling.

Right-angle rotations are exact pixel permutations; arbitrary angles use
bilinear interpolation on the same canvas with border-median fill. Scaling
resamples and then center-crops or pads back to the original shape.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from PIL import Image

from .corpus import LabeledImage
from .errors import ConfigError

RIGHT_ANGLES = (0, 90, 180, 270)


@dataclass
class AugmentConfig:
    rotation_degrees: Tuple[float, float] = (-15.0, 15.0)
    right_angles: Tuple[int, ...] = RIGHT_ANGLES
    scale_range: Tuple[float, float] = (0.9, 1.1)
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.rotation_degrees
        if lo > hi:
            raise ConfigError(f"rotation interval {self.rotation_degrees} is not ordered")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ConfigError(f"scale range {self.scale_range} is not a positive interval")
        for p in (self.hflip_prob, self.vflip_prob):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"flip probability {p} outside [0,1]")
        if any(a % 90 != 0 for a in self.right_angles):
            raise ConfigError(f"right angles must be multiples of 90, got {self.right_angles}")


def identity_config() -> AugmentConfig:
    """A config whose draws always produce the identity transform."""
    return AugmentConfig(
        rotation_degrees=(0.0, 0.0),
        right_angles=(0,),
        scale_range=(1.0, 1.0),
        hflip_prob=0.0,
        vflip_prob=0.0,
    )


def border_median(image: np.ndarray) -> Tuple[int, int, int]:
    """Per-channel median of the one-pixel border ring."""
    top, bottom = image[0], image[-1]
    left, right = image[1:-1, 0], image[1:-1, -1]
    ring = np.concatenate([top, bottom, left, right], axis=0)
    return tuple(int(v) for v in np.median(ring, axis=0))


def flip(image: np.ndarray, axis: str) -> np.ndarray:
    """Mirror the image horizontally (left-right) or vertically (top-bottom)."""
    if axis in ("horizontal", "h"):
        return np.ascontiguousarray(image[:, ::-1])
    if axis in ("vertical", "v"):
        return np.ascontiguousarray(image[::-1])
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate counterclockwise.

    Multiples of 90 are exact permutations (shape transposes for 90/270).
    Other angles interpolate bilinearly onto the same canvas, filling exposed
    corners with the border-median color.
    """
    if float(degrees) % 90.0 == 0.0:
        k = int(round(float(degrees) / 90.0)) % 4
        return np.ascontiguousarray(np.rot90(image, k))
    fill = border_median(image)
    pil = Image.fromarray(image)
    rotated = pil.rotate(float(degrees), resample=Image.BILINEAR, expand=False, fillcolor=fill)
    return np.asarray(rotated)


def scale(image: np.ndarray, factor: float) -> np.ndarray:
    """Resample by `factor`, then center-crop or pad back to the input shape."""
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    if factor == 1.0:
        return image.copy()
    h, w = image.shape[:2]
    nh, nw = max(1, round(h * factor)), max(1, round(w * factor))
    resized = np.asarray(Image.fromarray(image).resize((nw, nh), resample=Image.BILINEAR))

    out = np.empty_like(image)
    out[:] = border_median(image)
    if nh >= h:  # crop the center
        r0, c0 = (nh - h) // 2, (nw - w) // 2
        out[:] = resized[r0 : r0 + h, c0 : c0 + w]
    else:  # pad around the center
        r0, c0 = (h - nh) // 2, (w - nw) // 2
        out[r0 : r0 + nh, c0 : c0 + nw] = resized
    return out


def draw_parameters(config: AugmentConfig, rng: np.random.Generator):
    """Draw one (scale, degrees, hflip, vflip) tuple from the config."""
    factor = float(rng.uniform(*config.scale_range))
    base = int(config.right_angles[rng.integers(0, len(config.right_angles))])
    jitter = float(rng.uniform(*config.rotation_degrees))
    do_h = bool(rng.random() < config.hflip_prob)
    do_v = bool(rng.random() < config.vflip_prob)
    return factor, base + jitter, do_h, do_v


def random_augment(sample: LabeledImage, config: AugmentConfig, rng: np.random.Generator) -> LabeledImage:
    """Apply a randomly drawn scale, rotation, and flips; label is preserved."""
    factor, degrees, do_h, do_v = draw_parameters(config, rng)
    pixels = scale(sample.pixels, factor)
    pixels = rotate(pixels, degrees)
    if do_h:
        pixels = flip(pixels, "horizontal")
    if do_v:
        pixels = flip(pixels, "vertical")
    return LabeledImage(pixels=pixels, label=sample.label, source_id=sample.source_id)
