"""Procedural generation of single-grain images and bulk scenes.

Grains are rendered as rotated, sheared ellipses with speckle texture on a
noisy dark background. Every scene carries a pixel-exact mask and a known
per-variety composition, so downstream stages can be verified end to end.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image

from .corpus import MIN_IMAGE_SIDE, BulkSample, LabeledImage
from .errors import CapacityError, ConfigError
from .varieties import RiceVariety

BACKGROUND_COLOR = (70, 64, 58)
BACKGROUND_NOISE = 8
SPECKLE_DARKEN = 60
CROP_PAD = 4
PLACEMENT_MARGIN = 2
MAX_PLACEMENT_ATTEMPTS = 500

# Two styles must differ by at least one of these margins to count as
# separated in that dimension; the manifest styles clear both checks.
COLOR_SEPARATION_FLOOR = 30.0
AXIS_RATIO_SEPARATION_FLOOR = 0.25


@dataclass(frozen=True)
class GrainStyle:
    """Rendering parameters for one variety's grains."""

    variety: RiceVariety
    major_axis: float  # full length, pixels
    minor_axis: float  # full width, pixels
    base_color: Tuple[int, int, int]
    speckle_density: float
    curvature: float  # dimensionless bend factor

    def __post_init__(self):
        if not self.major_axis > self.minor_axis > 0:
            raise ConfigError(
                f"require major_axis > minor_axis > 0, got {self.major_axis}/{self.minor_axis}"
            )
        if not 0.0 <= self.speckle_density <= 1.0:
            raise ConfigError(f"speckle_density must be in [0,1], got {self.speckle_density}")


@dataclass
class SceneSpec:
    """Full description of one bulk scene; the scene is a pure function of it."""

    canvas: Tuple[int, int]
    counts: Dict[RiceVariety, int]
    allow_touching: bool = False
    seed: int = 0

    def __post_init__(self):
        h, w = self.canvas
        if h < 128 or w < 128:
            raise ConfigError(f"canvas must be at least 128x128, got {h}x{w}")
        if any(c < 0 for c in self.counts.values()):
            raise ConfigError("counts must be non-negative")
        if sum(self.counts.values()) < 1:
            raise ConfigError("scene must contain at least one grain")


def default_styles() -> Dict[RiceVariety, GrainStyle]:
    """The seven checked-in styles shared by all tests and tools."""
    path = Path(__file__).parent / "data" / "default_styles.json"
    return load_styles(path)


def load_styles(path) -> Dict[RiceVariety, GrainStyle]:
    raw = json.loads(Path(path).read_text())
    styles = {}
    for entry in raw["styles"]:
        style = GrainStyle(
            variety=RiceVariety.from_name(entry["variety"]),
            major_axis=float(entry["major_axis"]),
            minor_axis=float(entry["minor_axis"]),
            base_color=tuple(int(c) for c in entry["base_color"]),
            speckle_density=float(entry["speckle_density"]),
            curvature=float(entry["curvature"]),
        )
        styles[style.variety] = style
    return styles


def write_styles(path, styles: Dict[RiceVariety, GrainStyle]) -> None:
    entries = [
        {
            "variety": s.variety.name,
            "major_axis": s.major_axis,
            "minor_axis": s.minor_axis,
            "base_color": list(s.base_color),
            "speckle_density": s.speckle_density,
            "curvature": s.curvature,
        }
        for s in styles.values()
    ]
    Path(path).write_text(json.dumps({"format_version": 1, "styles": entries}, indent=2))


def style_separation(a: GrainStyle, b: GrainStyle) -> Tuple[float, float]:
    """(euclidean color distance, |aspect ratio difference|) between two styles."""
    color = float(np.linalg.norm(np.subtract(a.base_color, b.base_color)))
    ratio = abs(a.major_axis / a.minor_axis - b.major_axis / b.minor_axis)
    return color, ratio


def _background(shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    base = np.array(BACKGROUND_COLOR, dtype=np.int16)
    noise = rng.integers(-BACKGROUND_NOISE, BACKGROUND_NOISE + 1, size=(*shape, 3))
    return np.clip(base + noise, 0, 255).astype(np.uint8)


def render_grain(style: GrainStyle, rng: np.random.Generator):
    """Render one grain patch.

    Returns (pixels, footprint): an RGB patch covering the grain's bounding
    box and the boolean footprint of exactly the pixels the grain occupies.
    The patch contains only grain pixels; callers composite it over their
    own background using the footprint.
    """
    angle = rng.uniform(0.0, 180.0)
    a = 0.5 * style.major_axis * rng.uniform(0.95, 1.05)
    b = 0.5 * style.minor_axis * rng.uniform(0.95, 1.05)

    reach = int(np.ceil(a + style.curvature * a)) + 2
    side = 2 * reach + 1
    yy, xx = np.mgrid[-reach : reach + 1, -reach : reach + 1].astype(np.float64)
    cos, sin = np.cos(np.radians(angle)), np.sin(np.radians(angle))
    u = cos * xx + sin * yy
    v = -sin * xx + cos * yy
    v = v - style.curvature * (u * u) / a  # area-preserving bend along the long axis
    inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0

    rows = np.any(inside, axis=1)
    cols = np.any(inside, axis=0)
    r0, r1 = np.argmax(rows), side - np.argmax(rows[::-1])
    c0, c1 = np.argmax(cols), side - np.argmax(cols[::-1])
    footprint = inside[r0:r1, c0:c1]

    color = np.array(style.base_color, dtype=np.int16)
    pixels = np.zeros((*footprint.shape, 3), dtype=np.int16)
    pixels += color
    pixels += rng.integers(-10, 11, size=pixels.shape)
    speckle = rng.random(footprint.shape) < style.speckle_density
    pixels[speckle] -= SPECKLE_DARKEN
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    pixels[~footprint] = 0
    return pixels, footprint.astype(np.uint8)


def gen_grain(style: GrainStyle, seed: int) -> LabeledImage:
    """Render one labeled single-grain image, deterministic per seed.

    The image mimics a cropped grain photo: the grain's bounding box plus a
    small pad of noisy background, padded out to the minimum image size.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, int(style.variety))))
    patch, footprint = render_grain(style, rng)
    h, w = footprint.shape
    out_h = max(h + 2 * CROP_PAD, MIN_IMAGE_SIDE)
    out_w = max(w + 2 * CROP_PAD, MIN_IMAGE_SIDE)
    canvas = _background((out_h, out_w), rng)
    r0 = (out_h - h) // 2
    c0 = (out_w - w) // 2
    region = canvas[r0 : r0 + h, c0 : c0 + w]
    region[footprint.astype(bool)] = patch[footprint.astype(bool)]
    return LabeledImage(pixels=canvas, label=style.variety, source_id=f"synth-{style.variety.name}-{seed}")


def _dilate(mask: np.ndarray, iterations: int) -> np.ndarray:
    out = mask.astype(bool)
    for _ in range(iterations):
        padded = np.pad(out, 1)
        acc = np.zeros_like(out)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                acc |= padded[1 + dr : 1 + dr + out.shape[0], 1 + dc : 1 + dc + out.shape[1]]
        out = acc
    return out


def gen_bulk_scene(
    spec: SceneSpec,
    styles: Optional[Dict[RiceVariety, GrainStyle]] = None,
    margin: int = PLACEMENT_MARGIN,
    max_attempts: int = MAX_PLACEMENT_ATTEMPTS,
) -> BulkSample:
    """Render a bulk scene with pixel-exact mask and known composition.

    With allow_touching=False, grains are rejection-sampled so footprints
    stay at least `margin` pixels apart (in chebyshev distance), which keeps
    them 8-disconnected.
    """
    styles = styles or default_styles()
    rng = np.random.default_rng(spec.seed)
    h, w = spec.canvas
    canvas = _background((h, w), rng)
    mask = np.zeros((h, w), dtype=np.uint8)
    occupancy = np.zeros((h, w), dtype=bool)

    order: List[RiceVariety] = []
    for variety, count in sorted(spec.counts.items()):
        order.extend([variety] * count)
    rng.shuffle(order)  # varieties interleaved across the canvas

    for grain_index, variety in enumerate(order):
        patch, footprint = render_grain(styles[variety], rng)
        fh, fw = footprint.shape
        if fh > h or fw > w:
            raise CapacityError(f"grain of size {fh}x{fw} cannot fit canvas {h}x{w}")
        foot_bool = footprint.astype(bool)
        # The halo is padded by `margin` before dilation so separation is
        # enforced beyond the footprint's bounding box as well.
        halo = None if spec.allow_touching else _dilate(np.pad(foot_bool, margin), margin)
        placed = False
        for _ in range(max_attempts):
            r0 = int(rng.integers(0, h - fh + 1))
            c0 = int(rng.integers(0, w - fw + 1))
            if spec.allow_touching:
                clear = True
            else:
                hr0, hc0 = r0 - margin, c0 - margin
                hr1, hc1 = r0 + fh + margin, c0 + fw + margin
                kr0, kc0 = max(0, hr0), max(0, hc0)
                kr1, kc1 = min(h, hr1), min(w, hc1)
                window = occupancy[kr0:kr1, kc0:kc1]
                halo_view = halo[kr0 - hr0 : kr1 - hr0, kc0 - hc0 : kc1 - hc0]
                clear = not np.any(window & halo_view)
            if clear:
                region = canvas[r0 : r0 + fh, c0 : c0 + fw]
                region[foot_bool] = patch[foot_bool]
                mask[r0 : r0 + fh, c0 : c0 + fw][foot_bool] = 1
                occupancy[r0 : r0 + fh, c0 : c0 + fw] |= foot_bool
                placed = True
                break
        if not placed:
            raise CapacityError(
                f"could not place grain {grain_index + 1}/{len(order)} "
                f"after {max_attempts} attempts on canvas {h}x{w}"
            )

    return BulkSample(
        pixels=canvas,
        mask=mask,
        source_id=f"scene-{spec.seed}",
        composition=dict(spec.counts),
    )


def write_grain_corpus(
    root_dir,
    per_class: int,
    seed: int,
    styles: Optional[Dict[RiceVariety, GrainStyle]] = None,
) -> List[Tuple[str, RiceVariety]]:
    """Write a single-grain corpus in the directory layout `corpus` reads.

    Returns the generation record: (relative path, variety) per image.
    """
    styles = styles or default_styles()
    root = Path(root_dir)
    record = []
    for variety in RiceVariety:
        class_dir = root / variety.name
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            image = gen_grain(styles[variety], seed=seed * 1_000_003 + i)
            name = f"{variety.name}_{i:04d}.png"
            Image.fromarray(image.pixels).save(class_dir / name)
            record.append((f"{variety.name}/{name}", variety))
    return record


def random_scene_spec(
    rng: np.random.Generator,
    canvas: Tuple[int, int] = (192, 192),
    total_grains: Tuple[int, int] = (8, 14),
    max_varieties: int = 4,
    seed: int = 0,
) -> SceneSpec:
    """Draw a scene spec with a random mixture over a few varieties."""
    total = int(rng.integers(total_grains[0], total_grains[1] + 1))
    k = int(rng.integers(2, max_varieties + 1))
    chosen = rng.choice(len(RiceVariety), size=k, replace=False)
    counts: Dict[RiceVariety, int] = {RiceVariety(int(v)): 0 for v in chosen}
    varieties = list(counts)
    for _ in range(total):
        counts[varieties[int(rng.integers(0, k))]] += 1
    counts = {v: c for v, c in counts.items() if c > 0}
    return SceneSpec(canvas=canvas, counts=counts, allow_touching=False, seed=seed)


def write_bulk_corpus(
    root_dir,
    n_scenes: int,
    seed: int,
    canvas: Tuple[int, int] = (192, 192),
    total_grains: Tuple[int, int] = (8, 14),
    styles: Optional[Dict[RiceVariety, GrainStyle]] = None,
) -> List[SceneSpec]:
    """Write a bulk corpus (images/, masks/, composition.json) and return its specs."""
    root = Path(root_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    specs = []
    composition = {}
    for i in range(n_scenes):
        spec = random_scene_spec(rng, canvas=canvas, total_grains=total_grains, seed=seed * 1_000_003 + i)
        sample = gen_bulk_scene(spec, styles=styles)
        name = f"scene_{i:04d}"
        Image.fromarray(sample.pixels).save(root / "images" / f"{name}.png")
        Image.fromarray(sample.mask * 255).save(root / "masks" / f"{name}.png")
        composition[name] = {v.name: c for v, c in sample.composition.items()}
        specs.append(spec)
    (root / "composition.json").write_text(json.dumps(composition, indent=2, sort_keys=True))
    return specs
