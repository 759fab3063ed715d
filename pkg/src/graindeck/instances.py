"""Connected-component labeling and per-grain crop extraction."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .augment import border_median
from .errors import ConfigError, ShapeMismatchError

NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
NEIGHBORS_8 = NEIGHBORS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass
class ExtractParams:
    connectivity: int = 8
    min_area: int = 30
    pad: int = 4

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.min_area < 1:
            raise ConfigError(f"min_area must be >= 1, got {self.min_area}")
        if self.pad < 0:
            raise ConfigError(f"pad must be >= 0, got {self.pad}")


@dataclass
class GrainInstance:
    component_id: int
    pixel_count: int
    bounding_box: Tuple[int, int, int, int]  # (row0, col0, row1, col1), half-open
    crop: np.ndarray  # RGB crop of the padded box


def connected_components(mask: np.ndarray, connectivity: int = 8) -> Tuple[np.ndarray, int]:
    """Label maximal connected foreground regions.

    Labels run 1..N in the raster order of each component's first pixel;
    background stays 0.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    fg = np.asarray(mask).astype(bool)
    if fg.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {fg.shape}")
    h, w = fg.shape
    labels = np.zeros((h, w), dtype=np.int32)
    neighbors = NEIGHBORS_4 if connectivity == 4 else NEIGHBORS_8
    count = 0
    for r, c in np.argwhere(fg):
        if labels[r, c]:
            continue
        count += 1
        stack = [(int(r), int(c))]
        labels[r, c] = count
        while stack:
            cr, cc = stack.pop()
            for dr, dc in neighbors:
                nr, nc = cr + dr, cc + dc
                if 0 <= nr < h and 0 <= nc < w and fg[nr, nc] and not labels[nr, nc]:
                    labels[nr, nc] = count
                    stack.append((nr, nc))
    return labels, count


def extract_grains(
    image: np.ndarray, mask: np.ndarray, params: ExtractParams = ExtractParams()
) -> List[GrainInstance]:
    """Cut one padded crop per sufficiently large connected component.

    Pixels inside a crop that belong to a different component are replaced by
    the crop's border-median color, so nothing from adjacent grains leaks
    into classification; background pixels are kept as-is.
    """
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape[:2] != mask.shape:
        raise ShapeMismatchError(image.shape[:2], mask.shape, "extract_grains")
    labels, count = connected_components(mask, params.connectivity)
    h, w = mask.shape
    instances = []
    for cid in range(1, count + 1):
        rows, cols = np.nonzero(labels == cid)
        pixel_count = len(rows)
        if pixel_count < params.min_area:
            continue
        r0, r1 = int(rows.min()), int(rows.max()) + 1
        c0, c1 = int(cols.min()), int(cols.max()) + 1
        pr0, pc0 = max(0, r0 - params.pad), max(0, c0 - params.pad)
        pr1, pc1 = min(h, r1 + params.pad), min(w, c1 + params.pad)
        crop = image[pr0:pr1, pc0:pc1].copy()
        crop_labels = labels[pr0:pr1, pc0:pc1]
        foreign = (crop_labels != 0) & (crop_labels != cid)
        if np.any(foreign):
            crop[foreign] = border_median(crop)
        instances.append(
            GrainInstance(
                component_id=cid,
                pixel_count=pixel_count,
                bounding_box=(r0, c0, r1, c1),
                crop=crop,
            )
        )
    return instances
