import numpy as np
import pytest

from graindeck.corpus import LabeledImage
from graindeck.varieties import RiceVariety

# Published 7x7 confusion matrix fixture (rows = true, columns = predicted),
# used as a consistency oracle for the metric suite.
REF_CONFUSION = np.array(
    [
        [36, 3, 5, 4, 11, 0, 0],
        [5, 56, 0, 5, 0, 0, 2],
        [6, 0, 34, 2, 12, 1, 6],
        [7, 6, 6, 37, 5, 0, 8],
        [10, 0, 2, 5, 44, 1, 4],
        [9, 4, 9, 1, 27, 5, 4],
        [10, 2, 3, 5, 11, 0, 33],
    ],
    dtype=np.int64,
)

# Per-class (precision, recall, f1) at 2-decimal rounding, canonical order.
REF_PER_CLASS = [
    (0.43, 0.61, 0.51),
    (0.79, 0.82, 0.81),
    (0.58, 0.56, 0.57),
    (0.63, 0.54, 0.58),
    (0.40, 0.67, 0.50),
    (0.71, 0.08, 0.15),
    (0.58, 0.52, 0.55),
]


def random_image(rng, height=32, width=32):
    """Random uint8 RGB image for structural tests."""
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def random_labeled(rng, label, height=32, width=32, source_id="test"):
    return LabeledImage(
        pixels=random_image(rng, height, width),
        label=RiceVariety(label),
        source_id=source_id,
    )


@pytest.fixture
def reference_confusion():
    return REF_CONFUSION.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(20240824)
