"""graindeck: dual-model rice analysis toolkit.

Per-grain variety classification with a residual network, bulk-image grain
segmentation with an encoder-decoder network, instance extraction,
composition estimation, a full metric suite, and a synthetic corpus
generator that makes every stage verifiable at desk scale.
"""

from .augment import AugmentConfig, flip, identity_config, random_augment, rotate, scale
from .bulkpredict import (
    CompositionError,
    CompositionReport,
    compare_composition,
    predict_bulk,
    report_from_counts,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import ClassifierConfig, RiceClassifier, build_classifier
from .corpus import (
    BulkSample,
    DatasetSplit,
    LabeledImage,
    load_bulk_dataset,
    load_grain_dataset,
    stratified_split,
)
from .errors import (
    CapacityError,
    ConfigError,
    DivergenceError,
    GraindeckError,
    InsufficientClassError,
    LayoutError,
    PairingError,
    ShapeMismatchError,
)
from .instances import ExtractParams, GrainInstance, connected_components, extract_grains
from .metrics import (
    accuracy,
    class_metrics,
    confusion_from_predictions,
    dataset_iou,
    iou,
    summary,
)
from .segmenter import GrainSegmenter, SegmenterConfig, binarize, build_unet
from .synth import (
    GrainStyle,
    SceneSpec,
    default_styles,
    gen_bulk_scene,
    gen_grain,
    write_bulk_corpus,
    write_grain_corpus,
)
from .training import Hyperparams, TrainHistory
from .varieties import NUM_VARIETIES, VARIETIES, VARIETY_NAMES, RiceVariety

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "BulkSample",
    "CapacityError",
    "ClassifierConfig",
    "CompositionError",
    "CompositionReport",
    "ConfigError",
    "DatasetSplit",
    "DivergenceError",
    "ExtractParams",
    "GrainInstance",
    "GrainSegmenter",
    "GrainStyle",
    "GraindeckError",
    "Hyperparams",
    "InsufficientClassError",
    "LabeledImage",
    "LayoutError",
    "NUM_VARIETIES",
    "PairingError",
    "RiceClassifier",
    "RiceVariety",
    "SceneSpec",
    "SegmenterConfig",
    "ShapeMismatchError",
    "TrainHistory",
    "VARIETIES",
    "VARIETY_NAMES",
    "accuracy",
    "binarize",
    "build_classifier",
    "build_unet",
    "class_metrics",
    "compare_composition",
    "confusion_from_predictions",
    "connected_components",
    "dataset_iou",
    "default_styles",
    "extract_grains",
    "flip",
    "gen_bulk_scene",
    "gen_grain",
    "identity_config",
    "iou",
    "load_bulk_dataset",
    "load_checkpoint",
    "load_grain_dataset",
    "predict_bulk",
    "random_augment",
    "report_from_counts",
    "rotate",
    "save_checkpoint",
    "scale",
    "stratified_split",
    "summary",
    "write_bulk_corpus",
    "write_grain_corpus",
]
