"""Bulk pipeline: segment a scene, extract grain crops, classify each crop,
and report per-variety counts and fractions."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .classifier import RiceClassifier
from .instances import ExtractParams, extract_grains
from .segmenter import GrainSegmenter, binarize
from .varieties import RiceVariety


@dataclass
class GrainPrediction:
    bounding_box: Tuple[int, int, int, int]
    variety: RiceVariety
    confidence: float  # max class probability


@dataclass
class CompositionReport:
    counts: Dict[RiceVariety, int]
    fractions: Dict[RiceVariety, float]
    total: int
    per_grain: List[GrainPrediction] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "counts": {v.name: self.counts[v] for v in RiceVariety},
            "fractions": {v.name: self.fractions[v] for v in RiceVariety},
            "total": self.total,
            "grains": [
                {
                    "bbox": list(g.bounding_box),
                    "variety": g.variety.name,
                    "confidence": g.confidence,
                }
                for g in self.per_grain
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompositionReport":
        return cls(
            counts={RiceVariety.from_name(k): int(v) for k, v in data["counts"].items()},
            fractions={RiceVariety.from_name(k): float(v) for k, v in data["fractions"].items()},
            total=int(data["total"]),
            per_grain=[
                GrainPrediction(
                    bounding_box=tuple(g["bbox"]),
                    variety=RiceVariety.from_name(g["variety"]),
                    confidence=float(g["confidence"]),
                )
                for g in data.get("grains", [])
            ],
        )


@dataclass
class CompositionError:
    count_delta: Dict[RiceVariety, int]  # predicted - true, per variety
    l1_fraction_error: float  # in [0, 2]


def report_from_counts(
    counts: Dict[RiceVariety, int],
    per_grain: Optional[List[GrainPrediction]] = None,
) -> CompositionReport:
    """Build a report from raw counts; fractions are exact divisions."""
    full = {v: int(counts.get(v, 0)) for v in RiceVariety}
    total = sum(full.values())
    if total > 0:
        fractions = {v: c / total for v, c in full.items()}
    else:
        fractions = {v: 0.0 for v in RiceVariety}
    return CompositionReport(
        counts=full, fractions=fractions, total=total, per_grain=per_grain or []
    )


def predict_bulk(
    image: np.ndarray,
    segmenter: GrainSegmenter,
    classifier: RiceClassifier,
    extract_params: ExtractParams = ExtractParams(),
    threshold: Optional[float] = None,
) -> CompositionReport:
    """Segment, extract instances, classify each crop, and aggregate.

    An empty segmentation yields a valid all-zero report, not an error.
    """
    prob = segmenter.predict_proba_mask(image)
    if threshold is None:
        threshold = segmenter.config_.threshold
    mask = binarize(prob, threshold)
    instances = extract_grains(image, mask, extract_params)
    counts = {v: 0 for v in RiceVariety}
    per_grain = []
    for instance in instances:
        probs = classifier.predict_proba(instance.crop)
        variety = RiceVariety(int(np.argmax(probs)))
        counts[variety] += 1
        per_grain.append(
            GrainPrediction(
                bounding_box=instance.bounding_box,
                variety=variety,
                confidence=float(probs.max()),
            )
        )
    return report_from_counts(counts, per_grain)


def compare_composition(
    report: CompositionReport, truth: Dict[RiceVariety, int]
) -> CompositionError:
    """Per-variety count deltas and the L1 distance between fraction vectors."""
    if any(c < 0 for c in truth.values()):
        raise ValueError("truth counts must be non-negative")
    true_full = {v: int(truth.get(v, 0)) for v in RiceVariety}
    true_total = sum(true_full.values())
    true_fracs = {
        v: (c / true_total if true_total > 0 else 0.0) for v, c in true_full.items()
    }
    delta = {v: report.counts[v] - true_full[v] for v in RiceVariety}
    l1 = sum(abs(report.fractions[v] - true_fracs[v]) for v in RiceVariety)
    return CompositionError(count_delta=delta, l1_fraction_error=l1)
