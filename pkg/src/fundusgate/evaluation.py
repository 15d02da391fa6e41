"""Screening metrics.

Pre-screening is scored with a confusion matrix whose positive class is
``abnormal``. Pre-filtering is scored per image (misclassified when the
presence of candidates disagrees with the presence of lesions), per region
(a candidate is *true* when it touches a ground-truth lesion pixel) and by
the share of pixels kept for downstream detectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bayes import ClassLabel
from .prefilter import CandidateRegion


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionCounts":
        """Same outcomes with the positive and negative classes exchanged."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


class Metrics(NamedTuple):
    accuracy: float
    sensitivity: float | None  # None when there are no positives
    specificity: float | None  # None when there are no negatives


def confusion(truth: Iterable[ClassLabel], predicted: Iterable[ClassLabel]) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    for t, p in zip(truth, predicted, strict=True):
        pos_t = ClassLabel(t) is ClassLabel.ABNORMAL
        pos_p = ClassLabel(p) is ClassLabel.ABNORMAL
        if pos_t and pos_p:
            tp += 1
        elif pos_t:
            fn += 1
        elif pos_p:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def metrics(c: ConfusionCounts) -> Metrics:
    if c.total == 0:
        raise ValueError("no outcomes to score")
    sens = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    spec = c.tn / (c.tn + c.fp) if c.tn + c.fp else None
    return Metrics((c.tp + c.tn) / c.total, sens, spec)


@dataclass(frozen=True)
class PrefilterOutcome:
    has_lesion_truth: bool
    found_any_candidate_on_lesion: bool
    found_any_candidate: bool

    def __post_init__(self):
        if self.found_any_candidate_on_lesion and not self.found_any_candidate:
            raise ValueError("a candidate on a lesion implies some candidate was found")


def image_misclassified(o: PrefilterOutcome) -> bool:
    """Lesions present but nothing found, or nothing present but something found."""
    return (o.has_lesion_truth and not o.found_any_candidate) or (
        not o.has_lesion_truth and o.found_any_candidate
    )


def candidate_hits(candidates: Sequence[CandidateRegion], lesions: np.ndarray) -> list[bool]:
    """Whether each candidate shares at least one pixel with the lesion mask."""
    lesion = np.asarray(lesions) > 0
    return [bool(lesion[c.pixels[:, 0], c.pixels[:, 1]].any()) for c in candidates]


def prefilter_outcome(candidates: Sequence[CandidateRegion], lesions: np.ndarray) -> PrefilterOutcome:
    hits = candidate_hits(candidates, lesions)
    return PrefilterOutcome(bool(np.any(np.asarray(lesions) > 0)), any(hits), bool(candidates))


def pixel_reduction(fractions: Sequence[float], areas: Sequence[int] | None = None) -> float:
    """Area-weighted mean retained fraction over a corpus."""
    f = np.asarray(fractions, dtype=np.float64)
    if f.size == 0:
        raise ValueError("no images to average")
    w = np.ones_like(f) if areas is None else np.asarray(areas, dtype=np.float64)
    if w.shape != f.shape:
        raise ValueError("one area per image is required")
    return float((f * w).sum() / w.sum())


class RegionTally(NamedTuple):
    size: int
    true: int
    false: int
    misclassified: int
    percentage: float


def tally(
    region_size: int,
    per_image: Sequence[tuple[Sequence[CandidateRegion], np.ndarray, float]],
) -> RegionTally:
    """Region-level summary over ``(candidates, lesion mask, retained fraction)`` triples.

    ``percentage`` is the area-weighted retained share, in percent.
    """
    true = false = mis = 0
    fractions, areas = [], []
    for cands, lesions, frac in per_image:
        hits = candidate_hits(cands, lesions)
        true += sum(hits)
        false += len(hits) - sum(hits)
        mis += image_misclassified(prefilter_outcome(cands, lesions))
        fractions.append(frac)
        areas.append(np.asarray(lesions).size)
    return RegionTally(region_size, true, false, mis, 100.0 * pixel_reduction(fractions, areas))
