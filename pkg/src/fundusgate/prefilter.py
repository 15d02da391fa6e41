"""Candidate-region extraction for images that passed pre-screening.

Pixels are labelled against the mean and standard deviation of their own
``s x s`` region, then same-label pixels are grouped into connected
components and components with at least ``n`` pixels become candidates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .image import DEFAULT_FOV_THRESHOLD, BinaryMask, GrayImage, RgbImage, as_gray, check_mask
from .preprocess import PrefilterPreprocessParams, prefilter_stages


class Label(enum.IntEnum):
    UNLABELED = 0
    HIGH = 1
    LOW = 2


@dataclass(frozen=True)
class PrefilterParams:
    region_size: int = 75
    min_cardinality: int = 30
    connectivity: int = 8
    # band around the FOV rim and anatomy masks left unlabelled; the default
    # is the radius of the default 25x25 background median
    exclusion_margin: int = 12

    def __post_init__(self):
        if self.region_size < 2:
            raise ValueError(f"region_size must be >= 2, got {self.region_size}")
        if self.min_cardinality < 1:
            raise ValueError(f"min_cardinality must be >= 1, got {self.min_cardinality}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.exclusion_margin < 0:
            raise ValueError(f"exclusion_margin must be >= 0, got {self.exclusion_margin}")


@dataclass(frozen=True)
class AnatomyMasks:
    vessels: BinaryMask | None = None
    optic_disc: BinaryMask | None = None
    macula: BinaryMask | None = None


@dataclass(frozen=True)
class RegionStats:
    """Per-region statistics over valid pixels; arrays are (grid rows, grid cols).

    ``sums``/``sq_sums``/``counts`` are exact integers and drive labelling;
    ``mean``/``std`` are the derived floating-point values.
    """

    region_size: int
    counts: np.ndarray
    sums: np.ndarray
    sq_sums: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), 0.0)

    @property
    def std(self) -> np.ndarray:
        n = np.maximum(self.counts, 1).astype(np.float64)
        var = (n * self.sq_sums - self.sums.astype(np.float64) ** 2) / (n * n)
        return np.where(self.counts > 0, np.sqrt(np.maximum(var, 0.0)), 0.0)


class BBox(NamedTuple):
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class CandidateRegion:
    label: Label
    pixels: np.ndarray = field(repr=False)  # (k, 2) array of (y, x), raster order
    bbox: BBox
    source_regions: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.pixels)


@dataclass
class PrefilterResult:
    candidates: list[CandidateRegion]
    retained_fraction: float
    preprocessed: GrayImage
    valid: BinaryMask
    labels: np.ndarray


def _region_sums(values: np.ndarray, s: int) -> np.ndarray:
    h, w = values.shape
    gh, gw = -(-h // s), -(-w // s)
    padded = np.zeros((gh * s, gw * s), dtype=np.int64)
    padded[:h, :w] = values
    return padded.reshape(gh, s, gw, s).sum(axis=(1, 3))


def region_stats(img: GrayImage, valid: BinaryMask, s: int) -> RegionStats:
    """Population mean / std of valid pixels in each disjoint ``s x s`` region."""
    if s < 2:
        raise ValueError(f"region size must be >= 2, got {s}")
    gray = as_gray(img)
    v = check_mask(valid, gray.shape, "valid mask")
    x = np.where(v, gray.astype(np.int64), 0)
    return RegionStats(s, _region_sums(v.astype(np.int64), s), _region_sums(x, s), _region_sums(x * x, s))


def _expand(grid: np.ndarray, s: int, shape: tuple[int, int]) -> np.ndarray:
    return np.repeat(np.repeat(grid, s, axis=0), s, axis=1)[: shape[0], : shape[1]]


def label_pixels(img: GrayImage, stats: RegionStats, valid: BinaryMask) -> np.ndarray:
    """High where I - mu > sigma, Low where I - mu < -sigma, else Unlabeled.

    Compared in exact integer arithmetic: with region count n, sum S and
    square sum Q, ``I - mu > sigma`` iff ``nI - S > 0`` and
    ``(nI - S)^2 > nQ - S^2``.
    """
    gray = as_gray(img)
    v = check_mask(valid, gray.shape, "valid mask")
    s = stats.region_size
    n = _expand(stats.counts, s, gray.shape)
    S = _expand(stats.sums, s, gray.shape)
    Q = _expand(stats.sq_sums, s, gray.shape)
    dev = n * gray.astype(np.int64) - S
    spread = n * Q - S * S
    salient = v & (n > 0) & (dev * dev > spread)
    labels = np.zeros(gray.shape, dtype=np.uint8)
    labels[salient & (dev > 0)] = Label.HIGH
    labels[salient & (dev < 0)] = Label.LOW
    return labels


def combined_valid_mask(fov: BinaryMask, anat: AnatomyMasks = AnatomyMasks()) -> BinaryMask:
    valid = np.asarray(fov, dtype=bool).copy()
    for name in ("vessels", "optic_disc", "macula"):
        m = getattr(anat, name)
        if m is not None:
            valid &= ~check_mask(m, valid.shape, name)
    return valid


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    return ndimage.generate_binary_structure(2, 1)


def connected_components(
    labels: np.ndarray, p: PrefilterParams = PrefilterParams()
) -> list[CandidateRegion]:
    """Same-label components with at least ``min_cardinality`` pixels.

    Output is ordered by the raster position of each component's first pixel.
    """
    labels = np.asarray(labels)
    h, w = labels.shape
    s = p.region_size
    grid_cols = -(-w // s)
    found: list[tuple[int, CandidateRegion]] = []
    for lbl in (Label.HIGH, Label.LOW):
        comp, count = ndimage.label(labels == lbl, structure=_structure(p.connectivity))
        if count == 0:
            continue
        sizes = np.bincount(comp.ravel(), minlength=count + 1)
        sizes[0] = 0
        kept = np.flatnonzero(sizes >= p.min_cardinality)
        if len(kept) == 0:
            continue
        flat = np.flatnonzero(np.isin(comp, kept))
        ids = comp.ravel()[flat]
        order = np.argsort(ids, kind="stable")
        flat, ids = flat[order], ids[order]
        bounds = np.searchsorted(ids, kept)
        for cid, start in zip(kept, bounds):
            idx = flat[start : start + sizes[cid]]  # ascending = raster order
            ys, xs = np.divmod(idx, w)
            y0, y1, x0, x1 = ys.min(), ys.max(), xs.min(), xs.max()
            regions = frozenset(((ys // s) * grid_cols + xs // s).tolist())
            cand = CandidateRegion(
                Label(lbl),
                np.column_stack([ys, xs]),
                BBox(int(x0), int(y0), int(x1 - x0 + 1), int(y1 - y0 + 1)),
                regions,
            )
            found.append((int(idx[0]), cand))
    found.sort(key=lambda t: t[0])
    return [c for _, c in found]


def retained_fraction(candidates: list[CandidateRegion], shape: tuple[int, int]) -> float:
    """Share of the image covered by the union of candidate bounding boxes."""
    canvas = np.zeros(shape, dtype=bool)
    for c in candidates:
        x, y, w, h = c.bbox
        canvas[y : y + h, x : x + w] = True
    return float(canvas.mean())


def _grow(mask: BinaryMask, margin: int) -> BinaryMask:
    return ndimage.maximum_filter(mask.astype(np.uint8), size=2 * margin + 1, mode="nearest").astype(bool)


def exclusion_mask(fov: BinaryMask, anat: AnatomyMasks, margin: int) -> BinaryMask:
    """Valid pixels: in the FOV and at least ``margin`` pixels from its rim and from anatomy.

    Within that band the median background estimate mixes in the dark
    surround or the excluded structure, which leaves halos after shade
    correction.
    """
    if margin == 0:
        return combined_valid_mask(fov, anat)
    fov = np.asarray(fov, dtype=bool)
    # the frame edge is not an FOV edge, hence replicate borders
    grown = [
        None if m is None else _grow(check_mask(m, fov.shape), margin)
        for m in (anat.vessels, anat.optic_disc, anat.macula)
    ]
    return combined_valid_mask(~_grow(~fov, margin), AnatomyMasks(*grown))


def prefilter_image(
    img: RgbImage,
    anat: AnatomyMasks = AnatomyMasks(),
    pp: PrefilterPreprocessParams = PrefilterPreprocessParams(),
    p: PrefilterParams = PrefilterParams(),
    fov_threshold: int = DEFAULT_FOV_THRESHOLD,
    fov: BinaryMask | None = None,
) -> PrefilterResult:
    stages = prefilter_stages(img, pp, fov_threshold, fov)
    valid = exclusion_mask(stages["fov"], anat, p.exclusion_margin)
    work = stages["sharpened"]
    stats = region_stats(work, valid, p.region_size)
    labels = label_pixels(work, stats, valid)
    cands = connected_components(labels, p)
    return PrefilterResult(cands, retained_fraction(cands, work.shape), work, valid, labels)
