"""Whole-image features for pre-screening.

The image is cut into disjoint ``s x s`` subimages (row-major, ragged
right/bottom remainders kept). Each subimage contributes its population
standard deviation, an inhomogeneity bit, or both (interleaved as
``(std, bit)`` pairs in ``combined`` mode).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .image import GrayImage, as_gray


class FeatureMode(str, enum.Enum):
    INHOMOGENEITY = "inhomogeneity"
    STDDEV = "stddev"
    COMBINED = "combined"


class FeatureKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class FeatureSpec:
    mode: FeatureMode = FeatureMode.COMBINED
    subimage_size: int = 5
    threshold: float = 10

    def __post_init__(self):
        object.__setattr__(self, "mode", FeatureMode(self.mode))
        if self.subimage_size < 2:
            raise ValueError(f"subimage_size must be >= 2, got {self.subimage_size}")
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")

    @property
    def per_tile(self) -> int:
        return 2 if self.mode is FeatureMode.COMBINED else 1

    def kinds(self, n_tiles: int) -> list[FeatureKind]:
        if self.mode is FeatureMode.STDDEV:
            return [FeatureKind.CONTINUOUS] * n_tiles
        if self.mode is FeatureMode.INHOMOGENEITY:
            return [FeatureKind.BINARY] * n_tiles
        return [FeatureKind.CONTINUOUS, FeatureKind.BINARY] * n_tiles

    def columns(self, tiles) -> np.ndarray:
        """Feature-vector positions belonging to ``tiles``, in the given order."""
        tiles = np.asarray(list(tiles), dtype=np.int64)
        k = self.per_tile
        return (tiles[:, None] * k + np.arange(k)[None, :]).ravel()


class Tile(NamedTuple):
    y: int
    x: int
    height: int
    width: int


@dataclass(frozen=True)
class SubimageGrid:
    rows: int
    cols: int
    tiles: tuple[Tile, ...]

    def __len__(self) -> int:
        return len(self.tiles)

    def crop(self, img: np.ndarray, index: int) -> np.ndarray:
        t = self.tiles[index]
        return img[t.y : t.y + t.height, t.x : t.x + t.width]


def split_subimages(img: GrayImage | tuple[int, int], s: int) -> SubimageGrid:
    """Row-major grid of ``ceil(h/s) x ceil(w/s)`` tiles over an image or a shape."""
    if s < 2:
        raise ValueError(f"subimage size must be >= 2, got {s}")
    h, w = img if isinstance(img, tuple) else np.shape(img)[:2]
    ys = range(0, h, s)
    xs = range(0, w, s)
    tiles = tuple(Tile(y, x, min(s, h - y), min(s, w - x)) for y in ys for x in xs)
    return SubimageGrid(len(ys), len(xs), tiles)


def inhomogeneity_feature(tile: GrayImage, t: float) -> int:
    """1 if the thresholded differences from the first pixel sum to more than 0.

    Walks the tile in row-major order, measuring each pixel's absolute
    intensity difference from the first one and accumulating only the
    differences above ``t``.
    """
    values = np.asarray(tile, dtype=np.int64).ravel()
    if values.size == 0:
        raise ValueError("empty tile")
    diffs = np.abs(values[1:] - values[0])
    total = diffs[diffs > t].sum()
    return int(total > 0)


def stddev_feature(tile: GrayImage) -> float:
    values = np.asarray(tile, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty tile")
    return float(np.sqrt(np.mean((values - values.mean()) ** 2)))


def _blocks(gray: np.ndarray, s: int) -> np.ndarray | None:
    h, w = gray.shape
    if h % s or w % s:
        return None
    return gray.reshape(h // s, s, w // s, s).transpose(0, 2, 1, 3).reshape(-1, s * s)


def tile_features(img: GrayImage, spec: FeatureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-tile (stddev, inhomogeneity bit) arrays in grid order."""
    gray = as_gray(img)
    blocks = _blocks(gray, spec.subimage_size)
    if blocks is not None:
        vals = blocks.astype(np.float64)
        std = np.sqrt(np.mean((vals - vals.mean(axis=1, keepdims=True)) ** 2, axis=1))
        diffs = np.abs(vals[:, 1:] - vals[:, :1])
        bits = (np.where(diffs > spec.threshold, diffs, 0.0).sum(axis=1) > 0).astype(np.float64)
        return std, bits
    grid = split_subimages(gray, spec.subimage_size)
    std = np.array([stddev_feature(grid.crop(gray, i)) for i in range(len(grid))])
    bits = np.array(
        [inhomogeneity_feature(grid.crop(gray, i), spec.threshold) for i in range(len(grid))],
        dtype=np.float64,
    )
    return std, bits


def extract_features(img: GrayImage, spec: FeatureSpec = FeatureSpec()) -> np.ndarray:
    std, bits = tile_features(img, spec)
    if spec.mode is FeatureMode.STDDEV:
        return std
    if spec.mode is FeatureMode.INHOMOGENEITY:
        return bits
    return np.column_stack([std, bits]).ravel()
