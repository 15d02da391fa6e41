"""Intensity conditioning for both screening phases.

Everything here maps uint8 images to uint8 images. Rounding is half-up
throughout and borders are replicated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from .image import (
    DEFAULT_FOV_THRESHOLD,
    BinaryMask,
    GrayImage,
    RgbImage,
    as_gray,
    check_mask,
    fov_mask,
    green_plane,
    to_grayscale,
)

PRESCREEN_SIZE = 90


@dataclass(frozen=True)
class AheParams:
    tile_grid: int = 8
    clip_fraction: float = 0.01

    def __post_init__(self):
        if self.tile_grid < 1:
            raise ValueError(f"tile_grid must be >= 1, got {self.tile_grid}")
        if not 0 < self.clip_fraction <= 1:
            raise ValueError(f"clip_fraction must be in (0, 1], got {self.clip_fraction}")


@dataclass(frozen=True)
class PrefilterPreprocessParams:
    background_median: int = 25
    denoise_median: int = 13
    unsharp_amount: float = 1.0
    unsharp_radius: float = 2.0

    def __post_init__(self):
        for name in ("background_median", "denoise_median"):
            k = getattr(self, name)
            if k < 3 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 3, got {k}")
        if self.unsharp_amount < 0:
            raise ValueError(f"unsharp_amount must be >= 0, got {self.unsharp_amount}")
        if self.unsharp_radius <= 0:
            raise ValueError(f"unsharp_radius must be > 0, got {self.unsharp_radius}")


def _round_clip(values: np.ndarray) -> GrayImage:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _equalization_lut(hist: np.ndarray) -> np.ndarray:
    """Cumulative-histogram mapping for a 256-bin histogram, as uint8 LUT.

    A histogram with at most one occupied bin yields the identity mapping.
    """
    occupied = np.flatnonzero(hist > 0)
    if len(occupied) <= 1:
        return np.arange(256, dtype=np.uint8)
    if np.issubdtype(hist.dtype, np.integer):
        # exact round-half-up of 255 * num / den
        cdf = np.cumsum(hist, dtype=np.int64)
        num = np.maximum(cdf - cdf[occupied[0]], 0)
        den = cdf[-1] - cdf[occupied[0]]
        return ((510 * num + den) // (2 * den)).astype(np.uint8)
    cdf = np.cumsum(hist, dtype=np.float64)
    cdf_min = cdf[occupied[0]]
    total = cdf[-1]
    lut = (cdf - cdf_min) / (total - cdf_min) * 255.0
    return _round_clip(np.maximum(lut, 0.0))


def hist_equalize(img: GrayImage, mask: BinaryMask) -> GrayImage:
    """Global histogram equalization computed over (and applied to) masked pixels."""
    gray = as_gray(img)
    m = check_mask(mask, gray.shape)
    if not m.any():
        raise ValueError("no pixels in field of view")
    hist = np.bincount(gray[m], minlength=256)
    lut = _equalization_lut(hist)
    return np.where(m, lut[gray], gray)


def _tile_edges(length: int, count: int) -> np.ndarray:
    return np.array([(i * length) // count for i in range(count + 1)])


def _interp_axis(length: int, edges: np.ndarray):
    """Lower/upper tile index and upper weight for each coordinate along one axis."""
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    coords = np.arange(length, dtype=np.float64)
    n = len(centers)
    hi = np.searchsorted(centers, coords, side="right")
    lo = np.clip(hi - 1, 0, n - 1)
    hi = np.clip(hi, 0, n - 1)
    span = centers[hi] - centers[lo]
    weight = np.where(span > 0, (coords - centers[lo]) / np.where(span > 0, span, 1.0), 0.0)
    return lo, hi, weight


def ahe(img: GrayImage, mask: BinaryMask, p: AheParams = AheParams()) -> GrayImage:
    """Contrast-limited adaptive histogram equalization with bilinear blending.

    Each of the ``tile_grid x tile_grid`` tiles gets its own equalization
    mapping from its masked pixels. Bins above ``clip_fraction`` times the
    tile's masked pixel count are clipped and the excess is spread evenly
    over all 256 bins. Output pixels blend the mappings of the four nearest
    tile centers; pixels outside the mask pass through.
    """
    gray = as_gray(img)
    m = check_mask(mask, gray.shape)
    if not m.any():
        raise ValueError("no pixels in field of view")
    h, w = gray.shape
    g = p.tile_grid
    if h < g or w < g:
        raise ValueError(f"image {w}x{h} is smaller than the {g}x{g} tile grid")

    ys, xs = _tile_edges(h, g), _tile_edges(w, g)
    luts = np.empty((g, g, 256), dtype=np.float64)
    for i in range(g):
        for j in range(g):
            tile = gray[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            tmask = m[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            hist = np.bincount(tile[tmask], minlength=256).astype(np.float64)
            if np.count_nonzero(hist) > 1:
                limit = p.clip_fraction * hist.sum()
                excess = np.maximum(hist - limit, 0.0).sum()
                if excess > 0:
                    hist = np.minimum(hist, limit) + excess / 256.0
            luts[i, j] = _equalization_lut(hist)

    y0, y1, wy = _interp_axis(h, ys)
    x0, x1, wx = _interp_axis(w, xs)
    wy = wy[:, None]
    wx = wx[None, :]
    r0, r1 = y0[:, None], y1[:, None]
    c0, c1 = x0[None, :], x1[None, :]
    top = (1 - wx) * luts[r0, c0, gray] + wx * luts[r0, c1, gray]
    bottom = (1 - wx) * luts[r1, c0, gray] + wx * luts[r1, c1, gray]
    out = _round_clip((1 - wy) * top + wy * bottom)
    return np.where(m, out, gray)


def median_filter(img: GrayImage, k: int) -> GrayImage:
    """k x k median with replicated borders."""
    if k < 3 or k % 2 == 0:
        raise ValueError(f"median window must be odd and >= 3, got {k}")
    gray = np.ascontiguousarray(as_gray(img))
    # cv2's uint8 median is exact and replicates borders
    return cv2.medianBlur(gray, k)


def shade_correct(img: GrayImage, background: GrayImage) -> GrayImage:
    """Subtract the background and re-center the difference at 128."""
    a, b = as_gray(img), as_gray(background)
    if a.shape != b.shape:
        raise ValueError(f"image shape {a.shape} does not match background shape {b.shape}")
    diff = a.astype(np.int16) - b.astype(np.int16) + 128
    return np.clip(diff, 0, 255).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: GrayImage, sigma: float) -> np.ndarray:
    """Separable Gaussian blur (float result), kernel truncated at ceil(3 sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(as_gray(img).astype(np.float64), k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def unsharp_mask(img: GrayImage, amount: float = 1.0, radius: float = 2.0) -> GrayImage:
    if amount < 0:
        raise ValueError(f"amount must be >= 0, got {amount}")
    gray = as_gray(img)
    if amount == 0:
        return gray.copy()
    f = gray.astype(np.float64)
    return _round_clip(f + amount * (f - gaussian_blur(gray, radius)))


def _area_weights(src: int, dst: int) -> np.ndarray:
    # coordinates scaled by src*dst so every overlap is an integer
    lo = np.arange(dst)[:, None] * src
    hi = lo + src
    px_lo = np.arange(src)[None, :] * dst
    px_hi = px_lo + dst
    return np.clip(np.minimum(hi, px_hi) - np.maximum(lo, px_lo), 0, None).astype(np.int64)


def resize_area(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Box-filter resampling; each output pixel is the area-weighted source mean."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    gray = as_gray(img)
    h, w = gray.shape
    if (h, w) == (out_h, out_w):
        return gray.copy()
    wy = _area_weights(h, out_h)
    wx = _area_weights(w, out_w)
    # float64 BLAS is exact here: every partial sum is an integer below 2**53
    num = np.rint(wy.astype(np.float64) @ gray.astype(np.float64) @ wx.T.astype(np.float64)).astype(np.int64)
    den = h * w
    # exact round-half-up of num / den
    return np.clip((2 * num + den) // (2 * den), 0, 255).astype(np.uint8)


def prescreen_preprocess(
    img: RgbImage,
    p: AheParams = AheParams(),
    fov_threshold: int = DEFAULT_FOV_THRESHOLD,
    size: int = PRESCREEN_SIZE,
) -> GrayImage:
    """Grayscale, field-of-view mask, adaptive equalization, 90x90 rescale."""
    gray = to_grayscale(img)
    mask = fov_mask(gray, fov_threshold)
    return resize_area(ahe(gray, mask, p), size, size)


def prefilter_stages(
    img: RgbImage,
    p: PrefilterPreprocessParams = PrefilterPreprocessParams(),
    fov_threshold: int = DEFAULT_FOV_THRESHOLD,
    fov: BinaryMask | None = None,
) -> dict[str, np.ndarray]:
    """Run the candidate-extraction conditioning chain, keeping every stage.

    A supplied ``fov`` mask replaces the thresholded one.
    """
    green = green_plane(img)
    fov = fov_mask(green, fov_threshold) if fov is None else check_mask(fov, green.shape, "fov")
    equalized = hist_equalize(green, fov)
    background = median_filter(equalized, p.background_median)
    corrected = shade_correct(equalized, background)
    denoised = median_filter(corrected, p.denoise_median)
    sharpened = unsharp_mask(denoised, p.unsharp_amount, p.unsharp_radius)
    return {
        "green": green,
        "fov": fov,
        "equalized": equalized,
        "background": background,
        "corrected": corrected,
        "denoised": denoised,
        "sharpened": sharpened,
    }


def prefilter_preprocess(
    img: RgbImage,
    p: PrefilterPreprocessParams = PrefilterPreprocessParams(),
    fov_threshold: int = DEFAULT_FOV_THRESHOLD,
    fov: BinaryMask | None = None,
) -> GrayImage:
    """Green plane, equalization, median background, shade correction, denoise, sharpen."""
    return prefilter_stages(img, p, fov_threshold, fov)["sharpened"]
