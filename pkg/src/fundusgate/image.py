"""Image carriers and pixel-local conversions.

Images are plain numpy arrays:

* gray images are ``(height, width)`` ``uint8`` arrays,
* RGB images are ``(height, width, 3)`` ``uint8`` arrays,
* masks are ``(height, width)`` ``bool`` arrays (True = valid pixel).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

GrayImage = np.ndarray
RgbImage = np.ndarray
BinaryMask = np.ndarray

DEFAULT_FOV_THRESHOLD = 10

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def as_gray(img) -> GrayImage:
    """Validate and return ``img`` as a 2-D uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"gray image must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("gray values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_rgb(img) -> RgbImage:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"RGB image must have shape (h, w, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_mask(mask, shape: tuple[int, int], name: str = "mask") -> BinaryMask:
    m = np.asarray(mask, dtype=bool)
    if m.shape != tuple(shape):
        raise ValueError(f"{name} shape {m.shape} does not match image shape {tuple(shape)}")
    return m


def to_grayscale(img: RgbImage) -> GrayImage:
    """Luma conversion with 0.299/0.587/0.114 weights, rounded half up."""
    rgb = as_rgb(img).astype(np.int32)
    # integer form of round(0.299 r + 0.587 g + 0.114 b)
    acc = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500
    return np.clip(acc // 1000, 0, 255).astype(np.uint8)


def green_plane(img: RgbImage) -> GrayImage:
    return np.ascontiguousarray(as_rgb(img)[..., 1])


def fov_mask(img: GrayImage, threshold: int = DEFAULT_FOV_THRESHOLD) -> BinaryMask:
    """Field-of-view mask: the largest 8-connected blob brighter than ``threshold``.

    Holes enclosed by that blob (dark lesions, vessel crossings) belong to the
    field of view and are filled. When no pixel exceeds the threshold the
    whole frame is returned as valid. Equal-sized largest blobs resolve to the
    one met first in raster order.
    """
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    gray = as_gray(img)
    bright = gray > threshold
    if not bright.any():
        return np.ones(gray.shape, dtype=bool)
    labels, count = ndimage.label(bright, structure=_EIGHT_CONNECTED)
    if count == 1:
        return ndimage.binary_fill_holes(bright)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    largest = sizes.max()
    candidates = np.flatnonzero(sizes == largest)
    if len(candidates) > 1:
        # tie: pick the component whose first pixel comes earliest in raster order
        flat = labels.ravel()
        firsts = [np.argmax(flat == c) for c in candidates]
        keep = candidates[int(np.argmin(firsts))]
    else:
        keep = candidates[0]
    return ndimage.binary_fill_holes(labels == keep)
