"""Deterministic synthetic fundus images with ground truth.

Images show a circular field of view on a black surround, radial
vignetting, a smooth low-frequency texture and a few thin dark vessels.
``LESIONED`` images add Gaussian-profile dark (or bright) blobs;
``SEVERELY_ABNORMAL`` images add high-amplitude mottled patches over at
least 30% of the field of view plus larger dark blobs. All randomness comes
from :class:`fundusgate.rng.SplitMix64`, so an image is a pure function of
its :class:`SynthSpec`.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .bayes import ClassLabel
from .manifest import ManifestRow, write_manifest
from .netpbm import save_pgm, save_ppm
from .rng import SplitMix64

MIN_SIZE = 64
FOV_RADIUS = 0.46  # of min(width, height)
RPE_COVERAGE = 0.35


class Severity(str, enum.Enum):
    NORMAL = "normal"
    LESIONED = "lesioned"
    SEVERELY_ABNORMAL = "severely_abnormal"


class LesionKind(str, enum.Enum):
    DARK_BLOB = "dark_blob"
    BRIGHT_BLOB = "bright_blob"


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    width: int = 512
    height: int = 512
    severity: Severity = Severity.NORMAL
    lesion_count: int = 0
    lesion_kind: LesionKind = LesionKind.DARK_BLOB
    rpe_texture: bool | None = None  # None: on exactly for SEVERELY_ABNORMAL
    lesion_area: int = 40  # half-peak area of each planted lesion, pixels
    lesion_depth: float = 70.0  # peak green-plane amplitude

    def __post_init__(self):
        object.__setattr__(self, "severity", Severity(self.severity))
        object.__setattr__(self, "lesion_kind", LesionKind(self.lesion_kind))
        if self.width < MIN_SIZE or self.height < MIN_SIZE:
            raise ValueError(f"synthetic images must be at least {MIN_SIZE}x{MIN_SIZE}")
        if (self.lesion_count == 0) != (self.severity is Severity.NORMAL):
            raise ValueError("lesion_count must be 0 exactly when severity is normal")
        if self.lesion_count < 0 or self.lesion_area < 1:
            raise ValueError("lesion_count and lesion_area must be positive")
        if self.lesion_depth < 60:
            raise ValueError("lesion_depth must be at least 60 gray levels")

    @property
    def has_rpe(self) -> bool:
        if self.rpe_texture is None:
            return self.severity is Severity.SEVERELY_ABNORMAL
        return self.rpe_texture


@dataclass
class GroundTruth:
    lesion_masks: list[np.ndarray]
    class_label: ClassLabel
    vessels: np.ndarray
    fov: np.ndarray
    lesion_centers: list[tuple[int, int]] = field(default_factory=list)  # (y, x)

    def lesion_label_map(self) -> np.ndarray:
        """uint8 map holding lesion k+1 at its pixels, 0 elsewhere."""
        out = np.zeros(self.fov.shape, dtype=np.uint8)
        for k, m in enumerate(self.lesion_masks):
            out[m & (out == 0)] = min(k + 1, 255)
        return out


def _texture(rng: SplitMix64, xx, yy, size: int) -> np.ndarray:
    tex = np.zeros(xx.shape)
    for _ in range(4):
        amp = rng.scalar(0.01, 0.025)
        wavelength = rng.scalar(0.7, 1.4) * size
        theta = rng.scalar(0.0, math.pi)
        phase = rng.scalar(0.0, 2 * math.pi)
        tex += amp * np.cos(2 * math.pi * (xx * math.cos(theta) + yy * math.sin(theta)) / wavelength + phase)
    return tex


def _vessels(rng: SplitMix64, shape, cx, cy, radius) -> np.ndarray:
    """Gaussian cross-section profile of a few curved strokes from a common origin."""
    h, w = shape
    side = 1 if rng.scalar() < 0.5 else -1
    ox, oy = cx + side * 0.3 * radius, cy
    n_vessels = 6
    max_steps = int(4 * radius)
    centre_x = np.zeros(shape)
    centre_y = np.zeros(shape)
    sigma_at = np.zeros(shape)
    on_path = np.zeros(shape, dtype=bool)
    for v in range(n_vessels):
        angle0 = 2 * math.pi * (v + rng.scalar(0.1, 0.9)) / n_vessels
        sigma = rng.scalar(0.6, 1.0)
        angles = angle0 + np.cumsum(rng.uniform(max_steps, -0.06, 0.06))
        xs = ox + 0.5 * np.cumsum(np.cos(angles))
        ys = oy + 0.5 * np.cumsum(np.sin(angles))
        outside = np.flatnonzero(np.hypot(xs - cx, ys - cy) > 0.98 * radius)
        stop = outside[0] if len(outside) else max_steps
        xs, ys = xs[:stop], ys[:stop]
        xi = np.clip(np.rint(xs).astype(np.int64), 0, w - 1)
        yi = np.clip(np.rint(ys).astype(np.int64), 0, h - 1)
        centre_x[yi, xi] = xs
        centre_y[yi, xi] = ys
        sigma_at[yi, xi] = sigma
        on_path[yi, xi] = True
    if not on_path.any():
        return np.zeros(shape)
    _, (iy, ix) = ndimage.distance_transform_edt(~on_path, return_indices=True)
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (xx - centre_x[iy, ix]) ** 2 + (yy - centre_y[iy, ix]) ** 2
    sig = sigma_at[iy, ix]
    return np.exp(-d2 / (2 * sig * sig))


def _add_bump(field_: np.ndarray, cy: float, cx: float, sigma: float, amp: float) -> np.ndarray:
    """Add ``amp * exp(-d^2 / 2 sigma^2)`` in a 4-sigma window; return the window's weights."""
    h, w = field_.shape
    reach = int(math.ceil(4 * sigma))
    y0, y1 = max(int(cy) - reach, 0), min(int(cy) + reach + 1, h)
    x0, x1 = max(int(cx) - reach, 0), min(int(cx) + reach + 1, w)
    py, px = np.ogrid[y0:y1, x0:x1]
    g = np.exp(-((px - cx) ** 2 + (py - cy) ** 2) / (2 * sigma * sigma))
    field_[y0:y1, x0:x1] += amp * g
    return g


def _rpe_field(rng: SplitMix64, fov, radius) -> np.ndarray:
    """Signed patch field plus mottling, grown until the coverage target is met."""
    field_ = np.zeros(fov.shape)
    fov_area = fov.sum()
    pts = np.argwhere(fov)
    for _ in range(400):
        py, px = pts[rng.integer(0, len(pts))]
        rho = rng.scalar(0.06, 0.14) * radius
        amp = rng.scalar(35.0, 70.0) * (1 if rng.scalar() < 0.5 else -1)
        _add_bump(field_, py, px, rho, amp)
        if (np.abs(field_) > 15)[fov].sum() >= RPE_COVERAGE * fov_area:
            break
    weight = np.clip(np.abs(field_) / 20.0, 0.0, 1.0)
    mottle = 18.0 * rng.normal(fov.shape) * weight
    return field_ + mottle


def _place_lesions(rng, spec, fov_dist, vessel_dist, cx, cy, radius):
    """Lesion centres away from vessels, the rim and each other.

    Clearances shrink with small images (20/30/30 px at 512); if the vessel
    clearance cannot be met it is dropped rather than failing.
    """
    size = min(spec.width, spec.height)
    rim_gap = sep_gap = min(30.0, 0.06 * size)
    vessel_gaps = (min(20.0, 0.04 * size), 0.0)
    centers: list[tuple[int, int]] = []
    for vessel_gap in vessel_gaps:
        for _ in range(1000 * max(spec.lesion_count, 1)):
            if len(centers) == spec.lesion_count:
                return centers
            r = 0.7 * radius * math.sqrt(rng.scalar())
            a = rng.scalar(0.0, 2 * math.pi)
            x, y = int(round(cx + r * math.cos(a))), int(round(cy + r * math.sin(a)))
            if vessel_dist[y, x] < vessel_gap or fov_dist[y, x] < rim_gap:
                continue
            if any(math.hypot(x - qx, y - qy) < sep_gap for qy, qx in centers):
                continue
            centers.append((y, x))
    if len(centers) < spec.lesion_count:
        raise ValueError(f"cannot fit {spec.lesion_count} lesions into a {spec.width}x{spec.height} image")
    return centers


def generate(spec: SynthSpec) -> tuple[np.ndarray, GroundTruth]:
    rng = SplitMix64(spec.seed)
    h, w = spec.height, spec.width
    size = min(w, h)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    radius = FOV_RADIUS * size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    r = np.hypot(xx - cx, yy - cy) / radius
    fov = r <= 1.0

    gain = rng.scalar(0.92, 1.08)
    illum = gain * (1.0 - 0.35 * r * r) * (1.0 + _texture(rng, xx, yy, size))
    red, green, blue = 185.0 * illum, 120.0 * illum, 40.0 * illum

    vessel_profile = _vessels(rng, (h, w), cx, cy, radius)
    green *= 1.0 - 0.35 * vessel_profile
    red *= 1.0 - 0.15 * vessel_profile
    vessels = (vessel_profile > 0.1) & fov

    if spec.has_rpe:
        rpe = _rpe_field(rng, fov, radius)
        red += 1.3 * rpe
        green += rpe
        blue += 0.3 * rpe

    area = spec.lesion_area
    if spec.severity is Severity.SEVERELY_ABNORMAL:
        area = max(area, 120)
    half_radius = math.sqrt(area / math.pi)
    sigma = half_radius / math.sqrt(2 * math.log(2))
    fov_dist = radius * (1.0 - r)
    vessel_dist = ndimage.distance_transform_edt(~vessels) if spec.lesion_count else None
    centers = _place_lesions(rng, spec, fov_dist, vessel_dist, cx, cy, radius)
    masks = []
    sign = -1.0 if spec.lesion_kind is LesionKind.DARK_BLOB else 1.0
    for (ly, lx) in centers:
        depth = spec.lesion_depth + rng.scalar(0.0, 20.0)
        profile = np.zeros((h, w))
        _add_bump(profile, ly, lx, sigma, 1.0)
        green += sign * depth * profile
        if sign < 0:
            red -= 0.4 * depth * profile
        else:
            red += 0.5 * depth * profile
            blue += 0.5 * depth * profile
        masks.append((profile > 0.5) & fov)

    rgb = np.stack([red, green, blue], axis=-1)
    rgb = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    rgb[~fov] = 0
    label = ClassLabel.ABNORMAL if spec.severity is Severity.SEVERELY_ABNORMAL else ClassLabel.PROCESS_FURTHER
    return rgb, GroundTruth(masks, label, vessels, fov, centers)


def corpus_specs(
    seed: int,
    normal: int = 0,
    abnormal: int = 0,
    lesioned: int = 0,
    width: int = 512,
    height: int = 512,
    lesion_kind: LesionKind = LesionKind.DARK_BLOB,
) -> list[SynthSpec]:
    """Per-image specs for a corpus: normal, then abnormal, then lesioned."""
    rng = SplitMix64(seed)
    seeds = [int(s) for s in rng.next_u64(normal + abnormal + lesioned)]
    kinds = (
        [(Severity.NORMAL, 0)] * normal
        + [(Severity.SEVERELY_ABNORMAL, 4)] * abnormal
        + [(Severity.LESIONED, 1)] * lesioned
    )
    return [
        SynthSpec(s, width, height, sev, count, lesion_kind)
        for s, (sev, count) in zip(seeds, kinds)
    ]


def generate_corpus(
    out_dir: str | os.PathLike,
    seed: int,
    normal: int = 0,
    abnormal: int = 0,
    lesioned: int = 0,
    width: int = 512,
    height: int = 512,
    lesion_kind: LesionKind = LesionKind.DARK_BLOB,
) -> Path:
    """Write images, masks and ``manifest.csv`` into ``out_dir``; return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, spec in enumerate(corpus_specs(seed, normal, abnormal, lesioned, width, height, lesion_kind)):
        rgb, truth = generate(spec)
        stem = f"img_{i:04d}"
        save_ppm(out / f"{stem}.ppm", rgb)
        save_pgm(out / f"{stem}_vessels.pgm", truth.vessels.astype(np.uint8) * 255)
        save_pgm(out / f"{stem}_lesions.pgm", truth.lesion_label_map())
        rows.append(
            ManifestRow(
                image=f"{stem}.ppm",
                label=truth.class_label.value,
                vessels=f"{stem}_vessels.pgm",
                lesions=f"{stem}_lesions.pgm",
            )
        )
    path = out / "manifest.csv"
    write_manifest(path, rows)
    return path
