"""Brute-force reference implementations used by the tests.

Each oracle follows the textbook definition directly and shares no code with
the package path it checks.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def median_sort(img: np.ndarray, k: int) -> np.ndarray:
    """k x k median by sorting every replicate-padded window."""
    r = k // 2
    padded = np.pad(img, r, mode="edge")
    win = sliding_window_view(padded, (k, k)).reshape(img.shape[0], img.shape[1], k * k)
    return np.sort(win, axis=2)[:, :, (k * k) // 2].astype(np.uint8)


def median_loop(img: np.ndarray, k: int) -> np.ndarray:
    """Per-pixel median with explicit clamped indexing (for small images)."""
    h, w = img.shape
    r = k // 2
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            vals = sorted(
                int(img[min(max(y + dy, 0), h - 1), min(max(x + dx, 0), w - 1)])
                for dy in range(-r, r + 1)
                for dx in range(-r, r + 1)
            )
            out[y, x] = vals[len(vals) // 2]
    return out


def hist_equalize_direct(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Cumulative-count mapping evaluated per distinct value with exact rounding."""
    vals = img[mask].astype(np.int64)
    n = vals.size
    distinct = np.unique(vals)
    out = img.copy()
    if len(distinct) <= 1:
        return out
    cdf_min = int((vals <= distinct[0]).sum())
    den = n - cdf_min
    for v in distinct:
        cdf = int((vals <= v).sum())
        # floor(255 * (cdf - cdf_min) / den + 1/2) in integers
        mapped = (2 * 255 * (cdf - cdf_min) + den) // (2 * den)
        out[mask & (img == v)] = mapped
    return out


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def components_union_find(labels: np.ndarray, connectivity: int, min_size: int):
    """Same-label components as ``(label, sorted flat indices)``, ordered by first pixel."""
    h, w = labels.shape
    flat = labels.ravel().tolist()
    uf = UnionFind(h * w)
    if connectivity == 8:
        offsets = [(0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        offsets = [(0, 1), (1, 0)]
    for y in range(h):
        for x in range(w):
            v = flat[y * w + x]
            if v == 0:
                continue
            for dy, dx in offsets:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and flat[ny * w + nx] == v:
                    uf.union(y * w + x, ny * w + nx)
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(flat):
        if v:
            groups.setdefault(uf.find(i), []).append(i)
    comps = [(flat[members[0]], members) for members in groups.values() if len(members) >= min_size]
    comps.sort(key=lambda c: c[1][0])
    return comps


def flood_fill_largest(bright: np.ndarray) -> np.ndarray:
    """Largest 8-connected True blob by breadth-first search; earliest seed wins ties."""
    h, w = bright.shape
    seen = np.zeros_like(bright, dtype=bool)
    best: list[tuple[int, int]] = []
    for sy in range(h):
        for sx in range(w):
            if not bright[sy, sx] or seen[sy, sx]:
                continue
            queue = [(sy, sx)]
            seen[sy, sx] = True
            comp = []
            while queue:
                y, x = queue.pop()
                comp.append((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and bright[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
            if len(comp) > len(best):
                best = comp
    out = np.zeros_like(bright, dtype=bool)
    for y, x in best:
        out[y, x] = True
    return out


def gaussian_pdf(x: float, mean: float, var: float) -> float:
    return math.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def bayes_posterior_direct(priors, means, variances, bern, kinds, v) -> list[float]:
    """Class posteriors from Bayes' rule with explicit densities, no logarithms."""
    joint = []
    for c in range(2):
        p = priors[c]
        ci = bi = 0
        for kind, x in zip(kinds, v):
            if kind == "continuous":
                p *= gaussian_pdf(x, means[c][ci], variances[c][ci])
                ci += 1
            else:
                q = bern[c][bi]
                p *= q if x >= 0.5 else 1 - q
                bi += 1
        joint.append(p)
    total = sum(joint)
    return [j / total for j in joint]


def area_mean_exact(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Box resampling with rational arithmetic, one output pixel at a time."""
    from fractions import Fraction

    h, w = img.shape
    out = np.empty((out_h, out_w), dtype=np.uint8)
    for oy in range(out_h):
        y0, y1 = Fraction(oy * h, out_h), Fraction((oy + 1) * h, out_h)
        for ox in range(out_w):
            x0, x1 = Fraction(ox * w, out_w), Fraction((ox + 1) * w, out_w)
            acc = Fraction(0)
            for sy in range(math.floor(y0), math.ceil(y1)):
                wy = min(y1, sy + 1) - max(y0, sy)
                for sx in range(math.floor(x0), math.ceil(x1)):
                    wx = min(x1, sx + 1) - max(x0, sx)
                    acc += wy * wx * int(img[sy, sx])
            mean = acc / ((y1 - y0) * (x1 - x0))
            out[oy, ox] = math.floor(mean + Fraction(1, 2))
    return out


def splitmix64_scalar(seed: int, count: int) -> list[int]:
    """Reference SplitMix64 with Python integers."""
    mask = (1 << 64) - 1
    state = seed & mask
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out
