"""JSON report rows for both screening phases.

Candidate pixels are stored as horizontal runs ``[y, x_start, length]`` in
raster order, which keeps reports small and lets evaluation rebuild the exact
pixel sets.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .bayes import Prediction
from .prefilter import BBox, CandidateRegion, Label

SCHEMA = "fundusgate-report/1"


def encode_runs(pixels: np.ndarray) -> list[list[int]]:
    """Raster-ordered ``(y, x)`` pixels to ``[y, x0, length]`` runs."""
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    if len(px) == 0:
        return []
    ys, xs = px[:, 0], px[:, 1]
    breaks = np.flatnonzero((np.diff(ys) != 0) | (np.diff(xs) != 1)) + 1
    starts = np.concatenate([[0], breaks])
    lengths = np.diff(np.concatenate([starts, [len(px)]]))
    return [[int(ys[s]), int(xs[s]), int(n)] for s, n in zip(starts, lengths)]


def decode_runs(runs) -> np.ndarray:
    parts = []
    for y, x0, n in runs:
        if n < 1:
            raise ValueError(f"run length must be positive, got {n}")
        xs = np.arange(x0, x0 + n, dtype=np.int64)
        parts.append(np.column_stack([np.full(n, y, dtype=np.int64), xs]))
    if not parts:
        return np.empty((0, 2), dtype=np.int64)
    return np.vstack(parts)


def candidate_to_json(c: CandidateRegion) -> dict[str, Any]:
    return {
        "label": c.label.name.lower(),
        "size": c.size,
        "bbox": {"x": c.bbox.x, "y": c.bbox.y, "w": c.bbox.w, "h": c.bbox.h},
        "runs": encode_runs(c.pixels),
    }


def candidate_from_json(d: dict[str, Any]) -> CandidateRegion:
    pixels = decode_runs(d["runs"])
    if len(pixels) != d["size"]:
        raise ValueError(f"candidate runs cover {len(pixels)} pixels but size is {d['size']}")
    b = d["bbox"]
    return CandidateRegion(Label[d["label"].upper()], pixels, BBox(b["x"], b["y"], b["w"], b["h"]), frozenset())


def prescreen_row(image: str, pred: Prediction) -> dict[str, Any]:
    return {"image": image, "label": pred.label.value, "posterior": float(pred.posterior)}


def prefilter_row(image: str, candidates, fraction: float) -> dict[str, Any]:
    return {
        "image": image,
        "candidates": [candidate_to_json(c) for c in candidates],
        "retained_fraction": float(fraction),
    }


def error_row(image: str, message: str) -> dict[str, Any]:
    return {"image": image, "error": message}


def dumps(report: dict[str, Any]) -> str:
    """Canonical serialization: fixed key order, no NaN, trailing newline."""
    return json.dumps({"schema": SCHEMA, **report}, indent=1, allow_nan=False) + "\n"


def loads(text: str) -> dict[str, Any]:
    data = json.loads(text)
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise ValueError(f"not a {SCHEMA} report")
    return data
