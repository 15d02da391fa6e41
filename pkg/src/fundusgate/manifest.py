"""CSV dataset manifests.

Header ``image,label,fov,vessels,optic_disc,macula,lesions``; paths are
relative to the manifest file and empty cells mean "not supplied".
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, fields
from pathlib import Path

COLUMNS = ("image", "label", "fov", "vessels", "optic_disc", "macula", "lesions")
LABELS = ("abnormal", "process_further", "unlabeled")
MASK_COLUMNS = COLUMNS[2:]


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRow:
    image: str
    label: str = "unlabeled"
    fov: str = ""
    vessels: str = ""
    optic_disc: str = ""
    macula: str = ""
    lesions: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ManifestError(f"unknown label {self.label!r}; expected one of {', '.join(LABELS)}")
        if not self.image:
            raise ManifestError("row without image path")


@dataclass
class DatasetManifest:
    rows: list[ManifestRow]
    base_dir: Path

    def resolve(self, rel: str) -> Path | None:
        return self.base_dir / rel if rel else None

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def parse_manifest(text: str, base_dir: str | os.PathLike = ".") -> DatasetManifest:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != COLUMNS:
        raise ManifestError(f"manifest header must be {','.join(COLUMNS)}, got {reader.fieldnames}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        try:
            rows.append(ManifestRow(**{k: (rec[k] or "").strip() for k in COLUMNS}))
        except ManifestError as exc:
            raise ManifestError(f"line {lineno}: {exc}") from None
    return DatasetManifest(rows, Path(base_dir))


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), path.parent)


def format_manifest(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([getattr(row, f.name) for f in fields(ManifestRow)])
    return buf.getvalue()


def write_manifest(path: str | os.PathLike, rows) -> None:
    Path(path).write_text(format_manifest(rows), encoding="utf-8")
