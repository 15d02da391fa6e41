"""Binary PGM (P5) and PPM (P6) reading and writing, maxval 255 only."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .image import as_gray, as_rgb

_WHITESPACE = b" \t\n\r\v\f"


class NetpbmError(ValueError):
    """Raised for any malformed raster; ``field`` names the offending part."""

    field = "header"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        if field is not None:
            self.field = field


class MagicError(NetpbmError):
    field = "magic"


class HeaderError(NetpbmError):
    pass


class MaxvalError(NetpbmError):
    field = "maxval"


class TruncatedError(NetpbmError):
    field = "payload"


def _read_token(data: bytes, pos: int, field: str) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise HeaderError(f"missing {field} in header", field=field)
    return data[start:pos], pos


def _read_int(data: bytes, pos: int, field: str) -> tuple[int, int]:
    tok, pos = _read_token(data, pos, field)
    if not tok.isdigit():
        raise HeaderError(f"{field} is not a decimal integer: {tok!r}", field=field)
    return int(tok), pos


def _parse(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    data = bytes(data)
    if data[:2] != magic:
        raise MagicError(f"expected magic {magic.decode()}, got {data[:2]!r}")
    pos = 2
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE + b"#":
        raise HeaderError("magic must be followed by whitespace", field="magic")
    width, pos = _read_int(data, pos, "width")
    height, pos = _read_int(data, pos, "height")
    if width < 1:
        raise HeaderError(f"width must be positive, got {width}", field="width")
    if height < 1:
        raise HeaderError(f"height must be positive, got {height}", field="height")
    maxval_tok, pos = _read_token(data, pos, "maxval")
    if not maxval_tok.isdigit() or int(maxval_tok) != 255:
        raise MaxvalError(f"only maxval 255 is supported, got {maxval_tok!r}")
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise TruncatedError("no raster after header")
    pos += 1
    expected = width * height * channels
    payload = data[pos:]
    if len(payload) < expected:
        raise TruncatedError(f"payload has {len(payload)} bytes, header promises {expected}")
    if len(payload) > expected:
        raise NetpbmError(f"{len(payload) - expected} trailing bytes after raster", field="payload")
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return arr.reshape(shape).copy()


def read_pgm(data: bytes) -> np.ndarray:
    return _parse(data, b"P5", 1)


def read_ppm(data: bytes) -> np.ndarray:
    return _parse(data, b"P6", 3)


def write_pgm(img) -> bytes:
    gray = as_gray(img)
    h, w = gray.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(gray).tobytes()


def write_ppm(img) -> bytes:
    rgb = as_rgb(img)
    h, w, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(rgb).tobytes()


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Read a PGM or PPM file, dispatching on its magic number."""
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        return read_pgm(data)
    if data[:2] == b"P6":
        return read_ppm(data)
    raise MagicError(f"{path}: not a binary PGM/PPM file")


def save_pgm(path: str | os.PathLike, img) -> None:
    Path(path).write_bytes(write_pgm(img))


def save_ppm(path: str | os.PathLike, img) -> None:
    Path(path).write_bytes(write_ppm(img))
