"""Grayscale raster types and Netpbm PGM I/O.

Coordinate convention used throughout the package: origin (0, 0) at the
top-left corner, ``x`` is the column index, ``y`` is the row index, both
0-based. Pixel (x, y) of an image ``img`` is ``img.pixels[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GrayImage",
    "BinaryImage",
    "Rect",
    "PgmFormatError",
    "load_pgm",
    "save_pgm",
    "crop",
]

_WHITESPACE = b" \t\r\n\x0b\x0c"


class PgmFormatError(ValueError):
    """Unparseable PGM input.

    ``kind`` is one of ``malformed-header``, ``maxval-out-of-range`` or
    ``truncated-payload``; ``offset`` is the byte offset of the fault.
    Payload bytes that are unparseable or exceed maxval are reported as
    ``truncated-payload`` (the valid payload ends there).
    """

    def __init__(self, kind: str, offset: int, detail: str = ""):
        self.kind = kind
        self.offset = offset
        msg = f"{kind} at byte {offset}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit single-channel image."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image data must be a 2-d array with both dimensions >= 1")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("pixel values must be integers in [0, 255]")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
        arr = arr.astype(np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Immutable raster whose pixels are 0 (background) or 1 (foreground)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image data must be a 2-d array with both dimensions >= 1")
        if not np.issubdtype(arr.dtype, np.integer) and arr.dtype != np.bool_:
            raise ValueError("binary pixels must be integers")
        arr = arr.astype(np.uint8, copy=True)
        if arr.size and arr.max() > 1:
            raise ValueError("binary pixels must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, order=True)
class Rect:
    """Axis-aligned rectangle: top-left corner (x, y), size w by h."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise ValueError(f"Rect.{name} must be an integer")
            object.__setattr__(self, name, int(v))
        if self.w < 1 or self.h < 1:
            raise ValueError("Rect width and height must be >= 1")
        if self.x < 0 or self.y < 0:
            raise ValueError("Rect origin must be non-negative")

    @property
    def area(self) -> int:
        return self.w * self.h

    def inside(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height


def _skip_header_space(data: bytes, pos: int) -> int:
    # Whitespace and '#' comments (to end of line) separate header tokens.
    n = len(data)
    while pos < n:
        b = data[pos : pos + 1]
        if b in (b"#",):
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif b in b" \t\r\n\x0b\x0c":
            pos += 1
        else:
            break
    return pos


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, token_start, position_after_token)."""
    pos = _skip_header_space(data, pos)
    start = pos
    n = len(data)
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], start, pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, start, pos = _next_token(data, pos)
    if not tok or not tok.isdigit():
        raise PgmFormatError("malformed-header", start, f"expected {what}, got {tok!r}")
    return int(tok), pos


def load_pgm(path) -> GrayImage:
    """Load a P2 (ASCII) or P5 (binary) PGM file with maxval <= 255."""
    data = Path(path).read_bytes()
    magic, start, pos = _next_token(data, 0)
    if magic not in (b"P2", b"P5"):
        raise PgmFormatError("malformed-header", start, f"bad magic {magic!r}")
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    if width < 1 or height < 1:
        raise PgmFormatError("malformed-header", start, "dimensions must be >= 1")
    maxval_tok, maxval_start, pos = _next_token(data, pos)
    if not maxval_tok or not maxval_tok.isdigit():
        raise PgmFormatError("malformed-header", maxval_start, f"expected maxval, got {maxval_tok!r}")
    maxval = int(maxval_tok)
    if maxval < 1:
        raise PgmFormatError("malformed-header", maxval_start, "maxval must be >= 1")
    if maxval > 255:
        raise PgmFormatError("maxval-out-of-range", maxval_start, f"maxval {maxval} > 255")

    count = width * height
    if magic == b"P5":
        # Exactly one whitespace byte separates maxval from the raster.
        if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
            raise PgmFormatError("malformed-header", pos, "missing separator before raster")
        pos += 1
        raster = data[pos : pos + count]
        if len(raster) < count:
            raise PgmFormatError(
                "truncated-payload", len(data), f"need {count} raster bytes, found {len(raster)}"
            )
        arr = np.frombuffer(raster, dtype=np.uint8, count=count)
        if maxval < 255 and arr.max(initial=0) > maxval:
            bad = int(np.argmax(arr > maxval))
            raise PgmFormatError("truncated-payload", pos + bad, "sample exceeds maxval")
    else:
        values = np.empty(count, dtype=np.uint8)
        for i in range(count):
            tok, tstart, pos = _next_token(data, pos)
            if not tok:
                raise PgmFormatError(
                    "truncated-payload", len(data), f"need {count} samples, found {i}"
                )
            if not tok.isdigit() or int(tok) > maxval:
                raise PgmFormatError("truncated-payload", tstart, f"bad sample {tok!r}")
            values[i] = int(tok)
        arr = values
    return GrayImage(arr.reshape(height, width))


def save_pgm(image: GrayImage, path) -> None:
    """Write a binary (P5) PGM: single-space header separators, maxval 255."""
    header = f"P5 {image.width} {image.height} 255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels.tobytes())


def crop(image: GrayImage, roi: Rect) -> GrayImage:
    """Extract the sub-image covered by ``roi``; fails if it leaves the frame."""
    if not roi.inside(image.width, image.height):
        raise ValueError(
            f"out-of-bounds ROI {roi} for {image.width}x{image.height} image"
        )
    return GrayImage(image.pixels[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w])
