"""Summed-area tables: O(1) rectangle sums and window statistics.

Tables are zero-padded with an extra leading row and column so the
four-lookup rectangle sum needs no branches at the image border:
``sums[y + 1, x + 1]`` holds the sum of all pixels (u <= x, v <= y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import GrayImage, Rect

__all__ = ["IntegralImage", "build_integral", "rect_sum", "window_mean_stddev"]

_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Cumulative plain and squared pixel sums of one grayscale image."""

    width: int
    height: int
    sums: np.ndarray
    sq_sums: np.ndarray


def build_integral(image: GrayImage) -> IntegralImage:
    h, w = image.height, image.width
    # Worst case fits easily today; checked so the exactness guarantee is explicit.
    if 255 * 255 * w * h > _INT64_MAX:
        raise ValueError("image too large for exact 64-bit summed-area tables")
    px = image.pixels.astype(np.int64)
    sums = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq_sums = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(px, axis=0), axis=1, out=sums[1:, 1:])
    np.cumsum(np.cumsum(px * px, axis=0), axis=1, out=sq_sums[1:, 1:])
    sums.setflags(write=False)
    sq_sums.setflags(write=False)
    return IntegralImage(width=w, height=h, sums=sums, sq_sums=sq_sums)


def _check_bounds(ii: IntegralImage, r: Rect) -> None:
    if not r.inside(ii.width, ii.height):
        raise ValueError(f"out-of-bounds rect {r} for {ii.width}x{ii.height} integral image")


def _lookup(table: np.ndarray, r: Rect) -> int:
    x0, y0, x1, y1 = r.x, r.y, r.x + r.w, r.y + r.h
    return int(table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0])


def rect_sum(ii: IntegralImage, r: Rect) -> int:
    """Sum of pixel intensities inside ``r``, four table lookups."""
    _check_bounds(ii, r)
    return _lookup(ii.sums, r)


def window_mean_stddev(ii: IntegralImage, r: Rect) -> tuple[float, float]:
    """Population mean and standard deviation of the pixels inside ``r``.

    A flat window reports stddev 1 so callers can divide by it when
    normalizing cascade feature thresholds.
    """
    _check_bounds(ii, r)
    area = r.w * r.h
    s = _lookup(ii.sums, r)
    sq = _lookup(ii.sq_sums, r)
    # The arithmetic below is mirrored by the vectorized window scan in
    # cascade.py; keep operation order in sync so both produce identical
    # floating-point results.
    mean = s / area
    var = sq / area - mean * mean
    stddev = math.sqrt(var) if var > 0.0 else 1.0
    return mean, stddev
