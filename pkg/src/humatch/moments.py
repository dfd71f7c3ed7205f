"""Image moments of binary regions: raw, central, normalized, Hu invariants.

Definitions, with f(x, y) in {0, 1} and 0-based pixel coordinates:

    raw         m_pq  = sum over foreground pixels of x^p * y^q
    central     mu_pq = sum of (x - xbar)^p * (y - ybar)^q,
                        xbar = m10/m00, ybar = m01/m00
    normalized  eta_pq = mu_pq / mu00^((p + q)/2 + 1)

Central moments are evaluated via the standard algebraic expansion in the
raw moments (O(1) after the raw pass); the direct definition is kept as a
test oracle. The seven Hu invariants are the classical 1962 polynomial
combinations of eta_pq: invariant under translation, scale and rotation,
with the seventh changing sign under reflection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import BinaryImage

__all__ = [
    "RawMoments",
    "CentralMoments",
    "NormalizedMoments",
    "HuVector",
    "raw_moments",
    "central_moments",
    "normalized_moments",
    "hu_vector",
    "hu_from_coords",
    "log_scale",
]


@dataclass(frozen=True)
class RawMoments:
    m00: float
    m10: float
    m01: float
    m20: float
    m11: float
    m02: float
    m30: float
    m21: float
    m12: float
    m03: float


@dataclass(frozen=True)
class CentralMoments:
    centroid: tuple[float, float]
    mu00: float
    mu10: float
    mu01: float
    mu20: float
    mu11: float
    mu02: float
    mu30: float
    mu21: float
    mu12: float
    mu03: float


@dataclass(frozen=True)
class NormalizedMoments:
    eta20: float
    eta11: float
    eta02: float
    eta30: float
    eta21: float
    eta12: float
    eta03: float


@dataclass(frozen=True)
class HuVector:
    """The seven invariants, indexable 0..6."""

    values: tuple[float, float, float, float, float, float, float]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 7:
            raise ValueError("HuVector needs exactly 7 values")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("HuVector values must be finite")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return 7


def _foreground_coords(region) -> np.ndarray:
    """Coerce a BinaryImage, an (N, 2) coordinate array, or any object with
    an (N, 2) ``pixels`` array (e.g. segmentation.Component) to (x, y) rows."""
    if isinstance(region, BinaryImage):
        ys, xs = np.nonzero(region.pixels)
        return np.column_stack([xs, ys]).astype(np.int64)
    arr = region if isinstance(region, np.ndarray) else getattr(region, "pixels", None)
    if isinstance(arr, np.ndarray) and arr.ndim == 2 and arr.shape[1] == 2:
        return arr.astype(np.int64)
    raise TypeError(f"cannot extract pixel coordinates from {type(region).__name__}")


def raw_moments(region) -> RawMoments:
    """Raw moments m_pq, p + q <= 3, of a binary region.

    Accepts a BinaryImage, a segmentation Component, or an (N, 2) array of
    (x, y) coordinates. All sums are exact (64-bit integer accumulation).
    """
    coords = _foreground_coords(region)
    if coords.shape[0] == 0:
        raise ValueError("empty-region: no foreground pixels")
    x = coords[:, 0]
    y = coords[:, 1]
    x2 = x * x
    y2 = y * y
    return RawMoments(
        m00=float(x.shape[0]),
        m10=float(x.sum()),
        m01=float(y.sum()),
        m20=float(x2.sum()),
        m11=float((x * y).sum()),
        m02=float(y2.sum()),
        m30=float((x2 * x).sum()),
        m21=float((x2 * y).sum()),
        m12=float((x * y2).sum()),
        m03=float((y2 * y).sum()),
    )


def central_moments(rm: RawMoments) -> CentralMoments:
    """Central moments about the centroid, by algebraic expansion."""
    if rm.m00 <= 0:
        raise ValueError("zero-mass region has no centroid")
    xb = rm.m10 / rm.m00
    yb = rm.m01 / rm.m00
    return CentralMoments(
        centroid=(xb, yb),
        mu00=rm.m00,
        mu10=rm.m10 - xb * rm.m00,
        mu01=rm.m01 - yb * rm.m00,
        mu20=rm.m20 - xb * rm.m10,
        mu11=rm.m11 - xb * rm.m01,
        mu02=rm.m02 - yb * rm.m01,
        mu30=rm.m30 - 3.0 * xb * rm.m20 + 2.0 * xb * xb * rm.m10,
        mu21=rm.m21 - 2.0 * xb * rm.m11 - yb * rm.m20 + 2.0 * xb * xb * rm.m01,
        mu12=rm.m12 - 2.0 * yb * rm.m11 - xb * rm.m02 + 2.0 * yb * yb * rm.m10,
        mu03=rm.m03 - 3.0 * yb * rm.m02 + 2.0 * yb * yb * rm.m01,
    )


def normalized_moments(cm: CentralMoments) -> NormalizedMoments:
    if cm.mu00 <= 0:
        raise ValueError("zero-mass region cannot be normalized")
    g2 = cm.mu00 * cm.mu00          # exponent (p + q)/2 + 1 = 2 for p + q = 2
    g3 = cm.mu00 ** 2.5             # and 2.5 for p + q = 3
    return NormalizedMoments(
        eta20=cm.mu20 / g2,
        eta11=cm.mu11 / g2,
        eta02=cm.mu02 / g2,
        eta30=cm.mu30 / g3,
        eta21=cm.mu21 / g3,
        eta12=cm.mu12 / g3,
        eta03=cm.mu03 / g3,
    )


def hu_vector(nm: NormalizedMoments) -> HuVector:
    """The classical seven Hu invariants of the normalized moments."""
    a = nm.eta30 + nm.eta12
    b = nm.eta21 + nm.eta03
    c = nm.eta30 - 3.0 * nm.eta12
    d = 3.0 * nm.eta21 - nm.eta03
    e = nm.eta20 - nm.eta02
    aa = a * a
    bb = b * b
    h0 = nm.eta20 + nm.eta02
    h1 = e * e + 4.0 * nm.eta11 * nm.eta11
    h2 = c * c + d * d
    h3 = aa + bb
    h4 = c * a * (aa - 3.0 * bb) + d * b * (3.0 * aa - bb)
    h5 = e * (aa - bb) + 4.0 * nm.eta11 * a * b
    h6 = d * a * (aa - 3.0 * bb) - c * b * (3.0 * aa - bb)
    return HuVector((h0, h1, h2, h3, h4, h5, h6))


def hu_from_coords(coords) -> HuVector:
    """Raw -> central -> normalized -> Hu, in one call."""
    return hu_vector(normalized_moments(central_moments(raw_moments(coords))))


def log_scale(h: HuVector, epsilon: float = 1e-30) -> tuple[float, ...]:
    """Signed log10 compression: -sign(h_i) * log10(|h_i| + epsilon).

    The sign convention maps an exact zero to zero, and epsilon (default
    1e-30, far below any attainable invariant of a region of a few pixels)
    only guards those exact zeros.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    out = []
    for v in h:
        if v == 0.0:
            out.append(0.0)
        else:
            sign = 1.0 if v > 0.0 else -1.0
            out.append(-sign * math.log10(abs(v) + epsilon))
    return tuple(out)
