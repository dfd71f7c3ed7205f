"""Otsu binarization and extraction of the five facial feature regions.

The detected face ROI is binarized with foreground = dark (eyebrows, eyes
and lips are darker than skin), split into 8-connected components, and the
components are assigned to the five region labels by horizontal bands of
their normalized centroid position inside the face box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from .image import BinaryImage, GrayImage, Rect

__all__ = [
    "RegionLabel",
    "Component",
    "FaceRegions",
    "RegionBands",
    "DEFAULT_BANDS",
    "histogram256",
    "otsu_threshold",
    "binarize",
    "connected_components",
    "assign_regions",
    "render_region_mask",
]


class RegionLabel(Enum):
    """The five feature regions; values are the wire/CLI names."""

    LEFT_EYEBROW = "left_eyebrow"
    RIGHT_EYEBROW = "right_eyebrow"
    LEFT_EYE = "left_eye"
    RIGHT_EYE = "right_eye"
    LIP = "lip"


# Canonical presentation order, also used for gallery records and masks.
LABEL_ORDER = (
    RegionLabel.LEFT_EYEBROW,
    RegionLabel.RIGHT_EYEBROW,
    RegionLabel.LEFT_EYE,
    RegionLabel.RIGHT_EYE,
    RegionLabel.LIP,
)

# Mask intensities for render_region_mask, in LABEL_ORDER (0 = background).
MASK_LEVELS = (50, 100, 150, 200, 250)


@dataclass(frozen=True, eq=False)
class Component:
    """One 8-connected foreground blob.

    ``pixels`` is an (area, 2) array of (x, y) coordinates sorted by
    (y, x); ``bbox`` is the tight bounding rectangle; ``centroid`` is the
    real-valued mean coordinate (always inside the bbox).
    """

    pixels: np.ndarray
    bbox: Rect
    area: int
    centroid: tuple[float, float]

    @classmethod
    def from_coords(cls, coords: np.ndarray) -> "Component":
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] == 0:
            raise ValueError("component needs a non-empty (N, 2) coordinate array")
        order = np.lexsort((coords[:, 0], coords[:, 1]))
        coords = coords[order]
        coords.setflags(write=False)
        xs, ys = coords[:, 0], coords[:, 1]
        x0, y0 = int(xs.min()), int(ys.min())
        bbox = Rect(x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1)
        centroid = (float(xs.mean()), float(ys.mean()))
        return cls(pixels=coords, bbox=bbox, area=int(coords.shape[0]), centroid=centroid)

    def sort_key(self):
        """Total deterministic order: larger first, then top-left first."""
        first = self.pixels[0]
        return (
            -self.area,
            self.bbox.y,
            self.bbox.x,
            self.centroid[1],
            self.centroid[0],
            int(first[1]),
            int(first[0]),
        )


@dataclass(frozen=True)
class RegionBands:
    """Layout constants for assign_regions, as fractions of the face box.

    Eyebrow and eye bands are half-open intervals [low, high) over the
    normalized centroid row cy; the lip band is closed. Components with
    area outside [area_floor, area_ceil] x face_area are discarded (the
    ceiling also rejects hair/shadow blobs touching the border).
    """

    brow_low: float = 0.15
    brow_high: float = 0.40
    eye_low: float = 0.30
    eye_high: float = 0.55
    lip_low: float = 0.60
    lip_high: float = 0.90
    area_floor: float = 0.002
    area_ceil: float = 0.15


DEFAULT_BANDS = RegionBands()


@dataclass
class FaceRegions:
    """Partial mapping of region labels to components for one face box."""

    regions: dict[RegionLabel, Component]
    face_box: Rect


def histogram256(image: GrayImage) -> np.ndarray:
    """256-bin intensity histogram; counts sum to the pixel count."""
    return np.bincount(image.pixels.ravel(), minlength=256).astype(np.int64)


def otsu_threshold(hist) -> int:
    """Smallest threshold t maximizing the between-class variance.

    Classes split at t: class 0 holds intensities <= t, class 1 the rest;
    sigma_b^2(t) = w0 * w1 * (mu0 - mu1)^2 and is defined as 0 whenever
    either class is empty.
    """
    counts = [int(c) for c in hist]
    if len(counts) != 256 or any(c < 0 for c in counts):
        raise ValueError("histogram must hold 256 non-negative counts")
    total = sum(counts)
    if total < 1:
        raise ValueError("empty-histogram: no pixels")
    total_sum = sum(i * c for i, c in enumerate(counts))
    best_t = 0
    best = -1.0
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            sigma = 0.0
        else:
            d = s0 / n0 - (total_sum - s0) / n1
            sigma = (n0 / total) * (n1 / total) * (d * d)
        if sigma > best:
            best = sigma
            best_t = t
    return best_t


def binarize(image: GrayImage, t: int) -> BinaryImage:
    """Foreground = pixels <= t (dark features on light skin)."""
    return BinaryImage((image.pixels <= t).astype(np.uint8))


_EIGHT_CONN = np.ones((3, 3), dtype=int)


def connected_components(image: BinaryImage) -> list[Component]:
    """8-connected foreground components, largest first.

    Ties in area are broken by ascending bounding-box (y, x).
    """
    labels, n = ndimage.label(image.pixels, structure=_EIGHT_CONN)
    comps = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        ys, xs = np.nonzero(labels[sl] == idx)
        coords = np.column_stack([xs + sl[1].start, ys + sl[0].start])
        comps.append(Component.from_coords(coords))
    comps.sort(key=lambda c: (-c.area, c.bbox.y, c.bbox.x))
    return comps


def _pick_pair(brows: list[Component], eyes: list[Component]):
    """Choose (eyebrow, eye) for one face side.

    Valid assignments keep the eyebrow centroid strictly above the eye
    centroid. Prefer filling both slots, then the largest total area, then
    the largest eye, then the largest eyebrow; candidate lists arrive in
    canonical order so remaining ties resolve deterministically.
    """
    best = (None, None)
    best_score = (0, 0, 0, 0)
    for brow in [*brows, None]:
        for eye in [*eyes, None]:
            if brow is not None and eye is not None:
                if brow is eye or not brow.centroid[1] < eye.centroid[1]:
                    continue
            score = (
                (brow is not None) + (eye is not None),
                (brow.area if brow is not None else 0) + (eye.area if eye is not None else 0),
                eye.area if eye is not None else 0,
                brow.area if brow is not None else 0,
            )
            if score > best_score:
                best_score = score
                best = (brow, eye)
    return best


def assign_regions(
    components: list[Component], face_box: Rect, bands: RegionBands = DEFAULT_BANDS
) -> FaceRegions:
    """Map components (coordinates relative to face_box) to region labels.

    Components are filtered by area, then bucketed by normalized centroid:
    row bands select eyebrow/eye/lip candidates, the column midline splits
    left from right (image-left convention). A component eligible for both
    the eyebrow and eye bands lands where the above/below ordering against
    the other candidates of its side holds; the largest candidate wins any
    remaining contest. Missing regions simply stay absent.
    """
    area = face_box.w * face_box.h
    lo = bands.area_floor * area
    hi = bands.area_ceil * area
    kept = [c for c in components if lo <= c.area <= hi]
    kept.sort(key=Component.sort_key)

    sides: dict[bool, dict[str, list[Component]]] = {
        False: {"brow": [], "eye": []},
        True: {"brow": [], "eye": []},
    }
    lip_cands: list[Component] = []
    for c in kept:
        cx = c.centroid[0] / face_box.w
        cy = c.centroid[1] / face_box.h
        is_right = cx >= 0.5
        if bands.brow_low <= cy < bands.brow_high:
            sides[is_right]["brow"].append(c)
        if bands.eye_low <= cy < bands.eye_high:
            sides[is_right]["eye"].append(c)
        if bands.lip_low <= cy <= bands.lip_high:
            lip_cands.append(c)

    regions: dict[RegionLabel, Component] = {}
    assigned: list[Component] = []
    for is_right, brow_label, eye_label in (
        (False, RegionLabel.LEFT_EYEBROW, RegionLabel.LEFT_EYE),
        (True, RegionLabel.RIGHT_EYEBROW, RegionLabel.RIGHT_EYE),
    ):
        brow, eye = _pick_pair(sides[is_right]["brow"], sides[is_right]["eye"])
        if brow is not None:
            regions[brow_label] = brow
            assigned.append(brow)
        if eye is not None:
            regions[eye_label] = eye
            assigned.append(eye)

    for c in lip_cands:
        if not any(c is a for a in assigned):
            regions[RegionLabel.LIP] = c
            break

    ordered = {lab: regions[lab] for lab in LABEL_ORDER if lab in regions}
    return FaceRegions(regions=ordered, face_box=face_box)


def render_region_mask(face: FaceRegions) -> GrayImage:
    """Label visualization sized to the face box: background 0, regions at
    the fixed intensities 50/100/150/200/250 in canonical label order."""
    canvas = np.zeros((face.face_box.h, face.face_box.w), dtype=np.uint8)
    for lab, level in zip(LABEL_ORDER, MASK_LEVELS):
        comp = face.regions.get(lab)
        if comp is None:
            continue
        canvas[comp.pixels[:, 1], comp.pixels[:, 0]] = level
    return GrayImage(canvas)
