"""Shape signatures and nearest-subject identification.

A face signature maps region labels to their seven log-scaled moment
invariants. Two signatures are compared over the labels they share: the
per-region distance is the mean absolute difference of the seven log
components, and the signature distance is the mean of those over the
shared labels. Fewer shared labels than k_min means the comparison is
not attempted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .moments import HuVector, hu_from_coords, log_scale
from .segmentation import FaceRegions, RegionLabel

__all__ = [
    "RegionFeature",
    "FaceSignature",
    "Verdict",
    "MatchResult",
    "DEFAULT_K_MIN",
    "DEFAULT_TAU",
    "build_signature",
    "region_distance",
    "signature_distance",
    "identify",
]

DEFAULT_K_MIN = 3
DEFAULT_TAU = 0.35


@dataclass(frozen=True)
class RegionFeature:
    """Raw and log-scaled invariants for one labelled region."""

    label: RegionLabel
    hu: HuVector
    hu_log: HuVector


@dataclass(frozen=True)
class FaceSignature:
    regions: dict[RegionLabel, RegionFeature]

    def labels(self) -> set[RegionLabel]:
        return set(self.regions)


class Verdict(enum.Enum):
    MATCH = "Match"
    UNKNOWN = "Unknown"
    INSUFFICIENT_REGIONS = "InsufficientRegions"


@dataclass(frozen=True)
class MatchResult:
    verdict: Verdict
    subject_id: str | None
    distance: float
    regions_used: int


def build_signature(face: FaceRegions, epsilon: float = 1e-30) -> FaceSignature:
    """Compute per-region invariants from segmented components.

    Each region's pixel set is shifted to its own tight bounding box before
    the moment computation, so the signature depends only on region shape,
    never on where the region sits in the face box.
    """
    features = {}
    for label, comp in face.regions.items():
        coords = comp.pixels.astype(np.int64, copy=True)
        coords[:, 0] -= comp.bbox.x
        coords[:, 1] -= comp.bbox.y
        hu = hu_from_coords(coords)
        hu_log = HuVector(log_scale(hu, epsilon))
        features[label] = RegionFeature(label=label, hu=hu, hu_log=hu_log)
    return FaceSignature(regions=features)


def region_distance(a: RegionFeature, b: RegionFeature) -> float:
    """Mean absolute difference of the seven log-scaled components."""
    if a.label is not b.label:
        raise ValueError(f"label mismatch: {a.label.value} vs {b.label.value}")
    total = 0.0
    for i in range(7):
        total += abs(a.hu_log[i] - b.hu_log[i])
    return total / 7.0


def signature_distance(
    probe: FaceSignature, gallery_sig: FaceSignature, k_min: int = DEFAULT_K_MIN
) -> tuple[float, int] | None:
    """(mean region distance, shared count), or None below the k_min floor."""
    shared = sorted(probe.labels() & gallery_sig.labels(), key=lambda lb: lb.value)
    if len(shared) < k_min:
        return None
    total = 0.0
    for label in shared:
        total += region_distance(probe.regions[label], gallery_sig.regions[label])
    return total / len(shared), len(shared)


def identify(
    probe: FaceSignature,
    gallery: dict[str, FaceSignature],
    k_min: int = DEFAULT_K_MIN,
    tau: float = DEFAULT_TAU,
) -> MatchResult:
    """Nearest-subject decision over the gallery.

    The best subject is the one at minimum signature distance, ties broken
    by lexicographically smallest id (guaranteed by scanning ids in sorted
    order with a strict-improvement update). Match iff that distance is at
    most tau; if no subject shares at least k_min regions the verdict is
    InsufficientRegions and regions_used reports the best shared count seen.
    """
    if not gallery:
        raise ValueError("empty-gallery: nothing to identify against")
    best_id: str | None = None
    best_dist = math.inf
    best_used = 0
    max_shared = 0
    for subject_id in sorted(gallery):
        scored = signature_distance(probe, gallery[subject_id], k_min=k_min)
        if scored is None:
            shared = len(probe.labels() & gallery[subject_id].labels())
            max_shared = max(max_shared, shared)
            continue
        dist, used = scored
        if dist < best_dist:
            best_id, best_dist, best_used = subject_id, dist, used
    if best_id is None:
        return MatchResult(
            verdict=Verdict.INSUFFICIENT_REGIONS,
            subject_id=None,
            distance=math.inf,
            regions_used=max_shared,
        )
    if best_dist <= tau:
        verdict = Verdict.MATCH
    else:
        verdict = Verdict.UNKNOWN
    return MatchResult(
        verdict=verdict, subject_id=best_id, distance=best_dist, regions_used=best_used
    )
