"""Line-oriented gallery persistence.

A gallery file is UTF-8 text with LF line endings: the header line
``HUMATCH-GALLERY v1`` followed by one JSON record per enrolled subject,
in enrollment order. Floats are serialized with Python's shortest
round-trip repr, which preserves every double exactly across a
save/load cycle and keeps short decimal literals readable.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .matching import FaceSignature, RegionFeature
from .moments import HuVector
from .segmentation import LABEL_ORDER, RegionLabel

__all__ = [
    "GALLERY_HEADER",
    "GalleryMeta",
    "Gallery",
    "GalleryFormatError",
    "DuplicateSubjectError",
    "EmptySignatureError",
    "new_gallery",
    "enroll",
    "save_gallery",
    "load_gallery",
]

GALLERY_HEADER = "HUMATCH-GALLERY v1"


class GalleryFormatError(ValueError):
    """Unreadable gallery file; carries the failure kind and 1-based line."""

    def __init__(self, kind: str, line_no: int, detail: str = ""):
        self.kind = kind
        self.line_no = line_no
        msg = f"{kind} at line {line_no}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class DuplicateSubjectError(ValueError):
    def __init__(self, subject_id: str):
        self.subject_id = subject_id
        super().__init__(f"duplicate-subject: {subject_id!r} already enrolled")


class EmptySignatureError(ValueError):
    def __init__(self):
        super().__init__("empty-signature: no regions to enroll")


@dataclass(frozen=True)
class GalleryMeta:
    """Bookkeeping that never reaches the file format."""

    created_at: str
    epsilon: float = 1e-30
    normalization: str = "(p+q)/2+1"


@dataclass(frozen=True)
class Gallery:
    subjects: dict[str, FaceSignature]
    meta: GalleryMeta = field(compare=False, default=None)  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.subjects)

    def __contains__(self, subject_id: str) -> bool:
        return subject_id in self.subjects


def _fresh_meta() -> GalleryMeta:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return GalleryMeta(created_at=stamp)


def new_gallery() -> Gallery:
    return Gallery(subjects={}, meta=_fresh_meta())


def enroll(gallery: Gallery, subject_id: str, signature: FaceSignature, replace: bool = False) -> Gallery:
    """Return a new gallery with the subject added (or replaced)."""
    if not signature.regions:
        raise EmptySignatureError()
    if subject_id in gallery.subjects and not replace:
        raise DuplicateSubjectError(subject_id)
    subjects = dict(gallery.subjects)
    subjects[subject_id] = signature
    return Gallery(subjects=subjects, meta=gallery.meta)


def _record_line(subject_id: str, sig: FaceSignature) -> str:
    regions = {}
    for label in LABEL_ORDER:
        feat = sig.regions.get(label)
        if feat is None:
            continue
        regions[label.value] = {"hu": list(feat.hu), "hu_log": list(feat.hu_log)}
    return json.dumps({"id": subject_id, "regions": regions})


def save_gallery(gallery: Gallery, path) -> None:
    lines = [GALLERY_HEADER]
    lines.extend(_record_line(sid, sig) for sid, sig in gallery.subjects.items())
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _reject_constant(token: str):
    raise ValueError(f"non-finite literal {token}")


def _seven_finite(values, line_no: int, what: str) -> HuVector:
    if not isinstance(values, list) or len(values) != 7:
        raise GalleryFormatError("malformed-record", line_no, f"{what} must be a list of 7 numbers")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise GalleryFormatError("malformed-record", line_no, f"{what} has a non-number")
        fv = float(v)
        if not math.isfinite(fv):
            raise GalleryFormatError("non-finite-value", line_no, f"{what} contains {v!r}")
        out.append(fv)
    return HuVector(tuple(out))


def load_gallery(path) -> Gallery:
    raw = Path(path).read_bytes().decode("utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != GALLERY_HEADER:
        raise GalleryFormatError("malformed-record", 1, f"expected header {GALLERY_HEADER!r}")
    label_by_value = {label.value: label for label in RegionLabel}
    subjects: dict[str, FaceSignature] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line, parse_constant=_reject_constant)
        except ValueError as exc:
            if "non-finite literal" in str(exc):
                raise GalleryFormatError("non-finite-value", line_no, str(exc)) from None
            raise GalleryFormatError("malformed-record", line_no, str(exc)) from None
        if not isinstance(record, dict):
            raise GalleryFormatError("malformed-record", line_no, "record is not an object")
        subject_id = record.get("id")
        if not isinstance(subject_id, str) or not subject_id:
            raise GalleryFormatError("malformed-record", line_no, "missing subject id")
        if subject_id in subjects:
            raise GalleryFormatError("duplicate-subject", line_no, subject_id)
        regions_obj = record.get("regions")
        if not isinstance(regions_obj, dict):
            raise GalleryFormatError("malformed-record", line_no, "missing regions object")
        features = {}
        for key, body in regions_obj.items():
            label = label_by_value.get(key)
            if label is None:
                raise GalleryFormatError("malformed-record", line_no, f"unknown region {key!r}")
            if not isinstance(body, dict):
                raise GalleryFormatError("malformed-record", line_no, f"region {key!r} not an object")
            hu = _seven_finite(body.get("hu"), line_no, f"{key}.hu")
            hu_log = _seven_finite(body.get("hu_log"), line_no, f"{key}.hu_log")
            features[label] = RegionFeature(label=label, hu=hu, hu_log=hu_log)
        subjects[subject_id] = FaceSignature(regions=features)
    return Gallery(subjects=subjects, meta=_fresh_meta())
