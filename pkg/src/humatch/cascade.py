"""Haar cascade model parsing and multi-scale sliding-window detection.

Supports the stump-tree, non-tilted subset of the cascade-classifier XML
interchange format (the format emitted by common cascade-training tools).
Detection scales the window, not the image: feature rectangles are scaled
to the current window size, rect sums are normalized by the window area,
and stump thresholds are compared against threshold times the window's
pixel standard deviation.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import GrayImage, Rect
from .integral import IntegralImage, build_integral, window_mean_stddev

__all__ = [
    "HaarFeature",
    "WeakClassifier",
    "CascadeStage",
    "CascadeModel",
    "Detection",
    "CascadeFormatError",
    "parse_cascade",
    "eval_window",
    "scan_windows",
    "group_detections",
    "detect_multiscale",
]


class CascadeFormatError(ValueError):
    """Unusable cascade document; names the offending element path."""

    def __init__(self, kind: str, element_path: str, detail: str = ""):
        self.kind = kind
        self.element_path = element_path
        msg = f"{kind} at {element_path}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class HaarFeature:
    """2 or 3 weighted rectangles inside the base detection window."""

    rects: tuple[tuple[Rect, float], ...]


@dataclass(frozen=True)
class WeakClassifier:
    """Decision stump over one feature's normalized value."""

    feature_index: int
    threshold: float
    left_val: float
    right_val: float


@dataclass(frozen=True)
class CascadeStage:
    weak_classifiers: tuple[WeakClassifier, ...]
    stage_threshold: float


@dataclass(frozen=True)
class CascadeModel:
    window_w: int
    window_h: int
    stages: tuple[CascadeStage, ...]
    features: tuple[HaarFeature, ...]


@dataclass(frozen=True)
class Detection:
    """A grouped face hypothesis with its supporting raw-hit count."""

    rect: Rect
    neighbor_count: int


def _text(elem, default: str = "") -> str:
    return (elem.text or default).strip() if elem is not None else default


def _parse_feature(feat_elem, idx: int, win_w: int, win_h: int) -> HaarFeature:
    path = f"opencv_storage/cascade/features/_[{idx}]"
    tilted = feat_elem.find("tilted")
    if (tilted is not None and _text(tilted) not in ("", "0")) or feat_elem.get("tilted") == "1":
        raise CascadeFormatError("unsupported-feature-type", f"{path}/tilted", "tilted features")
    rects_elem = feat_elem.find("rects")
    if rects_elem is None:
        raise CascadeFormatError("malformed-xml", f"{path}/rects", "missing rects")
    pairs = []
    for ridx, r_elem in enumerate(rects_elem.findall("_")):
        rpath = f"{path}/rects/_[{ridx}]"
        toks = _text(r_elem).split()
        if len(toks) != 5:
            raise CascadeFormatError("malformed-xml", rpath, f"expected 5 fields, got {len(toks)}")
        try:
            x, y, w, h = (int(t) for t in toks[:4])
            weight = float(toks[4])
        except ValueError as exc:
            raise CascadeFormatError("malformed-xml", rpath, str(exc)) from None
        if x < 0 or y < 0 or w < 1 or h < 1 or x + w > win_w or y + h > win_h:
            raise CascadeFormatError("malformed-xml", rpath, "rect outside base window")
        if not math.isfinite(weight) or weight == 0.0:
            raise CascadeFormatError("malformed-xml", rpath, f"bad weight {toks[4]}")
        pairs.append((Rect(x, y, w, h), weight))
    if not 2 <= len(pairs) <= 3:
        raise CascadeFormatError(
            "malformed-xml", f"{path}/rects", f"need 2-3 rects, got {len(pairs)}"
        )
    return HaarFeature(rects=tuple(pairs))


def _parse_weak(weak_elem, spath: str, widx: int, n_features: int) -> WeakClassifier:
    wpath = f"{spath}/weakClassifiers/_[{widx}]"
    nodes = _text(weak_elem.find("internalNodes")).split()
    leaves = _text(weak_elem.find("leafValues")).split()
    if len(nodes) != 4:
        raise CascadeFormatError(
            "non-stump-tree", f"{wpath}/internalNodes", f"{len(nodes)} fields (stump needs 4)"
        )
    if len(leaves) != 2:
        raise CascadeFormatError(
            "non-stump-tree", f"{wpath}/leafValues", f"{len(leaves)} leaves (stump needs 2)"
        )
    try:
        feature_index = int(nodes[2])
        threshold = float(nodes[3])
        left_val, right_val = float(leaves[0]), float(leaves[1])
    except ValueError as exc:
        raise CascadeFormatError("malformed-xml", wpath, str(exc)) from None
    if not 0 <= feature_index < n_features:
        raise CascadeFormatError(
            "malformed-xml", f"{wpath}/internalNodes", f"feature index {feature_index} out of range"
        )
    return WeakClassifier(
        feature_index=feature_index, threshold=threshold, left_val=left_val, right_val=right_val
    )


def parse_cascade(path) -> CascadeModel:
    """Parse a cascade XML file, accepting only HAAR features and stumps."""
    try:
        tree = ET.parse(Path(path))
    except ET.ParseError as exc:
        raise CascadeFormatError("malformed-xml", "opencv_storage", str(exc)) from None
    root = tree.getroot()
    if root.tag != "opencv_storage":
        raise CascadeFormatError("malformed-xml", root.tag, "expected opencv_storage root")
    cascade = root.find("cascade")
    if cascade is None:
        raise CascadeFormatError("malformed-xml", "opencv_storage/cascade", "missing cascade")

    feature_type = _text(cascade.find("featureType"), "HAAR")
    if feature_type != "HAAR":
        raise CascadeFormatError(
            "unsupported-feature-type",
            "opencv_storage/cascade/featureType",
            f"featureType {feature_type!r}",
        )
    stage_type = _text(cascade.find("stageType"), "BOOST")
    if stage_type != "BOOST":
        raise CascadeFormatError(
            "malformed-xml", "opencv_storage/cascade/stageType", f"stageType {stage_type!r}"
        )
    try:
        win_h = int(_text(cascade.find("height")))
        win_w = int(_text(cascade.find("width")))
    except ValueError:
        raise CascadeFormatError(
            "malformed-xml", "opencv_storage/cascade/height", "bad window size"
        ) from None
    if win_w < 1 or win_h < 1:
        raise CascadeFormatError(
            "malformed-xml", "opencv_storage/cascade/height", "window size must be >= 1"
        )

    features_elem = cascade.find("features")
    feature_list = features_elem.findall("_") if features_elem is not None else []
    features = tuple(
        _parse_feature(fe, i, win_w, win_h) for i, fe in enumerate(feature_list)
    )

    stages_elem = cascade.find("stages")
    stage_list = stages_elem.findall("_") if stages_elem is not None else []
    if not stage_list:
        raise CascadeFormatError("malformed-xml", "opencv_storage/cascade/stages", "0 stages")
    stages = []
    for sidx, st_elem in enumerate(stage_list):
        spath = f"opencv_storage/cascade/stages/_[{sidx}]"
        try:
            stage_threshold = float(_text(st_elem.find("stageThreshold")))
        except ValueError:
            raise CascadeFormatError(
                "malformed-xml", f"{spath}/stageThreshold", "bad threshold"
            ) from None
        weak_elems = st_elem.find("weakClassifiers")
        weak_list = weak_elems.findall("_") if weak_elems is not None else []
        if not weak_list:
            raise CascadeFormatError(
                "malformed-xml", f"{spath}/weakClassifiers", "stage has no weak classifiers"
            )
        weaks = tuple(
            _parse_weak(we, spath, widx, len(features)) for widx, we in enumerate(weak_list)
        )
        stages.append(CascadeStage(weak_classifiers=weaks, stage_threshold=stage_threshold))

    return CascadeModel(window_w=win_w, window_h=win_h, stages=tuple(stages), features=features)


def _scaled_feature_rects(
    model: CascadeModel, win_w: int, win_h: int
) -> list[list[tuple[int, int, int, int, float]]]:
    """Integer feature rects for one window size, indexed like model.features.

    Round-to-nearest per coordinate, clipped into the window so every
    integral lookup stays inside any in-bounds window. Both eval_window and
    the vectorized scan use this exact table, so single-window evaluation
    and multi-scale scanning agree bit for bit.
    """
    sx = win_w / model.window_w
    sy = win_h / model.window_h
    scaled = []
    for feat in model.features:
        rows = []
        for r, weight in feat.rects:
            x = min(round(r.x * sx), win_w)
            y = min(round(r.y * sy), win_h)
            w = max(0, min(round(r.w * sx), win_w - x))
            h = max(0, min(round(r.h * sy), win_h - y))
            rows.append((x, y, w, h, weight))
        scaled.append(rows)
    return scaled


def _corner_sum(table: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> int:
    return int(table[y1, x1]) - int(table[y0, x1]) - int(table[y1, x0]) + int(table[y0, x0])


def eval_window(model: CascadeModel, ii: IntegralImage, window: Rect) -> bool:
    """Evaluate one window: True iff every stage's weak-sum passes.

    Feature value = sum of weight * rect_sum over the feature's rects
    scaled to this window, divided by the window area; the stump threshold
    is compared against threshold * window stddev. Fails fast at the first
    stage whose summed leaf values fall below its stage threshold.

    The arithmetic here is mirrored element-wise by scan_windows; keep the
    operation order of the two in sync.
    """
    if not window.inside(ii.width, ii.height):
        raise ValueError(f"out-of-bounds window {window} for {ii.width}x{ii.height} image")
    scaled = _scaled_feature_rects(model, window.w, window.h)
    area = window.w * window.h
    _, stddev = window_mean_stddev(ii, window)
    table = ii.sums
    ox, oy = window.x, window.y
    for stage in model.stages:
        total = 0.0
        for weak in stage.weak_classifiers:
            acc = 0.0
            for x, y, w, h, weight in scaled[weak.feature_index]:
                rs = _corner_sum(table, ox + x, oy + y, ox + x + w, oy + y + h)
                acc = acc + weight * float(rs)
            fv = acc / area
            total = total + (weak.left_val if fv < weak.threshold * stddev else weak.right_val)
        if total < stage.stage_threshold:
            return False
    return True


def _scan_one_scale(
    model: CascadeModel, ii: IntegralImage, win_w: int, win_h: int, stride: int
) -> list[Rect]:
    """All raw hits of one window size over the stride grid (vectorized)."""
    xs = np.arange(0, ii.width - win_w + 1, stride, dtype=np.int64)
    ys = np.arange(0, ii.height - win_h + 1, stride, dtype=np.int64)
    ox, oy = (g.ravel() for g in np.meshgrid(xs, ys))
    if ox.size == 0:
        return []
    scaled = _scaled_feature_rects(model, win_w, win_h)
    area = win_w * win_h
    table, sq_table = ii.sums, ii.sq_sums

    def corner(tab, dx0, dy0, dx1, dy1):
        return (
            tab[oy + dy1, ox + dx1]
            - tab[oy + dy0, ox + dx1]
            - tab[oy + dy1, ox + dx0]
            + tab[oy + dy0, ox + dx0]
        )

    # Window statistics, mirroring integral.window_mean_stddev.
    s = corner(table, 0, 0, win_w, win_h)
    sq = corner(sq_table, 0, 0, win_w, win_h)
    mean = s / area
    var = sq / area - mean * mean
    stddev = np.where(var > 0.0, np.sqrt(np.maximum(var, 0.0)), 1.0)

    for stage in model.stages:
        total = np.zeros(ox.shape[0], dtype=np.float64)
        for weak in stage.weak_classifiers:
            acc = np.zeros(ox.shape[0], dtype=np.float64)
            for x, y, w, h, weight in scaled[weak.feature_index]:
                rs = corner(table, x, y, x + w, y + h)
                acc = acc + weight * rs.astype(np.float64)
            fv = acc / area
            total = total + np.where(fv < weak.threshold * stddev, weak.left_val, weak.right_val)
        keep = total >= stage.stage_threshold
        if not keep.any():
            return []
        ox, oy, stddev = ox[keep], oy[keep], stddev[keep]
    return [Rect(int(x), int(y), win_w, win_h) for x, y in zip(ox, oy)]


def scan_windows(
    model: CascadeModel,
    image: GrayImage,
    scale_factor: float = 1.1,
    min_size: int | None = None,
) -> list[Rect]:
    """Raw (ungrouped) hits over every scale and stride-grid position.

    Scale k uses window size round(model_window * scale_factor**k) and a
    stride of max(1, round(2 * scale_factor**k)) pixels, i.e. 2 px at base
    scale grown proportionally; scanning stops once the window no longer
    fits in the image.
    """
    if not scale_factor > 1.0:
        raise ValueError("scale_factor must be > 1.0")
    base = min(model.window_w, model.window_h)
    if min_size is None:
        min_size = base
    if min_size < base:
        raise ValueError("min_size must be at least the model window size")
    ii = build_integral(image)
    hits: list[Rect] = []
    k = 0
    while True:
        scale = scale_factor**k
        win_w = round(model.window_w * scale)
        win_h = round(model.window_h * scale)
        if win_w > image.width or win_h > image.height:
            break
        if min(win_w, win_h) >= min_size:
            stride = max(1, round(2 * scale))
            hits.extend(_scan_one_scale(model, ii, win_w, win_h, stride))
        k += 1
    return hits


def _similar(a: Rect, b: Rect) -> bool:
    # Similar sizes, plus top-left corners within 20% of the smaller width.
    dw = 0.2 * min(a.w, b.w)
    return (
        abs(a.w - b.w) <= dw
        and abs(a.h - b.h) <= 0.2 * min(a.h, b.h)
        and abs(a.x - b.x) <= dw
        and abs(a.y - b.y) <= dw
    )


def group_detections(raw: list[Rect], min_neighbors: int) -> list[Detection]:
    """Merge similar raw hits into detections.

    Similarity (see _similar) is closed transitively into equivalence
    classes; each class of size >= max(1, min_neighbors) emits one
    Detection at the component-wise mean rect (half-up rounding) with
    neighbor_count = class size. Output is sorted by descending
    neighbor_count, then ascending (y, x).
    """
    if not raw:
        return []
    n = len(raw)
    xs = np.array([r.x for r in raw], dtype=np.float64)
    ys = np.array([r.y for r in raw], dtype=np.float64)
    ws = np.array([r.w for r in raw], dtype=np.float64)
    hs = np.array([r.h for r in raw], dtype=np.float64)

    visited = np.zeros(n, dtype=bool)
    need = max(1, min_neighbors)
    detections = []
    for seed in range(n):
        if visited[seed]:
            continue
        members = []
        frontier = [seed]
        visited[seed] = True
        while frontier:
            i = frontier.pop()
            members.append(i)
            dw = 0.2 * np.minimum(ws, ws[i])
            adj = (
                ~visited
                & (np.abs(ws - ws[i]) <= dw)
                & (np.abs(hs - hs[i]) <= 0.2 * np.minimum(hs, hs[i]))
                & (np.abs(xs - xs[i]) <= dw)
                & (np.abs(ys - ys[i]) <= dw)
            )
            nxt = np.nonzero(adj)[0]
            visited[nxt] = True
            frontier.extend(int(j) for j in nxt)
        if len(members) < need:
            continue
        idx = np.array(members)
        rect = Rect(
            int(math.floor(xs[idx].mean() + 0.5)),
            int(math.floor(ys[idx].mean() + 0.5)),
            int(math.floor(ws[idx].mean() + 0.5)),
            int(math.floor(hs[idx].mean() + 0.5)),
        )
        detections.append(Detection(rect=rect, neighbor_count=len(members)))
    detections.sort(key=lambda d: (-d.neighbor_count, d.rect.y, d.rect.x))
    return detections


def detect_multiscale(
    model: CascadeModel,
    image: GrayImage,
    scale_factor: float = 1.1,
    min_neighbors: int = 3,
    min_size: int | None = None,
) -> list[Detection]:
    """Multi-scale detection: scan_windows raw hits grouped and filtered.

    min_neighbors == 0 disables grouping entirely: every raw hit comes
    back as its own Detection with neighbor_count 1.
    """
    hits = scan_windows(model, image, scale_factor=scale_factor, min_size=min_size)
    if min_neighbors == 0:
        out = [Detection(rect=r, neighbor_count=1) for r in hits]
        out.sort(key=lambda d: (-d.neighbor_count, d.rect.y, d.rect.x))
        return out
    return group_detections(hits, min_neighbors)
