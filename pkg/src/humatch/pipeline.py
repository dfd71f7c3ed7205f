"""End-to-end composition: configuration, per-image flows, benchmark runner.

Everything the CLI does is implemented here against plain values, so the
whole pipeline is drivable from tests without spawning a process. Config
is a flat key=value file merged with command-line overrides; the effective
config is echoed into every report so a result can be reproduced from its
own output.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path

from .cascade import CascadeModel, Detection, detect_multiscale
from .gallery import Gallery
from .image import GrayImage, Rect, crop
from .matching import FaceSignature, MatchResult, Verdict, build_signature, identify
from .segmentation import (
    FaceRegions,
    RegionBands,
    assign_regions,
    binarize,
    connected_components,
    histogram256,
    otsu_threshold,
)

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "DEFAULT_CONFIG",
    "CONFIG_KEYS",
    "load_config_file",
    "config_from_mapping",
    "effective_config_lines",
    "bands_of",
    "detect_faces",
    "segment_face",
    "signature_for_box",
    "TimedIdentify",
    "run_identify",
    "BenchTrial",
    "BenchReport",
    "run_bench",
    "format_bench_table",
    "format_bench_machine",
    "BENCH_HEADER",
]

BENCH_HEADER = "HUMATCH-BENCH v1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline, validated on construction."""

    cascade_path: str | None = None
    scale_factor: float = 1.1
    min_neighbors: int = 3
    min_face_size: int | None = None  # None: use the model window size
    brow_low: float = 0.15
    brow_high: float = 0.40
    eye_low: float = 0.30
    eye_high: float = 0.55
    lip_low: float = 0.60
    lip_high: float = 0.90
    area_floor: float = 0.002
    area_ceil: float = 0.15
    epsilon: float = 1e-30
    k_min: int = 3
    tau: float = 0.35

    def __post_init__(self):
        if not self.scale_factor > 1.0:
            raise ConfigError(f"scale_factor must be > 1.0, got {self.scale_factor}")
        if self.min_neighbors < 0:
            raise ConfigError(f"min_neighbors must be >= 0, got {self.min_neighbors}")
        if self.min_face_size is not None and self.min_face_size < 1:
            raise ConfigError(f"min_face_size must be >= 1, got {self.min_face_size}")
        for name in ("brow", "eye", "lip"):
            lo = getattr(self, f"{name}_low")
            hi = getattr(self, f"{name}_high")
            if not (0.0 <= lo < hi <= 1.0):
                raise ConfigError(f"{name} band [{lo}, {hi}] invalid")
        if not (0.0 <= self.area_floor < self.area_ceil <= 1.0):
            raise ConfigError(f"area window [{self.area_floor}, {self.area_ceil}] invalid")
        if not self.epsilon > 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.k_min < 1:
            raise ConfigError(f"k_min must be >= 1, got {self.k_min}")
        if self.tau < 0.0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")


DEFAULT_CONFIG = PipelineConfig()

_INT_KEYS = ("min_neighbors", "min_face_size", "k_min")
CONFIG_KEYS = (
    "cascade_path",
    "scale_factor",
    "min_neighbors",
    "min_face_size",
    "brow_low",
    "brow_high",
    "eye_low",
    "eye_high",
    "lip_low",
    "lip_high",
    "area_floor",
    "area_ceil",
    "epsilon",
    "k_min",
    "tau",
)


def _coerce(key: str, text: str):
    text = text.strip()
    if key == "cascade_path":
        return text or None
    if key == "min_face_size" and text.lower() in ("", "auto", "none"):
        return None
    try:
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def load_config_file(path) -> dict:
    """Parse a flat key=value file ('#' comments and blank lines allowed)."""
    mapping = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        mapping[key] = _coerce(key, value)
    return mapping


def config_from_mapping(mapping: dict, base: PipelineConfig = DEFAULT_CONFIG) -> PipelineConfig:
    unknown = set(mapping) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return replace(base, **mapping)


def effective_config_lines(config: PipelineConfig) -> list[str]:
    """key=value lines, sorted, suitable for echoing into reports."""
    out = []
    for key in sorted(CONFIG_KEYS):
        value = getattr(config, key)
        if value is None:
            value = "auto" if key == "min_face_size" else ""
        out.append(f"{key}={value}")
    return out


def bands_of(config: PipelineConfig) -> RegionBands:
    return RegionBands(
        brow_low=config.brow_low,
        brow_high=config.brow_high,
        eye_low=config.eye_low,
        eye_high=config.eye_high,
        lip_low=config.lip_low,
        lip_high=config.lip_high,
        area_floor=config.area_floor,
        area_ceil=config.area_ceil,
    )


def detect_faces(model: CascadeModel, image: GrayImage, config: PipelineConfig) -> list[Detection]:
    return detect_multiscale(
        model,
        image,
        scale_factor=config.scale_factor,
        min_neighbors=config.min_neighbors,
        min_size=config.min_face_size,
    )


def segment_face(
    image: GrayImage, face_box: Rect, config: PipelineConfig = DEFAULT_CONFIG
) -> tuple[int, FaceRegions]:
    """Otsu-binarize the face crop and assign components to region labels."""
    face = crop(image, face_box)
    threshold = otsu_threshold(histogram256(face))
    comps = connected_components(binarize(face, threshold))
    return threshold, assign_regions(comps, face_box, bands_of(config))


def signature_for_box(
    image: GrayImage, face_box: Rect, config: PipelineConfig = DEFAULT_CONFIG
) -> tuple[int, FaceRegions, FaceSignature]:
    threshold, regions = segment_face(image, face_box, config)
    return threshold, regions, build_signature(regions, epsilon=config.epsilon)


@dataclass(frozen=True)
class TimedIdentify:
    """Identify outcome plus the wall-clock split (detect vs. whole path)."""

    result: MatchResult | None  # None when no face was detected
    face: Detection | None
    regions_found: int
    detect_seconds: float
    total_seconds: float


def run_identify(
    model: CascadeModel, image: GrayImage, gallery: Gallery, config: PipelineConfig
) -> TimedIdentify:
    """Detect the best face, segment, and match against the gallery.

    The highest-neighbor-count detection is used when several faces appear.
    """
    t0 = time.perf_counter()
    detections = detect_faces(model, image, config)
    detect_seconds = time.perf_counter() - t0
    if not detections:
        return TimedIdentify(
            result=None,
            face=None,
            regions_found=0,
            detect_seconds=detect_seconds,
            total_seconds=time.perf_counter() - t0,
        )
    face = detections[0]
    _, regions, signature = signature_for_box(image, face.rect, config)
    result = identify(signature, gallery.subjects, k_min=config.k_min, tau=config.tau)
    return TimedIdentify(
        result=result,
        face=face,
        regions_found=len(regions.regions),
        detect_seconds=detect_seconds,
        total_seconds=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class BenchTrial:
    filename: str
    expected_id: str
    verdict: str  # Match | Unknown | InsufficientRegions | NoFace
    matched_id: str | None
    distance: float | None
    regions_used: int
    detect_seconds: float
    total_seconds: float

    @property
    def is_error(self) -> bool:
        return not (self.verdict == Verdict.MATCH.value and self.matched_id == self.expected_id)


@dataclass(frozen=True)
class BenchReport:
    trials: tuple[BenchTrial, ...]
    config: PipelineConfig

    @property
    def total_trials(self) -> int:
        return len(self.trials)

    @property
    def error_count(self) -> int:
        return sum(1 for t in self.trials if t.is_error)

    @property
    def accuracy_percent(self) -> float:
        return 100.0 * (self.total_trials - self.error_count) / self.total_trials

    @property
    def mean_detect_seconds(self) -> float:
        return sum(t.detect_seconds for t in self.trials) / self.total_trials

    @property
    def mean_recognize_seconds(self) -> float:
        return sum(t.total_seconds for t in self.trials) / self.total_trials


def expected_subject(filename: str) -> str:
    """Subject id encoded in a corpus filename `<subject_id>__<n>.pgm`."""
    stem = Path(filename).stem
    subject, sep, _ = stem.rpartition("__")
    if not sep or not subject:
        raise ValueError(f"corpus file {filename!r} not named <subject_id>__<n>.pgm")
    return subject


def run_bench(
    model: CascadeModel, corpus_dir, gallery: Gallery, config: PipelineConfig, loader
) -> BenchReport:
    """One identify trial per corpus image, rows sorted by filename.

    A trial errs unless the verdict is Match on the filename's subject;
    images where no face is detected are counted as errors too (the
    detection-failure class). ``loader`` maps a path to a GrayImage.
    """
    paths = sorted(Path(corpus_dir).glob("*.pgm"), key=lambda p: p.name)
    if not paths:
        raise ValueError(f"empty corpus: no .pgm files in {corpus_dir}")
    trials = []
    for path in paths:
        expected = expected_subject(path.name)
        timed = run_identify(model, loader(path), gallery, config)
        if timed.result is None:
            trials.append(
                BenchTrial(
                    filename=path.name,
                    expected_id=expected,
                    verdict="NoFace",
                    matched_id=None,
                    distance=None,
                    regions_used=0,
                    detect_seconds=timed.detect_seconds,
                    total_seconds=timed.total_seconds,
                )
            )
            continue
        res = timed.result
        trials.append(
            BenchTrial(
                filename=path.name,
                expected_id=expected,
                verdict=res.verdict.value,
                matched_id=res.subject_id,
                distance=res.distance,
                regions_used=res.regions_used,
                detect_seconds=timed.detect_seconds,
                total_seconds=timed.total_seconds,
            )
        )
    return BenchReport(trials=tuple(trials), config=config)


def _fmt_distance(d: float | None) -> str:
    if d is None:
        return "-"
    return repr(d) if d != float("inf") else "inf"


def format_bench_machine(report: BenchReport) -> str:
    """Line-oriented report: header, '#'-prefixed config echo, trial rows."""
    lines = [BENCH_HEADER]
    lines.extend(f"# config {kv}" for kv in effective_config_lines(report.config))
    for t in report.trials:
        lines.append(
            f"{t.filename} {t.expected_id} {t.verdict} {t.matched_id or '-'} "
            f"{_fmt_distance(t.distance)} {t.regions_used} "
            f"{t.detect_seconds:.4f} {t.total_seconds:.4f}"
        )
    lines.append(
        f"# summary total={report.total_trials} errors={report.error_count} "
        f"accuracy={report.accuracy_percent:.1f} "
        f"mean_detect_s={report.mean_detect_seconds:.4f} "
        f"mean_total_s={report.mean_recognize_seconds:.4f}"
    )
    return "\n".join(lines) + "\n"


def format_bench_table(report: BenchReport) -> str:
    """Human-facing aligned table plus the summary and config echo."""
    headers = ("file", "expected", "verdict", "matched", "distance", "regions", "detect_s", "total_s")
    rows = [
        (
            t.filename,
            t.expected_id,
            t.verdict,
            t.matched_id or "-",
            "-" if t.distance is None else f"{t.distance:.6f}",
            str(t.regions_used),
            f"{t.detect_seconds:.4f}",
            f"{t.total_seconds:.4f}",
        )
        for t in report.trials
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*headers)]
    lines.extend(fmt.format(*row) for row in rows)
    lines.append("")
    lines.append(f"trials   {report.total_trials}")
    lines.append(f"errors   {report.error_count}")
    lines.append(f"accuracy {report.accuracy_percent:.1f}%")
    lines.append(f"mean detect_s {report.mean_detect_seconds:.4f}")
    lines.append(f"mean total_s  {report.mean_recognize_seconds:.4f}")
    lines.append("")
    lines.extend(f"config {kv}" for kv in effective_config_lines(report.config))
    return "\n".join(lines) + "\n"
