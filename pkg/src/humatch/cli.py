"""Command-line interface.

Five subcommands: detect, segment, enroll, identify, bench. Shared exit
codes: 0 success, 1 I/O or config errors, 2 no face detected. Command
specific: enroll uses 3 (empty signature) and 4 (duplicate subject without
--replace); identify uses 5 (InsufficientRegions) and 6 (Unknown).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cascade import CascadeFormatError, CascadeModel, Detection, parse_cascade
from .gallery import (
    DuplicateSubjectError,
    EmptySignatureError,
    GalleryFormatError,
    enroll,
    load_gallery,
    new_gallery,
    save_gallery,
)
from .image import GrayImage, PgmFormatError, Rect, load_pgm, save_pgm
from .matching import Verdict
from .pipeline import (
    ConfigError,
    DEFAULT_CONFIG,
    PipelineConfig,
    config_from_mapping,
    detect_faces,
    effective_config_lines,
    format_bench_machine,
    format_bench_table,
    load_config_file,
    run_bench,
    run_identify,
    signature_for_box,
)
from .segmentation import render_region_mask

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_FACE = 2
EXIT_EMPTY_SIGNATURE = 3
EXIT_DUPLICATE = 4
EXIT_INSUFFICIENT = 5
EXIT_UNKNOWN = 6

_OVERRIDE_DESTS = {
    "cascade": "cascade_path",
    "scale_factor": "scale_factor",
    "min_neighbors": "min_neighbors",
    "min_face_size": "min_face_size",
    "k_min": "k_min",
    "tau": "tau",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key=value config file")
    common.add_argument("--cascade", metavar="FILE", help="cascade XML path")
    common.add_argument("--scale-factor", type=float, dest="scale_factor")
    common.add_argument("--min-neighbors", type=int, dest="min_neighbors")
    common.add_argument("--min-face-size", type=int, dest="min_face_size")
    common.add_argument("--k-min", type=int, dest="k_min")
    common.add_argument("--tau", type=float, dest="tau")

    parser = argparse.ArgumentParser(
        prog="humatch",
        description="Face identification from per-region shape invariants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="list detected face boxes")
    p.add_argument("image")
    p.add_argument("--annotate", metavar="FILE", help="write frame with boxes burned in")

    p = sub.add_parser("segment", parents=[common], help="list feature regions of one face")
    p.add_argument("image")
    p.add_argument("--rect", nargs=4, type=int, metavar=("X", "Y", "W", "H"),
                   help="explicit face box (skips detection)")
    p.add_argument("--mask", metavar="FILE", help="write labeled region mask PGM")

    p = sub.add_parser("enroll", parents=[common], help="add a subject to the gallery")
    p.add_argument("image")
    p.add_argument("subject_id")
    p.add_argument("--gallery", metavar="FILE", required=True)
    p.add_argument("--replace", action="store_true")

    p = sub.add_parser("identify", parents=[common], help="match a probe against the gallery")
    p.add_argument("image")
    p.add_argument("--gallery", metavar="FILE", required=True)

    p = sub.add_parser("bench", parents=[common], help="run the benchmark corpus")
    p.add_argument("corpus")
    p.add_argument("--gallery", metavar="FILE", required=True)
    p.add_argument("--report", metavar="FILE", help="write machine-readable report")
    return parser


def _resolve_config(args) -> PipelineConfig:
    mapping = {}
    if args.config:
        mapping.update(load_config_file(args.config))
    for attr, key in _OVERRIDE_DESTS.items():
        value = getattr(args, attr, None)
        if value is not None:
            mapping[key] = value
    return config_from_mapping(mapping)


def _load_model(config: PipelineConfig) -> CascadeModel:
    if not config.cascade_path:
        raise ConfigError("no cascade configured (use --cascade or cascade_path=)")
    return parse_cascade(config.cascade_path)


def _burn_boxes(image: GrayImage, detections: list[Detection]) -> GrayImage:
    canvas = image.pixels.copy()
    for det in detections:
        r = det.rect
        x1, y1 = r.x + r.w - 1, r.y + r.h - 1
        canvas[r.y, r.x : x1 + 1] = 255
        canvas[y1, r.x : x1 + 1] = 255
        canvas[r.y : y1 + 1, r.x] = 255
        canvas[r.y : y1 + 1, x1] = 255
    return GrayImage(canvas)


def _cmd_detect(args) -> int:
    config = _resolve_config(args)
    model = _load_model(config)
    image = load_pgm(args.image)
    detections = detect_faces(model, image, config)
    for det in detections:
        r = det.rect
        print(f"{r.x} {r.y} {r.w} {r.h} {det.neighbor_count}")
    if args.annotate:
        save_pgm(_burn_boxes(image, detections), args.annotate)
    return EXIT_OK if detections else EXIT_NO_FACE


def _region_line(label_value: str, comp, feat) -> str:
    b = comp.bbox
    hu = " ".join(repr(v) for v in feat.hu)
    hu_log = " ".join(repr(v) for v in feat.hu_log)
    return f"{label_value} {comp.area} {b.x} {b.y} {b.w} {b.h} {hu} {hu_log}"


def _cmd_segment(args) -> int:
    config = _resolve_config(args)
    image = load_pgm(args.image)
    if args.rect is not None:
        box = Rect(*args.rect)
        if not box.inside(image.width, image.height):
            raise ValueError(f"face rect {box} outside {image.width}x{image.height} image")
    else:
        detections = detect_faces(_load_model(config), image, config)
        if not detections:
            return EXIT_NO_FACE
        box = detections[0].rect
    threshold, regions, signature = signature_for_box(image, box, config)
    print(f"threshold {threshold}")
    for label, comp in regions.regions.items():
        print(_region_line(label.value, comp, signature.regions[label]))
    if args.mask:
        save_pgm(render_region_mask(regions), args.mask)
    return EXIT_OK


def _cmd_enroll(args) -> int:
    config = _resolve_config(args)
    model = _load_model(config)
    image = load_pgm(args.image)
    detections = detect_faces(model, image, config)
    if not detections:
        return EXIT_NO_FACE
    _, _, signature = signature_for_box(image, detections[0].rect, config)
    gallery_path = Path(args.gallery)
    gallery = load_gallery(gallery_path) if gallery_path.exists() else new_gallery()
    try:
        gallery = enroll(gallery, args.subject_id, signature, replace=args.replace)
    except EmptySignatureError as exc:
        print(exc, file=sys.stderr)
        return EXIT_EMPTY_SIGNATURE
    except DuplicateSubjectError as exc:
        print(exc, file=sys.stderr)
        return EXIT_DUPLICATE
    save_gallery(gallery, gallery_path)
    print(f"regions_used {len(signature.regions)}")
    return EXIT_OK


def _cmd_identify(args) -> int:
    config = _resolve_config(args)
    model = _load_model(config)
    image = load_pgm(args.image)
    gallery = load_gallery(args.gallery)
    if not gallery.subjects:
        raise ValueError(f"gallery {args.gallery} is empty")
    timed = run_identify(model, image, gallery, config)
    if timed.result is None:
        print("verdict NoFace")
        return EXIT_NO_FACE
    res = timed.result
    print(f"verdict {res.verdict.value}")
    print(f"subject {res.subject_id or '-'}")
    print(f"distance {repr(res.distance)}")
    print(f"regions_used {res.regions_used}")
    print(f"detect_s {timed.detect_seconds:.4f}")
    print(f"total_s {timed.total_seconds:.4f}")
    for kv in effective_config_lines(config):
        print(f"config {kv}")
    if res.verdict is Verdict.MATCH:
        return EXIT_OK
    if res.verdict is Verdict.INSUFFICIENT_REGIONS:
        return EXIT_INSUFFICIENT
    return EXIT_UNKNOWN


def _cmd_bench(args) -> int:
    config = _resolve_config(args)
    model = _load_model(config)
    gallery = load_gallery(args.gallery)
    if not gallery.subjects:
        raise ValueError(f"gallery {args.gallery} is empty")
    report = run_bench(model, args.corpus, gallery, config, loader=load_pgm)
    print(format_bench_table(report), end="")
    if args.report:
        Path(args.report).write_text(format_bench_machine(report), encoding="utf-8")
    return EXIT_OK


_COMMANDS = {
    "detect": _cmd_detect,
    "segment": _cmd_segment,
    "enroll": _cmd_enroll,
    "identify": _cmd_identify,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (
        ConfigError,
        PgmFormatError,
        CascadeFormatError,
        GalleryFormatError,
        ValueError,
        OSError,
    ) as exc:
        print(f"humatch: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
