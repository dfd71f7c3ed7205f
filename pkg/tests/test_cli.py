"""End-to-end CLI runs: every subcommand through main(), no subprocesses."""

import numpy as np
import pytest

import faces
from humatch import cli
from humatch.gallery import enroll, load_gallery, new_gallery, save_gallery
from humatch.image import GrayImage, Rect, load_pgm, save_pgm
from humatch.pipeline import BENCH_HEADER, DEFAULT_CONFIG, signature_for_box
from humatch.segmentation import LABEL_ORDER, RegionLabel

CARD_RECT = Rect(faces.CARD_XY[0], faces.CARD_XY[1], faces.CARD, faces.CARD)


@pytest.fixture(scope="module")
def work(tmp_path_factory, ring_cascade_path):
    """Scene images, a five-subject gallery file, and a config file."""
    root = tmp_path_factory.mktemp("cli")
    images = {}
    for name in faces.SUBJECTS + (faces.UNKNOWN,):
        path = root / f"{name}.pgm"
        save_pgm(faces.compose_face(name), path)
        images[name] = path

    shifted = root / "crag_shifted.pgm"
    save_pgm(faces.compose_face("crag", dx=13, dy=7), shifted)
    images["crag_shifted"] = shifted

    lip_only = root / "lip_only.pgm"
    save_pgm(faces.compose_face("crag", slots={RegionLabel.LIP}), lip_only)
    images["lip_only"] = lip_only

    no_blobs = root / "no_blobs.pgm"
    save_pgm(faces.compose_face("crag", slots=set()), no_blobs)
    images["no_blobs"] = no_blobs

    blank = root / "blank.pgm"
    save_pgm(GrayImage(np.full((400, 400), 200, dtype=np.uint8)), blank)
    images["blank"] = blank

    gallery = new_gallery()
    for name in faces.SUBJECTS:
        img = load_pgm(images[name])
        _, _, sig = signature_for_box(img, CARD_RECT, DEFAULT_CONFIG)
        gallery = enroll(gallery, name, sig)
    gallery_path = root / "gallery.txt"
    save_gallery(gallery, gallery_path)

    config_path = root / "humatch.cfg"
    config_path.write_text(
        "# scene-sized scan\n"
        f"cascade_path = {ring_cascade_path}\n"
        f"min_face_size = {faces.MIN_FACE}\n"
    )
    return {"root": root, "images": images, "gallery": str(gallery_path), "config": str(config_path)}


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------- detect


def test_detect_prints_boxes(work, capsys):
    code, out, err = run(capsys, "detect", str(work["images"]["crag"]), "--config", work["config"])
    assert code == cli.EXIT_OK
    assert err == ""
    lines = out.splitlines()
    assert lines
    x, y, w, h, neighbors = map(int, lines[0].split())
    # top detection covers the card centre
    assert x <= 200 <= x + w and y <= 200 <= y + h
    assert w >= faces.MIN_FACE and neighbors >= DEFAULT_CONFIG.min_neighbors


def test_detect_annotate_burns_borders(work, capsys, tmp_path):
    annotated = tmp_path / "boxes.pgm"
    code, out, _ = run(
        capsys, "detect", str(work["images"]["crag"]),
        "--config", work["config"], "--annotate", str(annotated),
    )
    assert code == cli.EXIT_OK
    x, y, w, h, _ = map(int, out.splitlines()[0].split())
    px = load_pgm(annotated).pixels
    assert (px[y, x : x + w] == 255).all()
    assert (px[y + h - 1, x : x + w] == 255).all()
    assert (px[y : y + h, x] == 255).all()


def test_detect_blank_image_exit_2(work, capsys):
    code, out, _ = run(capsys, "detect", str(work["images"]["blank"]), "--config", work["config"])
    assert code == cli.EXIT_NO_FACE
    assert out == ""


def test_detect_without_cascade_is_config_error(work, capsys):
    code, _, err = run(capsys, "detect", str(work["images"]["crag"]))
    assert code == cli.EXIT_ERROR
    assert "humatch: error:" in err


def test_detect_missing_image_exit_1(work, capsys):
    code, _, err = run(capsys, "detect", str(work["root"] / "nope.pgm"), "--config", work["config"])
    assert code == cli.EXIT_ERROR
    assert "humatch: error:" in err


# ---------------------------------------------------------------- segment


def test_segment_explicit_rect(work, capsys):
    code, out, _ = run(
        capsys, "segment", str(work["images"]["crag"]),
        "--rect", "80", "80", "240", "240",
    )
    assert code == cli.EXIT_OK
    lines = out.splitlines()
    assert lines[0].startswith("threshold ")
    assert int(lines[0].split()[1]) in range(256)
    labels = [line.split()[0] for line in lines[1:]]
    assert labels == [lab.value for lab in LABEL_ORDER]
    for line in lines[1:]:
        tokens = line.split()
        assert len(tokens) == 20  # label, area, bbox x/y/w/h, 7 hu, 7 log
        assert all(float(t) is not None for t in tokens[1:])


def test_segment_mask_output(work, capsys, tmp_path):
    mask_path = tmp_path / "mask.pgm"
    code, _, _ = run(
        capsys, "segment", str(work["images"]["crag"]),
        "--rect", "80", "80", "240", "240", "--mask", str(mask_path),
    )
    assert code == cli.EXIT_OK
    mask = load_pgm(mask_path)
    assert (mask.width, mask.height) == (240, 240)
    assert set(np.unique(mask.pixels)) == {0, 50, 100, 150, 200, 250}


def test_segment_rect_out_of_bounds(work, capsys):
    code, _, err = run(
        capsys, "segment", str(work["images"]["crag"]),
        "--rect", "380", "380", "100", "100",
    )
    assert code == cli.EXIT_ERROR
    assert "outside" in err


def test_segment_autodetect_no_face(work, capsys):
    code, _, _ = run(capsys, "segment", str(work["images"]["blank"]), "--config", work["config"])
    assert code == cli.EXIT_NO_FACE


# ---------------------------------------------------------------- enroll


def test_enroll_flow(work, capsys, tmp_path):
    gallery_path = tmp_path / "g.txt"
    code, out, _ = run(
        capsys, "enroll", str(work["images"]["crag"]), "crag",
        "--gallery", str(gallery_path), "--config", work["config"],
    )
    assert code == cli.EXIT_OK
    assert out.strip() == "regions_used 5"
    assert len(load_gallery(gallery_path)) == 1

    # same id again: refused without --replace
    code, _, err = run(
        capsys, "enroll", str(work["images"]["crag_shifted"]), "crag",
        "--gallery", str(gallery_path), "--config", work["config"],
    )
    assert code == cli.EXIT_DUPLICATE
    assert "crag" in err

    code, out, _ = run(
        capsys, "enroll", str(work["images"]["crag_shifted"]), "crag",
        "--gallery", str(gallery_path), "--config", work["config"], "--replace",
    )
    assert code == cli.EXIT_OK
    assert len(load_gallery(gallery_path)) == 1


def test_enroll_empty_signature_exit_3(work, capsys, tmp_path):
    # the blob-less card detects fine but yields no usable regions
    code, _, _ = run(
        capsys, "enroll", str(work["images"]["no_blobs"]), "ghost",
        "--gallery", str(tmp_path / "g.txt"), "--config", work["config"],
    )
    assert code == cli.EXIT_EMPTY_SIGNATURE


def test_enroll_no_face_exit_2(work, capsys, tmp_path):
    code, _, _ = run(
        capsys, "enroll", str(work["images"]["blank"]), "nobody",
        "--gallery", str(tmp_path / "g.txt"), "--config", work["config"],
    )
    assert code == cli.EXIT_NO_FACE


# ---------------------------------------------------------------- identify


def parse_kv(out):
    pairs = {}
    for line in out.splitlines():
        key, _, value = line.partition(" ")
        pairs.setdefault(key, []).append(value)
    return pairs


def test_identify_match(work, capsys):
    code, out, _ = run(
        capsys, "identify", str(work["images"]["crag_shifted"]),
        "--gallery", work["gallery"], "--config", work["config"],
    )
    assert code == cli.EXIT_OK
    kv = parse_kv(out)
    assert kv["verdict"] == ["Match"]
    assert kv["subject"] == ["crag"]
    assert float(kv["distance"][0]) < 1e-9
    assert kv["regions_used"] == ["5"]
    assert float(kv["detect_s"][0]) >= 0.0
    assert float(kv["total_s"][0]) >= float(kv["detect_s"][0])
    # full effective config echoed, one key=value per line
    assert len(kv["config"]) == 15
    assert f"min_face_size={faces.MIN_FACE}" in kv["config"]


def test_identify_unknown_exit_6(work, capsys):
    code, out, _ = run(
        capsys, "identify", str(work["images"]["boot"]),
        "--gallery", work["gallery"], "--config", work["config"],
    )
    assert code == cli.EXIT_UNKNOWN
    kv = parse_kv(out)
    assert kv["verdict"] == ["Unknown"]
    # the rejected nearest candidate is still echoed alongside its distance
    assert kv["subject"][0] in faces.SUBJECTS
    assert float(kv["distance"][0]) > DEFAULT_CONFIG.tau


def test_identify_insufficient_exit_5(work, capsys):
    code, out, _ = run(
        capsys, "identify", str(work["images"]["lip_only"]),
        "--gallery", work["gallery"], "--config", work["config"],
    )
    assert code == cli.EXIT_INSUFFICIENT
    assert parse_kv(out)["verdict"] == ["InsufficientRegions"]


def test_identify_no_face(work, capsys):
    code, out, _ = run(
        capsys, "identify", str(work["images"]["blank"]),
        "--gallery", work["gallery"], "--config", work["config"],
    )
    assert code == cli.EXIT_NO_FACE
    assert "verdict NoFace" in out


def test_identify_empty_gallery_exit_1(work, capsys, tmp_path):
    empty = tmp_path / "g.txt"
    save_gallery(new_gallery(), empty)
    code, _, err = run(
        capsys, "identify", str(work["images"]["crag"]),
        "--gallery", str(empty), "--config", work["config"],
    )
    assert code == cli.EXIT_ERROR
    assert "empty" in err


def test_identify_config_override_echoed(work, capsys):
    code, out, _ = run(
        capsys, "identify", str(work["images"]["crag"]),
        "--gallery", work["gallery"], "--config", work["config"], "--tau", "0.5",
    )
    assert code == cli.EXIT_OK
    assert "tau=0.5" in parse_kv(out)["config"]


# ---------------------------------------------------------------- bench


@pytest.fixture(scope="module")
def corpus(work, tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    save_pgm(faces.compose_face("crag"), root / "crag__1.pgm")
    save_pgm(faces.compose_face("comb", dx=-19, dy=11), root / "comb__1.pgm")
    save_pgm(faces.compose_face("boot"), root / "boot__1.pgm")
    save_pgm(GrayImage(np.full((400, 400), 200, dtype=np.uint8)), root / "empty__1.pgm")
    return root


def test_bench_table_and_report(work, corpus, capsys, tmp_path):
    report_path = tmp_path / "bench.txt"
    code, out, _ = run(
        capsys, "bench", str(corpus), "--gallery", work["gallery"],
        "--config", work["config"], "--report", str(report_path),
    )
    assert code == cli.EXIT_OK
    assert "trials   4" in out
    assert "errors   2" in out  # boot is Unknown, empty is NoFace
    assert "accuracy 50.0%" in out

    lines = report_path.read_text().splitlines()
    assert lines[0] == BENCH_HEADER
    config_lines = [l for l in lines if l.startswith("# config ")]
    assert len(config_lines) == 15
    trial_lines = [l for l in lines if not l.startswith("#") and l != BENCH_HEADER]
    assert len(trial_lines) == 4
    # rows sorted by filename; fields: file expected verdict matched ...
    assert [l.split()[0] for l in trial_lines] == sorted(l.split()[0] for l in trial_lines)
    by_file = {l.split()[0]: l.split() for l in trial_lines}
    assert by_file["crag__1.pgm"][2] == "Match" and by_file["crag__1.pgm"][3] == "crag"
    assert by_file["boot__1.pgm"][2] == "Unknown"
    assert by_file["empty__1.pgm"][2] == "NoFace"
    assert lines[-1].startswith("# summary total=4 errors=2 accuracy=50.0")


def test_bench_empty_corpus_exit_1(work, capsys, tmp_path):
    code, _, err = run(
        capsys, "bench", str(tmp_path), "--gallery", work["gallery"], "--config", work["config"],
    )
    assert code == cli.EXIT_ERROR
    assert "empty corpus" in err


def test_bench_bad_corpus_filename_exit_1(work, capsys, tmp_path):
    save_pgm(faces.compose_face("crag"), tmp_path / "crag.pgm")
    code, _, err = run(
        capsys, "bench", str(tmp_path), "--gallery", work["gallery"], "--config", work["config"],
    )
    assert code == cli.EXIT_ERROR
    assert "not named" in err


# ---------------------------------------------------------------- config plumbing


def test_unknown_config_key_exit_1(work, capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("window_size = 3\n")
    code, _, err = run(capsys, "detect", str(work["images"]["crag"]), "--config", str(bad))
    assert code == cli.EXIT_ERROR
    assert "unknown config key" in err


def test_cli_override_beats_config_file(work, capsys):
    # forcing the minimum window above the frame size kills all detections
    code, _, _ = run(
        capsys, "detect", str(work["images"]["crag"]),
        "--config", work["config"], "--min-face-size", "500",
    )
    assert code == cli.EXIT_NO_FACE
