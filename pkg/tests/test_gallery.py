"""Gallery file format: save/load round-trips and corruption handling."""

import json
import math
import random

import pytest

from humatch.gallery import (
    GALLERY_HEADER,
    DuplicateSubjectError,
    EmptySignatureError,
    Gallery,
    GalleryFormatError,
    enroll,
    load_gallery,
    new_gallery,
    save_gallery,
)
from humatch.matching import FaceSignature, RegionFeature
from humatch.moments import HuVector, log_scale
from humatch.segmentation import LABEL_ORDER, RegionLabel

# Reference sample shipped with the suite: five regions, seven values each.
SAMPLE_HU = {
    RegionLabel.LEFT_EYEBROW: (0.309422, 0.068286, 0.001145, 0.000133, -3.00773, -2.0013, 4.905664),
    RegionLabel.RIGHT_EYEBROW: (0.27892, 0.049427, 0.00178, 0.000161, -6.61529, -3.10648, -5.41296),
    RegionLabel.LEFT_EYE: (0.46138, 0.181526, 0.005953, 0.001035, -5.46412, -7.25124, 2.363238),
    RegionLabel.RIGHT_EYE: (0.396682, 0.124126, 0.005539, 0.00072, -4.47711, -0.00014, 1.379213),
    RegionLabel.LIP: (0.414793, 0.138669, 0.005166, 0.00088, -7.74619, -7.22877, -1.82417),
}


def feature(label, hu_values):
    hu = HuVector(hu_values)
    return RegionFeature(label=label, hu=hu, hu_log=HuVector(log_scale(hu)))


def sample_signature():
    return FaceSignature(
        regions={lab: feature(lab, SAMPLE_HU[lab]) for lab in LABEL_ORDER}
    )


def rand_signature(rng, n_regions=None):
    labels = list(LABEL_ORDER)
    rng.shuffle(labels)
    if n_regions is None:
        n_regions = rng.randint(1, 5)
    regions = {}
    for lab in sorted(labels[:n_regions], key=lambda lb: lb.value):
        vals = []
        for _ in range(7):
            mag = 10.0 ** rng.uniform(-20, 1)
            vals.append(rng.choice((-1, 1)) * mag if rng.random() < 0.9 else 0.0)
        regions[lab] = feature(lab, tuple(vals))
    return FaceSignature(regions=regions)


# ---------------------------------------------------------------- save


def test_empty_gallery_is_header_only(tmp_path):
    path = tmp_path / "g.txt"
    save_gallery(new_gallery(), path)
    assert path.read_bytes() == (GALLERY_HEADER + "\n").encode()


def test_single_subject_single_line(tmp_path):
    g = enroll(new_gallery(), "alice", sample_signature())
    path = tmp_path / "g.txt"
    save_gallery(g, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    record = json.loads(lines[1])
    assert record["id"] == "alice"
    assert list(record["regions"]) == [lab.value for lab in LABEL_ORDER]
    assert load_gallery(path) == g


def test_sample_values_stored_verbatim(tmp_path):
    g = enroll(new_gallery(), "paper-fig2", sample_signature())
    path = tmp_path / "g.txt"
    save_gallery(g, path)
    text = path.read_text()
    assert "0.309422" in text  # left eyebrow, first value
    assert "-7.74619" in text  # lip, fifth value
    reloaded = load_gallery(path)
    feat = reloaded.subjects["paper-fig2"].regions[RegionLabel.LIP]
    assert feat.hu[4] == -7.74619


def test_round_trip_partial_signature(tmp_path):
    sig = FaceSignature(
        regions={RegionLabel.LIP: feature(RegionLabel.LIP, (1e-300, 0.1, 1 / 3, -0.25, 5e-324, 2.0, -1.0))}
    )
    g = enroll(new_gallery(), "bob", sig)
    save_gallery(g, tmp_path / "g.txt")
    assert load_gallery(tmp_path / "g.txt") == g


def test_round_trip_random_galleries(tmp_path):
    rng = random.Random(51)
    for i in range(20):
        g = new_gallery()
        for s in range(rng.randint(0, 6)):
            g = enroll(g, f"subject-{s}", rand_signature(rng))
        save_gallery(g, tmp_path / "g.txt")
        assert load_gallery(tmp_path / "g.txt") == g


# ---------------------------------------------------------------- load errors


def valid_two_subject_file(tmp_path):
    rng = random.Random(52)
    g = enroll(new_gallery(), "first", sample_signature())
    g = enroll(g, "second", rand_signature(rng, n_regions=3))
    path = tmp_path / "g.txt"
    save_gallery(g, path)
    return path


def test_load_bad_header(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("HUMATCH-GALLERY v2\n")
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.line_no == 1


def test_load_duplicate_subject(tmp_path):
    path = valid_two_subject_file(tmp_path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join([lines[0], lines[1], lines[1]]) + "\n")
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.kind == "duplicate-subject"
    assert exc.value.line_no == 3


def test_load_nan_value(tmp_path):
    path = valid_two_subject_file(tmp_path)
    text = path.read_text().replace("0.309422", "NaN", 1)
    path.write_text(text)
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.kind == "non-finite-value"
    assert exc.value.line_no == 2


def test_load_overflowing_literal(tmp_path):
    path = valid_two_subject_file(tmp_path)
    path.write_text(path.read_text().replace("0.309422", "1e999", 1))
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.kind == "non-finite-value"


def test_load_unparseable_json_line_number(tmp_path):
    path = valid_two_subject_file(tmp_path)
    lines = path.read_text().splitlines()
    lines[2] = lines[2][:-10]  # chop the record open
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.kind == "malformed-record"
    assert exc.value.line_no == 3


def test_load_fuzzed_single_field_corruptions(tmp_path):
    """Every single-field mutation that breaks an invariant is rejected."""
    path = valid_two_subject_file(tmp_path)
    good = path.read_text().splitlines()
    record = json.loads(good[1])

    def rewrite(rec):
        path.write_text("\n".join([good[0], json.dumps(rec), good[2]]) + "\n")

    # six values instead of seven
    bad = json.loads(json.dumps(record))
    bad["regions"]["lip"]["hu"] = bad["regions"]["lip"]["hu"][:6]
    rewrite(bad)
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.kind == "malformed-record" and exc.value.line_no == 2

    # unknown region key
    bad = json.loads(json.dumps(record))
    bad["regions"]["nose"] = bad["regions"].pop("lip")
    rewrite(bad)
    with pytest.raises(GalleryFormatError) as exc:
        load_gallery(path)
    assert exc.value.kind == "malformed-record"

    # non-number in the list
    bad = json.loads(json.dumps(record))
    bad["regions"]["lip"]["hu_log"][3] = "high"
    rewrite(bad)
    with pytest.raises(GalleryFormatError):
        load_gallery(path)

    # missing hu_log entirely
    bad = json.loads(json.dumps(record))
    del bad["regions"]["lip"]["hu_log"]
    rewrite(bad)
    with pytest.raises(GalleryFormatError):
        load_gallery(path)

    # numeric id
    bad = json.loads(json.dumps(record))
    bad["id"] = 17
    rewrite(bad)
    with pytest.raises(GalleryFormatError):
        load_gallery(path)

    # boolean smuggled in as a value
    bad = json.loads(json.dumps(record))
    bad["regions"]["lip"]["hu"][0] = True
    rewrite(bad)
    with pytest.raises(GalleryFormatError):
        load_gallery(path)

    # the untouched file still loads
    path.write_text("\n".join(good) + "\n")
    assert len(load_gallery(path)) == 2


# ---------------------------------------------------------------- enroll


def test_enroll_into_empty():
    g = enroll(new_gallery(), "alice", sample_signature())
    assert len(g) == 1
    assert "alice" in g


def test_enroll_duplicate_rejected():
    g = enroll(new_gallery(), "alice", sample_signature())
    with pytest.raises(DuplicateSubjectError):
        enroll(g, "alice", sample_signature())


def test_enroll_replace():
    rng = random.Random(53)
    g = enroll(new_gallery(), "alice", sample_signature())
    updated_sig = rand_signature(rng, n_regions=2)
    g2 = enroll(g, "alice", updated_sig, replace=True)
    assert len(g2) == 1
    assert g2.subjects["alice"] == updated_sig
    # original snapshot untouched
    assert g.subjects["alice"] == sample_signature()


def test_enroll_empty_signature_rejected():
    with pytest.raises(EmptySignatureError):
        enroll(new_gallery(), "alice", FaceSignature(regions={}))


def test_gallery_equality_ignores_metadata(tmp_path):
    g = enroll(new_gallery(), "a", sample_signature())
    save_gallery(g, tmp_path / "g.txt")
    reloaded = load_gallery(tmp_path / "g.txt")
    assert reloaded == g
    assert isinstance(reloaded, Gallery)
