import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import faces  # noqa: E402

from humatch.cascade import parse_cascade  # noqa: E402


@pytest.fixture(scope="session")
def toy_cascade_path(tmp_path_factory):
    return faces.write_toy_cascade(tmp_path_factory.mktemp("cascades") / "toy.xml")


@pytest.fixture(scope="session")
def ring_cascade_path(tmp_path_factory):
    return faces.write_ring_cascade(tmp_path_factory.mktemp("cascades") / "ring.xml")


@pytest.fixture(scope="session")
def toy_model(toy_cascade_path):
    return parse_cascade(toy_cascade_path)


@pytest.fixture(scope="session")
def ring_model(ring_cascade_path):
    return parse_cascade(ring_cascade_path)
