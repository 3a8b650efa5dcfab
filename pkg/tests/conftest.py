from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from excalc.dsl import parse


def data_text(name: str) -> str:
    return resources.files("excalc").joinpath("data", name).read_text()


@pytest.fixture()
def nat_deco():
    return parse(data_text("nat.deco"), "nat.deco")


@pytest.fixture()
def nat_basic():
    return parse(data_text("nat.basic"), "nat.basic")


@pytest.fixture()
def mnat_text():
    return data_text("mnat.model")
