"""Shared helpers: random images and commands for the process test doubles."""

import os
import sys
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from flowdeblur import Image

DOUBLES = Path(__file__).parent / "doubles"
ROOT = Path(__file__).parent.parent


def double_command(name: str, *args: str) -> list[str]:
    """argv running ``tests/doubles/<name>.py`` with this interpreter."""
    return [sys.executable, str(DOUBLES / f"{name}.py"), *args]


def piecewise_constant(rng: np.random.Generator, width: int, height: int, blocks: int = 6) -> Image:
    """Random axis-aligned rectangles on a flat background; TV-friendly test content."""
    data = np.full((height, width), rng.uniform(0.2, 0.8))
    for _ in range(blocks):
        y0, x0 = rng.integers(0, height - 4), rng.integers(0, width - 4)
        h, w = rng.integers(4, height // 2 + 1), rng.integers(4, width // 2 + 1)
        data[y0 : y0 + h, x0 : x0 + w] = rng.uniform(0.0, 1.0)
    return Image(data[np.newaxis])


@pytest.fixture(autouse=True)
def _package_on_child_path(monkeypatch: pytest.MonkeyPatch) -> None:
    """Doubles import the frame codec from the package under test."""
    current = os.environ.get("PYTHONPATH")
    monkeypatch.setenv("PYTHONPATH", os.pathsep.join(filter(None, [str(ROOT), current])))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng: np.random.Generator) -> Callable[..., Image]:
    def make(width: int = 16, height: int = 12, channels: int = 1) -> Image:
        return Image(rng.uniform(0.0, 1.0, size=(channels, height, width)))

    return make
