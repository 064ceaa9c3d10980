"""Shared fixtures: small viewing geometries and deterministic test rasters."""

import pytest

from foveal_iqa.geometry import derive_virtual_geometry

from .helpers import make_display, textured


@pytest.fixture
def make_geometry():
    """Factory for square virtual geometries: ``make_geometry(size, pitch_mm)``."""

    def factory(size: int, pitch_mm: float = 0.5):
        return derive_virtual_geometry(make_display(size, pitch_mm))

    return factory


@pytest.fixture
def small_display():
    """64x64 viewport whose zones Z1..Z5 are all populated."""
    return make_display(64, 0.5)


@pytest.fixture
def small_geometry(small_display):
    return derive_virtual_geometry(small_display)


@pytest.fixture
def medium_geometry():
    """192x192 viewport, large enough for five-scale MS-SSIM."""
    return derive_virtual_geometry(make_display(192, 0.25))


@pytest.fixture
def texture64():
    return textured((64, 64), seed=1)
