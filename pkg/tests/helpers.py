"""Builders for small viewing geometries and deterministic test rasters."""

import math

import numpy as np
from scipy import ndimage

from foveal_iqa.evaluation import LogisticParams, logistic5, zwf_values
from foveal_iqa.geometry import DisplayGeometry
from foveal_iqa.projection import ViewportSpec
from foveal_iqa.raster_io import EquirectImage
from foveal_iqa.stimulus import PATTERNS
from foveal_iqa.zwf import ZoneMseVector


def make_display(size: int, pitch_mm: float) -> DisplayGeometry:
    """Gear VR optics with a square ``size`` px viewport of the given pixel pitch."""
    return DisplayGeometry(
        focal_length=62.0,
        lens_to_display=25.0,
        lens_to_eye=10.0,
        viewport_width_px=size,
        viewport_height_px=size,
        viewport_width_mm=size * pitch_mm,
        viewport_height_mm=size * pitch_mm,
    )


def textured(shape, seed: int = 0, smooth: float = 1.0) -> np.ndarray:
    """Smoothed random 8-bit texture spanning most of the value range."""
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.uniform(0, 255, shape), smooth)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return np.rint(20 + 215 * noise).astype(np.uint8)


def smooth_equirect(width: int = 128, seed: int = 3) -> EquirectImage:
    """Equirect image made of a few low-order harmonics, periodic in longitude."""
    height = width // 2
    rng = np.random.default_rng(seed)
    lon = np.linspace(0, 2 * np.pi, width, endpoint=False)[None, :]
    lat = np.linspace(0, np.pi, height)[:, None]
    values = np.full((height, width), 128.0)
    for _ in range(4):
        kx, ky = rng.integers(1, 4, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        values += 25 * np.sin(kx * lon + phase) * np.cos(ky * lat)
    return EquirectImage(np.rint(values).astype(np.uint8))


def oracle_pixel(img: EquirectImage, spec: ViewportSpec, row: int, col: int) -> float:
    """Sample one viewport pixel with explicit rotation matrices and scalar interpolation."""
    fx, fy = spec.focal_px
    d = np.array(
        [
            (col + 0.5 - spec.out_width / 2) / fx,
            -(row + 0.5 - spec.out_height / 2) / fy,
            1.0,
        ]
    )
    p, y = math.radians(spec.pitch), math.radians(spec.yaw)
    rot_pitch = np.array(
        [[1, 0, 0], [0, math.cos(p), math.sin(p)], [0, -math.sin(p), math.cos(p)]]
    )
    rot_yaw = np.array([[math.cos(y), 0, math.sin(y)], [0, 1, 0], [-math.sin(y), 0, math.cos(y)]])
    vx, vy, vz = rot_yaw @ rot_pitch @ d
    lon = math.atan2(vx, vz)
    lat = math.asin(vy / math.sqrt(vx * vx + vy * vy + vz * vz))
    x = (lon / (2 * math.pi) + 0.5) * img.width - 0.5
    v = (0.5 - lat / math.pi) * img.height - 0.5
    v = min(max(v, 0.0), img.height - 1.0)
    x0, y0 = math.floor(x), math.floor(v)
    ax, ay = x - x0, v - y0
    data = img.data.astype(np.float64)

    def at(r, c):
        return data[min(r, img.height - 1), c % img.width]

    top = at(y0, x0) * (1 - ax) + at(y0, x0 + 1) * ax
    bottom = at(y0 + 1, x0) * (1 - ax) + at(y0 + 1, x0 + 1) * ax
    return top * (1 - ay) + bottom * ay


PLANTED_BETA = LogisticParams(4.0, 0.3, 36.0, 0.0, 3.0)
ZONE_SCALE = np.array([30.0, 40.0, 50.0, 60.0, 80.0])


def synthetic_database():
    """32 stimuli: eight patterns at four blur levels; HQ zones carry no error."""
    zone_mses = []
    for pattern in PATTERNS.values():
        for sigma in pattern.scenario.default_sigmas:
            lq = ~np.array(pattern.hq_flags)
            mse = np.where(lq, ZONE_SCALE * sigma**0.8, 0.0)
            zone_mses.append(ZoneMseVector(tuple(mse), (1,) * 5))
    return zone_mses


def planted_mos(zone_mses, weights, noise: float = 0.0, seed: int = 0):
    """MOS generated from ZWF under the planted logistic, optionally with Gaussian noise."""
    matrix = np.array([zm.as_array() for zm in zone_mses])
    mos = logistic5(zwf_values(matrix, np.asarray(weights), 255.0), PLANTED_BETA)
    if noise:
        mos = mos + np.random.default_rng(seed).normal(0.0, noise, len(mos))
    return mos
