"""Rectilinear viewport extraction from equirectangular images.

Conventions:

* Camera frame: x right, y up, z forward. Positive pitch looks up, positive
  yaw turns east (towards larger equirect columns).
* Longitude theta in (-180, 180], latitude phi in [-90, 90].
* Continuous equirect coordinates: x = (theta/360 + 0.5) * W,
  y = (0.5 - phi/180) * H, so pixel column j covers [j, j + 1).
* Continuous viewport coordinates: pixel (i, j) has its center at
  (j + 0.5, i + 0.5); the viewport center is (out_width/2, out_height/2).
* :func:`bilinear_sample` works in pixel-index space, where pixel j sits at
  integer coordinate j. :func:`extract_viewport` shifts by half a pixel.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .raster_io import EquirectImage, ViewportImage, to_integer_raster


@dataclass(frozen=True)
class ViewportSpec:
    """Viewing direction, field of view and output raster of a viewport."""

    yaw: float = 0.0
    pitch: float = 0.0
    fov_h: float = 96.0
    fov_v: Optional[float] = None
    out_width: int = 1280
    out_height: int = 1440

    def __post_init__(self):
        if int(self.out_width) != self.out_width or self.out_width <= 0:
            raise ValidationError(f"out_width must be a positive integer, got {self.out_width}")
        if int(self.out_height) != self.out_height or self.out_height <= 0:
            raise ValidationError(f"out_height must be a positive integer, got {self.out_height}")
        if not -90.0 <= self.pitch <= 90.0:
            raise ValidationError(f"pitch must lie in [-90, 90], got {self.pitch}")
        # normalize yaw into [-180, 180)
        object.__setattr__(self, "yaw", (float(self.yaw) + 180.0) % 360.0 - 180.0)
        if self.fov_v is None:
            object.__setattr__(self, "fov_v", self.fov_h * self.out_height / self.out_width)
        for name in ("fov_h", "fov_v"):
            value = getattr(self, name)
            if not 0.0 < value < 180.0:
                raise ValidationError(f"{name} must lie in (0, 180) degrees, got {value}")

    @property
    def focal_px(self) -> Tuple[float, float]:
        """Pinhole focal lengths in pixels (horizontal, vertical)."""
        fx = (self.out_width / 2.0) / math.tan(math.radians(self.fov_h) / 2.0)
        fov_v = float(self.fov_v)  # type: ignore[arg-type]
        fy = (self.out_height / 2.0) / math.tan(math.radians(fov_v) / 2.0)
        return fx, fy


def viewport_rays(ux, uy, spec: ViewportSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Longitude and latitude (degrees) of the rays through viewport coordinates."""
    fx, fy = spec.focal_px
    x = (np.asarray(ux, dtype=np.float64) - spec.out_width / 2.0) / fx
    y = -(np.asarray(uy, dtype=np.float64) - spec.out_height / 2.0) / fy
    z = np.ones_like(x)

    pitch = math.radians(spec.pitch)
    y1 = y * math.cos(pitch) + z * math.sin(pitch)
    z1 = -y * math.sin(pitch) + z * math.cos(pitch)

    yaw = math.radians(spec.yaw)
    x2 = x * math.cos(yaw) + z1 * math.sin(yaw)
    z2 = -x * math.sin(yaw) + z1 * math.cos(yaw)

    lon = np.degrees(np.arctan2(x2, z2))
    lat = np.degrees(np.arctan2(y1, np.hypot(x2, z2)))
    return lon, lat


def viewport_ray_to_equirect(
    u: Tuple[float, float], spec: ViewportSpec, equirect_size: Tuple[int, int]
) -> Tuple[float, float]:
    """Map a continuous viewport coordinate to continuous equirect coordinates.

    Args:
        u: (x, y) in the viewport's continuous coordinates
        spec: viewing direction and field of view
        equirect_size: (W, H) of the equirectangular image
    """
    width, height = equirect_size
    lon, lat = viewport_rays(u[0], u[1], spec)
    return (float((lon / 360.0 + 0.5) * width), float((0.5 - lat / 180.0) * height))


def bilinear_sample(img: EquirectImage, xs, ys) -> np.ndarray:
    """Bilinear interpolation in pixel-index coordinates.

    Columns wrap around the longitude seam; rows clamp at the poles. Returns
    float64 values with a trailing channel axis for color images.
    """
    data = np.asarray(img.data, dtype=np.float64)
    height, width = data.shape[:2]
    xs = np.mod(np.asarray(xs, dtype=np.float64), width)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, height - 1.0)
    xs, ys = np.broadcast_arrays(xs, ys)
    coords = np.stack([ys.ravel(), xs.ravel()])

    # column 0 repeated after the last column closes the seam
    pad = ((0, 0), (0, 1)) + ((0, 0),) * (data.ndim - 2)
    wrapped = np.pad(data, pad, mode="wrap")
    if wrapped.ndim == 2:
        values = ndimage.map_coordinates(wrapped, coords, order=1, mode="nearest")
        return values.reshape(xs.shape)
    channels = [
        ndimage.map_coordinates(wrapped[..., c], coords, order=1, mode="nearest")
        for c in range(wrapped.shape[2])
    ]
    return np.stack(channels, axis=-1).reshape(xs.shape + (wrapped.shape[2],))


def equirect_sample_coords(spec: ViewportSpec, equirect_size: Tuple[int, int]):
    """Pixel-index sampling coordinates for every viewport pixel center."""
    width, height = equirect_size
    cols = np.arange(spec.out_width, dtype=np.float64) + 0.5
    rows = np.arange(spec.out_height, dtype=np.float64) + 0.5
    ux, uy = np.meshgrid(cols, rows)
    lon, lat = viewport_rays(ux, uy, spec)
    xs = (lon / 360.0 + 0.5) * width - 0.5
    ys = (0.5 - lat / 180.0) * height - 0.5
    return xs, ys


def extract_viewport(img: EquirectImage, spec: ViewportSpec) -> ViewportImage:
    """Render the rectilinear viewport ``spec`` from an equirectangular image."""
    xs, ys = equirect_sample_coords(spec, (img.width, img.height))
    values = bilinear_sample(img, xs, ys)
    return ViewportImage(to_integer_raster(values, img.bit_depth), bit_depth=img.bit_depth)


def rotate_equirect(img: EquirectImage, columns: int) -> EquirectImage:
    """Rotate the sphere about the vertical axis by whole equirect columns.

    Viewing ``yaw`` on the result shows what ``yaw + columns * 360 / W``
    shows on the input.
    """
    return EquirectImage(np.roll(img.data, -int(columns), axis=1), img.bit_depth)
