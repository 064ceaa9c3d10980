"""Raster containers and lossless image I/O.

Rasters are numpy arrays of shape (rows, columns) or (rows, columns, 3),
row-major, unsigned integers of the stated bit depth. Pillow handles the
file formats (PNG, PGM/PPM, TIFF); anything lossy is refused on write.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from PIL import Image

from .errors import DomainError, ValidationError
from .file_utils import atomic_output
from .geometry import VirtualGeometry

logger = logging.getLogger(__name__)

LOSSLESS_SUFFIXES = {".png", ".pgm", ".ppm", ".pnm", ".tif", ".tiff", ".bmp"}


def _check_channels(data: np.ndarray) -> int:
    if data.ndim == 2:
        return 1
    if data.ndim == 3 and data.shape[2] in (1, 3):
        return int(data.shape[2])
    raise DomainError(f"expected 1 or 3 channels, got array of shape {data.shape}")


def _check_bit_depth(data: np.ndarray, bit_depth: int) -> None:
    if not 1 <= bit_depth <= 16:
        raise ValidationError(f"bit depth must lie in 1..16, got {bit_depth}")
    if data.size and np.issubdtype(data.dtype, np.integer):
        top = (1 << bit_depth) - 1
        if data.min() < 0 or data.max() > top:
            raise ValidationError(f"pixel values exceed the {bit_depth}-bit range [0, {top}]")


@dataclass(frozen=True)
class EquirectImage:
    """Full-sphere equirectangular image (360 x 180 degrees)."""

    data: np.ndarray = field(repr=False)
    bit_depth: int = 8

    def __post_init__(self):
        _check_channels(self.data)
        _check_bit_depth(self.data, self.bit_depth)
        if self.width != 2 * self.height:
            raise ValidationError(
                f"equirectangular images need width == 2 * height, got {self.width}x{self.height}"
            )

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return _check_channels(self.data)

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1


@dataclass(frozen=True)
class ViewportImage:
    """Rectilinear viewport raster, optionally tied to its viewing geometry.

    Foveal metrics need ``geometry`` and ``foveation_point``; conventional
    metrics ignore them.
    """

    data: np.ndarray = field(repr=False)
    bit_depth: int = 8
    geometry: Optional[VirtualGeometry] = None
    foveation_point: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        _check_channels(self.data)
        _check_bit_depth(self.data, self.bit_depth)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def channels(self) -> int:
        return _check_channels(self.data)

    @property
    def max_value(self) -> int:
        """MAX = 2^bit_depth - 1 (255 for 8-bit)."""
        return (1 << self.bit_depth) - 1

    def with_data(self, data: np.ndarray) -> "ViewportImage":
        """Copy sharing geometry and bit depth but carrying new pixels."""
        return ViewportImage(data, self.bit_depth, self.geometry, self.foveation_point)


RasterLike = Union[np.ndarray, ViewportImage]


def as_viewport(image: RasterLike, bit_depth: int = 8) -> ViewportImage:
    """Wrap a bare array as an 8-bit (or ``bit_depth``) viewport."""
    if isinstance(image, ViewportImage):
        return image
    return ViewportImage(np.asarray(image), bit_depth=bit_depth)


def storage_dtype(bit_depth: int) -> np.dtype:
    return np.dtype(np.uint8) if bit_depth <= 8 else np.dtype(np.uint16)


def to_integer_raster(values: np.ndarray, bit_depth: int) -> np.ndarray:
    """Round to the nearest integer level and clip into the bit-depth range."""
    top = (1 << bit_depth) - 1
    return np.clip(np.rint(values), 0, top).astype(storage_dtype(bit_depth))


def read_raster(path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    """Read an image file; returns (array, bit_depth).

    Grayscale stays 2-D; palette and alpha images are converted to RGB.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I;16L", "I"):
            data = np.asarray(img, dtype=np.int64)
            if data.min() < 0 or data.max() > 0xFFFF:
                raise ValidationError(f"{path}: integer image outside the 16-bit range")
            return data.astype(np.uint16), 16
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8).copy(), 8
        if img.mode != "RGB":
            logger.debug("converting %s from %s to RGB", path, img.mode)
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8).copy(), 8


def write_raster(path: Union[str, Path], data: np.ndarray, bit_depth: int = 8) -> Path:
    """Write a raster losslessly; the format follows the file suffix."""
    path = Path(path)
    if path.suffix.lower() not in LOSSLESS_SUFFIXES:
        raise ValidationError(f"refusing to write {path}: not a lossless raster format")
    array = np.asarray(data)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    _check_channels(array)
    array = array.astype(storage_dtype(bit_depth))
    if array.dtype == np.uint16 and array.ndim != 2:
        raise ValidationError("16-bit output is supported for single-channel rasters only")
    # uint8 2-D -> L, uint8 3-D -> RGB, uint16 2-D -> I;16
    img = Image.fromarray(array)
    with atomic_output(path) as tmp:
        img.save(tmp, format=Image.registered_extensions()[path.suffix.lower()])
    return path


def read_equirect(path: Union[str, Path]) -> EquirectImage:
    data, bit_depth = read_raster(path)
    return EquirectImage(data, bit_depth)


def read_viewport(
    path: Union[str, Path],
    geometry: Optional[VirtualGeometry] = None,
    foveation_point: Optional[Tuple[float, float]] = None,
) -> ViewportImage:
    data, bit_depth = read_raster(path)
    return ViewportImage(data, bit_depth, geometry, foveation_point)


def write_matrix(path: Union[str, Path], values: np.ndarray) -> Path:
    """Export a single-channel float or int matrix (eccentricity or zone map).

    ``.npy`` keeps full precision; ``.csv`` writes row-major text.
    """
    path = Path(path)
    matrix = np.asarray(values)
    if matrix.ndim != 2:
        raise DomainError(f"expected a single-channel matrix, got shape {matrix.shape}")
    with atomic_output(path) as tmp:
        if path.suffix == ".npy":
            with open(tmp, "wb") as f:
                np.save(f, matrix)
        else:
            fmt = "%d" if np.issubdtype(matrix.dtype, np.integer) else "%.9g"
            np.savetxt(tmp, matrix, fmt=fmt, delimiter=",")
    return path
