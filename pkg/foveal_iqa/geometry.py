"""HMD viewing geometry, eccentricity and retina-zone classification.

The displayed viewport is magnified by the HMD lens into a virtual viewport.
Pixel coordinates are identical on both; only physical lengths change. The
eccentricity of a pixel is the visual angle between it and the foveation
point as seen from the eye, measured on the virtual viewport.

All lengths are millimeters, all angles degrees.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, InvalidOpticsError, ValidationError

MM_PER_INCH = 25.4

# Viewports far larger than any HMD panel are almost certainly a unit mistake.
_MAX_VIEWPORT_PX = 1 << 16


@dataclass(frozen=True)
class DisplayGeometry:
    """Physical description of one eye's display in the headset."""

    focal_length: float  # F
    lens_to_display: float  # S0
    lens_to_eye: float  # S2
    viewport_width_px: int  # Wp
    viewport_height_px: int  # Hp
    viewport_width_mm: float  # Wl
    viewport_height_mm: float  # Hl

    def __post_init__(self):
        for name in ("focal_length", "lens_to_eye", "viewport_width_mm", "viewport_height_mm"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lens_to_display < 0:
            raise ValidationError(
                f"lens_to_display must be non-negative, got {self.lens_to_display}"
            )
        for name in ("viewport_width_px", "viewport_height_px"):
            value = getattr(self, name)
            if int(value) != value or not 0 < value <= _MAX_VIEWPORT_PX:
                raise ValidationError(f"{name} must be a positive pixel count, got {value}")

    @classmethod
    def from_screen(
        cls,
        focal_length: float,
        lens_to_display: float,
        lens_to_eye: float,
        diagonal_inches: float,
        panel_px: Tuple[int, int],
        viewport_px: Tuple[int, int],
    ) -> "DisplayGeometry":
        """Build a geometry from a phone-style panel spec.

        Pixels are assumed square; the pitch is the physical diagonal divided
        by the diagonal in pixels. The viewport is the per-eye part of the panel.
        """
        if diagonal_inches <= 0:
            raise ValidationError(f"screen diagonal must be positive, got {diagonal_inches}")
        pitch = diagonal_inches * MM_PER_INCH / math.hypot(*panel_px)
        width_px, height_px = viewport_px
        return cls(
            focal_length=focal_length,
            lens_to_display=lens_to_display,
            lens_to_eye=lens_to_eye,
            viewport_width_px=int(width_px),
            viewport_height_px=int(height_px),
            viewport_width_mm=width_px * pitch,
            viewport_height_mm=height_px * pitch,
        )

    def to_dict(self) -> Dict[str, float]:
        return {
            "focal_length_mm": self.focal_length,
            "lens_to_display_mm": self.lens_to_display,
            "lens_to_eye_mm": self.lens_to_eye,
            "viewport_px": [self.viewport_width_px, self.viewport_height_px],
            "viewport_mm": [self.viewport_width_mm, self.viewport_height_mm],
        }


@dataclass(frozen=True)
class VirtualGeometry:
    """Quantities of the virtual viewport formed by the lens."""

    lens_to_virtual: float  # S1
    eye_to_virtual: float  # S3
    width_px: int  # Wp'
    height_px: int  # Hp'
    width_mm: float  # Wl'
    height_mm: float  # Hl'
    magnification: float

    @property
    def pitch_x(self) -> float:
        """Horizontal millimeters per pixel on the virtual viewport."""
        return self.width_mm / self.width_px

    @property
    def pitch_y(self) -> float:
        """Vertical millimeters per pixel on the virtual viewport."""
        return self.height_mm / self.height_px

    @property
    def shape(self) -> Tuple[int, int]:
        """Raster shape as (rows, columns)."""
        return (self.height_px, self.width_px)

    def to_dict(self) -> Dict[str, float]:
        return {
            "S1_mm": self.lens_to_virtual,
            "S3_mm": self.eye_to_virtual,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "width_mm": self.width_mm,
            "height_mm": self.height_mm,
            "magnification": self.magnification,
        }


def derive_virtual_geometry(display: DisplayGeometry) -> VirtualGeometry:
    """Apply the thin-lens equations to a display description.

    Raises:
        InvalidOpticsError: if the display is not inside the focal length.
    """
    f, s0 = display.focal_length, display.lens_to_display
    if s0 >= f:
        raise InvalidOpticsError(
            f"display distance S0={s0} mm must be smaller than focal length F={f} mm"
        )
    magnification = f / (f - s0)
    s1 = s0 * magnification
    return VirtualGeometry(
        lens_to_virtual=s1,
        eye_to_virtual=s1 + display.lens_to_eye,
        width_px=display.viewport_width_px,
        height_px=display.viewport_height_px,
        width_mm=display.viewport_width_mm * magnification,
        height_mm=display.viewport_height_mm * magnification,
        magnification=magnification,
    )


def raster_center(vg: VirtualGeometry) -> Tuple[float, float]:
    """Center of the raster in pixel-index coordinates (x, y)."""
    return ((vg.width_px - 1) / 2.0, (vg.height_px - 1) / 2.0)


def degrees_per_pixel(vg: VirtualGeometry) -> Tuple[float, float]:
    """Angular size of one pixel at the foveation point, per axis (x, y).

    Uniform across the raster (small-angle approximation).
    """
    s3 = vg.eye_to_virtual
    return (
        math.degrees(math.atan(vg.pitch_x / s3)),
        math.degrees(math.atan(vg.pitch_y / s3)),
    )


def display_nyquist(vg: VirtualGeometry) -> float:
    """Highest spatial frequency the display can show, in cycles/degree."""
    return 0.5 / max(degrees_per_pixel(vg))


def _eccentricity(dx, dy, vg: VirtualGeometry):
    distance = np.hypot(dx * vg.pitch_x, dy * vg.pitch_y)
    return np.degrees(np.arctan(distance / vg.eye_to_virtual))


def eccentricity_at(
    point: Tuple[float, float], foveation_point: Tuple[float, float], vg: VirtualGeometry
) -> float:
    """Eccentricity in degrees of a pixel ``(x, y)`` relative to the foveation point."""
    dx = point[0] - foveation_point[0]
    dy = point[1] - foveation_point[1]
    return float(_eccentricity(np.float64(dx), np.float64(dy), vg))


@dataclass(frozen=True)
class EccentricityMap:
    """Per-pixel eccentricity raster of shape (Hp', Wp')."""

    values: np.ndarray = field(repr=False)
    foveation_point: Tuple[float, float]

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.values.shape)  # type: ignore[return-value]


def eccentricity_map(
    vg: VirtualGeometry, foveation_point: Optional[Tuple[float, float]] = None
) -> EccentricityMap:
    """Evaluate the eccentricity of every pixel of the virtual viewport.

    The foveation point defaults to the raster center.
    """
    if foveation_point is None:
        foveation_point = raster_center(vg)
    fx, fy = foveation_point
    if not (-0.5 <= fx <= vg.width_px - 0.5 and -0.5 <= fy <= vg.height_px - 0.5):
        raise DomainError(f"foveation point {foveation_point} lies outside the raster")
    xs = np.arange(vg.width_px, dtype=np.float64) - fx
    ys = np.arange(vg.height_px, dtype=np.float64) - fy
    dx, dy = np.meshgrid(xs, ys)
    values = _eccentricity(dx, dy, vg)
    values.setflags(write=False)
    return EccentricityMap(values=values, foveation_point=(float(fx), float(fy)))


RETINA_REGIONS = ("fovea", "parafovea", "perifovea", "near periphery", "far periphery")


@dataclass(frozen=True)
class ZoneScheme:
    """Eccentricity intervals [e_{k-1}, e_k) defining zones Z1..ZK.

    ``boundaries`` starts at 0 and ends with +inf.
    """

    boundaries: Tuple[float, ...] = (0.0, 2.5, 4.0, 9.0, 30.0, math.inf)
    names: Optional[Tuple[str, ...]] = RETINA_REGIONS

    def __post_init__(self):
        b = tuple(float(v) for v in self.boundaries)
        if len(b) < 2:
            raise ValidationError("a zone scheme needs at least one zone")
        if b[0] != 0.0:
            raise ValidationError(f"first zone boundary must be 0, got {b[0]}")
        if not math.isinf(b[-1]):
            raise ValidationError("last zone boundary must be unbounded (+inf)")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValidationError(f"zone boundaries must be strictly increasing: {list(b)}")
        object.__setattr__(self, "boundaries", b)
        if self.names is not None and len(self.names) != len(b) - 1:
            object.__setattr__(self, "names", None)

    @classmethod
    def from_boundaries(cls, boundaries: Sequence[float]) -> "ZoneScheme":
        """Build a scheme from finite boundaries; a trailing +inf is appended if absent."""
        values = [float(v) for v in boundaries]
        if not values or not math.isinf(values[-1]):
            values.append(math.inf)
        return cls(boundaries=tuple(values))

    @property
    def zone_count(self) -> int:
        return len(self.boundaries) - 1

    @property
    def inner_boundaries(self) -> Tuple[float, ...]:
        """Boundaries between adjacent zones (excludes 0 and +inf)."""
        return self.boundaries[1:-1]

    def interval(self, zone: int) -> Tuple[float, float]:
        """Half-open eccentricity interval of a 1-based zone index."""
        if not 1 <= zone <= self.zone_count:
            raise DomainError(f"zone index {zone} outside 1..{self.zone_count}")
        return (self.boundaries[zone - 1], self.boundaries[zone])

    def label(self, zone: int) -> str:
        lo, hi = self.interval(zone)
        text = f"Z{zone} [{lo:g}, {hi:g})"
        if self.names:
            text += f" {self.names[zone - 1]}"
        return text


DEFAULT_ZONE_SCHEME = ZoneScheme()


def zone_of(e: float, scheme: ZoneScheme = DEFAULT_ZONE_SCHEME) -> int:
    """Return the 1-based zone index whose interval contains ``e``."""
    if not e >= 0:
        raise DomainError(f"eccentricity must be non-negative, got {e}")
    return int(np.searchsorted(scheme.boundaries[:-1], e, side="right"))


def zone_map(em: EccentricityMap, scheme: ZoneScheme = DEFAULT_ZONE_SCHEME) -> np.ndarray:
    """Classify every pixel of an eccentricity map; returns 1-based zone indices."""
    values = np.asarray(em.values)
    if np.any(values < 0) or np.any(np.isnan(values)):
        raise DomainError("eccentricity map contains negative or NaN values")
    indices = np.searchsorted(scheme.boundaries[:-1], values, side="right")
    return indices.astype(np.int16)


def zone_pixel_counts(zones: np.ndarray, zone_count: int) -> np.ndarray:
    """Number of pixels N_k in each zone, index 0 holding Z1."""
    return np.bincount(np.asarray(zones).ravel(), minlength=zone_count + 1)[1 : zone_count + 1]


def zone_area_fractions(zones: np.ndarray, zone_count: int) -> np.ndarray:
    """Share of the viewport covered by each zone."""
    counts = zone_pixel_counts(zones, zone_count)
    return counts / counts.sum()


GEAR_VR = DisplayGeometry.from_screen(
    focal_length=62.0,
    lens_to_display=25.0,
    lens_to_eye=10.0,
    diagonal_inches=5.1,
    panel_px=(2560, 1440),
    viewport_px=(1280, 1440),
)
