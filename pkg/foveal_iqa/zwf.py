"""Zone-masked MSE and the zone-weighted formulation (ZWF).

ZWF = 10 log10(MAX^2 / sum_k w_k * MSE_k), where MSE_k is the mean squared
luminance error over the pixels of retina zone Z_k.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError, ValidationError
from .metrics import prepare_pair, psnr_from_mse
from .raster_io import RasterLike

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ZoneMseVector:
    """Per-zone MSE; ``mse[k]`` is NaN when zone k+1 has no pixels."""

    mse: Tuple[float, ...]
    pixel_counts: Tuple[int, ...]

    def __post_init__(self):
        if len(self.mse) != len(self.pixel_counts):
            raise ValidationError("mse and pixel_counts must have one entry per zone")

    @property
    def zone_count(self) -> int:
        return len(self.mse)

    @property
    def present(self) -> Tuple[bool, ...]:
        return tuple(n > 0 for n in self.pixel_counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.mse, dtype=np.float64)


@dataclass(frozen=True)
class ZoneWeights:
    """Non-negative perceptual zone weights summing to one."""

    weights: Tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise ConfigurationError("zone weights must not be empty")
        if any(not math.isfinite(v) or v < 0 for v in w):
            raise ConfigurationError(f"zone weights must be finite and non-negative: {w}")
        if abs(sum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigurationError(f"zone weights must sum to 1, got {sum(w):.12g}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, zone_count: int) -> "ZoneWeights":
        return cls(tuple([1.0 / zone_count] * zone_count))

    @classmethod
    def proportional(cls, counts: Sequence[float]) -> "ZoneWeights":
        """Weights proportional to ``counts`` (e.g. zone pixel counts)."""
        total = float(sum(counts))
        if total <= 0:
            raise ConfigurationError("cannot normalize all-zero counts")
        return cls(tuple(c / total for c in counts))

    @property
    def zone_count(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=np.float64)


# Per-image zone weights fitted on a 256-stimulus subjective database
# (five-zone default scheme), with their mean as a content-independent set.
# Values are rounded to three decimals; lookups renormalize them.
REFERENCE_ZONE_WEIGHTS: Dict[str, Tuple[float, ...]] = {
    "I1": (0.728, 0.088, 0.088, 0.048, 0.048),
    "I2": (0.495, 0.407, 0.033, 0.033, 0.032),
    "I3": (0.905, 0.024, 0.024, 0.024, 0.024),
    "I4": (0.759, 0.063, 0.063, 0.063, 0.052),
    "I5": (0.650, 0.087, 0.087, 0.087, 0.087),
    "I6": (0.404, 0.404, 0.064, 0.064, 0.064),
    "I7": (0.941, 0.019, 0.019, 0.019, 0.003),
    "I8": (0.545, 0.204, 0.095, 0.095, 0.061),
}
REFERENCE_ZONE_WEIGHTS["mean"] = tuple(
    float(v) for v in np.mean(list(REFERENCE_ZONE_WEIGHTS.values()), axis=0)
)


def reference_weights(name: str) -> ZoneWeights:
    """Look up a named reference weight set ("I1".."I8" or "mean")."""
    try:
        return ZoneWeights.proportional(REFERENCE_ZONE_WEIGHTS[name])
    except KeyError:
        raise ConfigurationError(
            f"unknown weight set {name!r}; expected one of {', '.join(REFERENCE_ZONE_WEIGHTS)}"
        ) from None


def resolve_weights(value: Union[str, Sequence[float], ZoneWeights, None]) -> ZoneWeights:
    """Accept a weight-set name, an explicit vector or a ZoneWeights."""
    if value is None:
        return reference_weights("mean")
    if isinstance(value, ZoneWeights):
        return value
    if isinstance(value, str):
        return reference_weights(value)
    return ZoneWeights(tuple(value))


def zone_mse(
    ref: RasterLike, dist: RasterLike, zones: np.ndarray, zone_count: Optional[int] = None
) -> ZoneMseVector:
    """Mean squared luminance error within each zone of a 1-based zone map."""
    _, x, y = prepare_pair(ref, dist)
    zones = np.asarray(zones)
    if zones.shape != x.shape:
        raise DimensionMismatchError(x.shape, zones.shape, "image/zone map")
    k = int(zones.max()) if zone_count is None else zone_count
    flat = zones.ravel()
    sq = ((x - y) ** 2).ravel()
    counts = np.bincount(flat, minlength=k + 1)[1 : k + 1]
    sums = np.bincount(flat, weights=sq, minlength=k + 1)[1 : k + 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        mse = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return ZoneMseVector(tuple(float(v) for v in mse), tuple(int(n) for n in counts))


def weighted_zone_mse(zm: ZoneMseVector, w: ZoneWeights) -> float:
    """sum_k w_k * MSE_k; absent zones must carry zero weight."""
    if zm.zone_count != w.zone_count:
        raise ConfigurationError(f"{w.zone_count} weights for {zm.zone_count} zones")
    if not any(zm.present):
        raise ValidationError("no zone has any pixels")
    total = 0.0
    for k, (mse, present, weight) in enumerate(zip(zm.mse, zm.present, w.weights), start=1):
        if not present:
            if weight > 0:
                raise ConfigurationError(f"zone Z{k} has no pixels but weight {weight:g}")
            continue
        total += weight * mse
    return total


def zwf_score(zm: ZoneMseVector, w: ZoneWeights, max_value: float = 255.0) -> float:
    """Zone-weighted PSNR-like score in dB; ``inf`` when the weighted MSE is zero."""
    return psnr_from_mse(weighted_zone_mse(zm, w), max_value)
