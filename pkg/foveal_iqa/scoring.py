"""Metric registry and per-stimulus scoring.

A :class:`ScoringContext` bundles everything the foveal metrics need
besides the two images (geometry, eccentricity, zone map, foveal weights),
so a batch of stimuli sharing one viewport geometry computes them once.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .foveal import (
    DEFAULT_FOVEATION,
    FoveationModel,
    foveal_weight_map,
    score_fpsnr,
    score_fssim,
    score_fwqi,
    score_fwsnr,
)
from .geometry import (
    DEFAULT_ZONE_SCHEME,
    EccentricityMap,
    VirtualGeometry,
    ZoneScheme,
    eccentricity_map,
    zone_map,
)
from .metrics import score_msssim, score_mse, score_ssim, score_uqi, score_vpsnr, score_wsnr
from .raster_io import ViewportImage
from .zwf import ZoneMseVector, ZoneWeights, resolve_weights, zone_mse, zwf_score

logger = logging.getLogger(__name__)

# Metrics defined only by external publications; their scores arrive via CSV.
EXTERNAL_METRICS = (
    "VIF",
    "VIFp",
    "NQM",
    "IW-PSNR",
    "IW-SSIM",
    "FSIM",
    "FSIMc",
    "RFSIM",
    "SR-SIM",
)


@dataclass
class ScoringContext:
    """Shared viewing geometry and derived maps for one viewport raster size."""

    geometry: VirtualGeometry
    eccentricity: EccentricityMap
    scheme: ZoneScheme = DEFAULT_ZONE_SCHEME
    foveation: FoveationModel = DEFAULT_FOVEATION
    zwf_weights: Optional[ZoneWeights] = None
    zones: np.ndarray = field(init=False, repr=False)
    weight_map: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.zones = zone_map(self.eccentricity, self.scheme)
        self.weight_map = foveal_weight_map(self.eccentricity, self.foveation)
        if self.zwf_weights is None and self.scheme.zone_count == 5:
            self.zwf_weights = resolve_weights(None)

    @classmethod
    def build(
        cls,
        geometry: VirtualGeometry,
        scheme: ZoneScheme = DEFAULT_ZONE_SCHEME,
        foveation_point: Optional[Tuple[float, float]] = None,
        foveation: Optional[FoveationModel] = None,
        zwf_weights: Optional[ZoneWeights] = None,
    ) -> "ScoringContext":
        return cls(
            geometry=geometry,
            eccentricity=eccentricity_map(geometry, foveation_point),
            scheme=scheme,
            foveation=foveation or FoveationModel.for_geometry(geometry),
            zwf_weights=zwf_weights,
        )

    @property
    def zone_count(self) -> int:
        return self.scheme.zone_count

    def zone_mse(self, ref: ViewportImage, dist: ViewportImage) -> ZoneMseVector:
        return zone_mse(ref, dist, self.zones, self.zone_count)


MetricFn = Callable[[ViewportImage, ViewportImage, ScoringContext], float]


def _zwf(ref: ViewportImage, dist: ViewportImage, ctx: ScoringContext) -> float:
    if ctx.zwf_weights is None:
        raise ConfigurationError(f"ZWF needs zone weights for {ctx.zone_count} zones")
    return zwf_score(ctx.zone_mse(ref, dist), ctx.zwf_weights, ref.max_value)


METRICS: Dict[str, MetricFn] = {
    "MSE": lambda r, d, ctx: score_mse(r, d),
    "VPSNR": lambda r, d, ctx: score_vpsnr(r, d),
    "SSIM": lambda r, d, ctx: score_ssim(r, d),
    "MS-SSIM": lambda r, d, ctx: score_msssim(r, d),
    "UQI": lambda r, d, ctx: score_uqi(r, d),
    "WSNR": lambda r, d, ctx: score_wsnr(r, d, ctx.geometry),
    "FPSNR": lambda r, d, ctx: score_fpsnr(r, d, ctx.weight_map),
    "FWSNR": lambda r, d, ctx: score_fwsnr(r, d, ctx.weight_map, ctx.geometry),
    "FSSIM": lambda r, d, ctx: score_fssim(r, d, ctx.weight_map),
    "FWQI": lambda r, d, ctx: score_fwqi(r, d, ctx.weight_map, ctx.geometry),
    "ZWF": _zwf,
}

DEFAULT_METRICS: Tuple[str, ...] = tuple(METRICS)


def validate_metric_ids(metric_ids: Iterable[str]) -> List[str]:
    """Check ids against the registry; keeps order and drops duplicates."""
    seen: List[str] = []
    for metric_id in metric_ids:
        if metric_id not in METRICS:
            raise ConfigurationError(
                f"unknown metric {metric_id!r}; available: {', '.join(METRICS)}"
            )
        if metric_id not in seen:
            seen.append(metric_id)
    return seen


def score_pair(
    ref: ViewportImage,
    dist: ViewportImage,
    ctx: ScoringContext,
    metric_ids: Iterable[str] = DEFAULT_METRICS,
) -> Tuple[Dict[str, float], ZoneMseVector]:
    """Compute the requested metrics and the zone MSE vector for one pair."""
    scores = {}
    for metric_id in validate_metric_ids(metric_ids):
        scores[metric_id] = float(METRICS[metric_id](ref, dist, ctx))
        logger.debug("%s = %r", metric_id, scores[metric_id])
    return scores, ctx.zone_mse(ref, dist)
