"""Non-uniform-quality stimulus generation.

A stimulus keeps the source pixels in high-quality (HQ) zones and replaces
low-quality (LQ) zones by a Gaussian-blurred copy. Where two adjacent zones
differ in quality, a transition belt on the outward side of the boundary
blends the two linearly in eccentricity.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, DomainError, ValidationError
from .geometry import DEFAULT_ZONE_SCHEME, EccentricityMap, ZoneScheme, zone_map
from .raster_io import read_raster, to_integer_raster, write_raster

logger = logging.getLogger(__name__)


class Scenario(Enum):
    """Stimulus families: S1 keeps the center sharp, S2 keeps the periphery sharp."""

    S1 = "S1"
    S2 = "S2"

    @property
    def default_sigmas(self) -> Tuple[float, ...]:
        return DEFAULT_SIGMAS[self]


DEFAULT_SIGMAS: Dict[Scenario, Tuple[float, ...]] = {
    Scenario.S1: (2.0, 4.0, 8.0, 12.0),
    Scenario.S2: (1.0, 2.0, 4.0, 6.0),
}

DEFAULT_KERNEL_EXTENT = 50
DEFAULT_BELT_WIDTH = 5.0


@dataclass(frozen=True)
class QualityPattern:
    """HQ/LQ assignment for every zone; ``True`` means high quality."""

    pattern_id: str
    scenario: Scenario
    hq_flags: Tuple[bool, ...]

    @property
    def zone_count(self) -> int:
        return len(self.hq_flags)

    @property
    def hq_count(self) -> int:
        return sum(self.hq_flags)

    def describe(self) -> str:
        return " ".join("HQ" if flag else "LQ" for flag in self.hq_flags)


def _pattern(pattern_id: str, scenario: Scenario, flags: str) -> QualityPattern:
    return QualityPattern(pattern_id, scenario, tuple(c == "H" for c in flags))


PATTERNS: Dict[str, QualityPattern] = {
    p.pattern_id: p
    for p in (
        _pattern("P1", Scenario.S1, "HLLLL"),
        _pattern("P2", Scenario.S1, "HHLLL"),
        _pattern("P3", Scenario.S1, "HHHLL"),
        _pattern("P4", Scenario.S1, "HHHHL"),
        _pattern("P5", Scenario.S2, "LHHHH"),
        _pattern("P6", Scenario.S2, "LLHHH"),
        _pattern("P7", Scenario.S2, "LLLHH"),
        _pattern("P8", Scenario.S2, "LLLLH"),
    )
}


def get_pattern(pattern_id: str) -> QualityPattern:
    try:
        return PATTERNS[pattern_id]
    except KeyError:
        raise ValidationError(
            f"unknown pattern {pattern_id!r}; expected one of {', '.join(PATTERNS)}"
        ) from None


@dataclass(frozen=True)
class StimulusSpec:
    """Identifies one stimulus: source, pattern and blur level."""

    source_id: str
    pattern: QualityPattern
    sigma: float
    kernel_extent: int = DEFAULT_KERNEL_EXTENT
    belt_width: float = DEFAULT_BELT_WIDTH

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"blur sigma must be positive, got {self.sigma}")
        if self.belt_width < 0:
            raise ValidationError(f"belt width must be non-negative, got {self.belt_width}")
        if self.kernel_extent < 1:
            raise ValidationError(f"kernel extent must be positive, got {self.kernel_extent}")
        if self.sigma not in self.pattern.scenario.default_sigmas:
            logger.debug(
                "sigma %g is outside the default %s set", self.sigma, self.pattern.scenario.value
            )

    @property
    def scenario(self) -> Scenario:
        return self.pattern.scenario

    @property
    def stimulus_id(self) -> str:
        return f"{self.source_id}_{self.pattern.pattern_id}_s{self.sigma:g}"

    def to_dict(self) -> Dict[str, object]:
        return {
            "stimulus_id": self.stimulus_id,
            "source_id": self.source_id,
            "pattern_id": self.pattern.pattern_id,
            "scenario": self.scenario.value,
            "sigma": self.sigma,
            "kernel_extent": self.kernel_extent,
            "belt_width": self.belt_width,
        }


def gaussian_kernel(sigma: float, kernel_extent: int = DEFAULT_KERNEL_EXTENT) -> np.ndarray:
    """Normalized sampled 1-D Gaussian of odd width.

    An even ``kernel_extent`` is rounded up to the next odd width so the
    kernel has a center tap (50 -> 51).
    """
    if not sigma > 0:
        raise DomainError(f"blur sigma must be positive, got {sigma}")
    width = int(kernel_extent) | 1
    radius = width // 2
    taps = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(taps**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(
    img: np.ndarray, sigma: float, kernel_extent: int = DEFAULT_KERNEL_EXTENT
) -> np.ndarray:
    """Separable Gaussian blur with reflected borders; returns float64.

    Color rasters are blurred per channel.
    """
    kernel = gaussian_kernel(sigma, kernel_extent)
    out = np.asarray(img, dtype=np.float64)
    for axis in (0, 1):
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="reflect")
    return out


def blend_profile(
    hq_flags: Sequence[bool], scheme: ZoneScheme, belt_width: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Knots (eccentricity, weight) of the piecewise-linear blend profile.

    Each quality switch at boundary b ramps from the inner zone's weight at
    b to the outer zone's weight at b + belt_width. A belt that starts
    inside the previous one continues from the current value, keeping the
    profile continuous.
    """
    if len(hq_flags) != scheme.zone_count:
        raise ValidationError(
            f"pattern has {len(hq_flags)} zones, scheme has {scheme.zone_count}"
        )
    if belt_width <= 0:
        raise ValidationError("a blend profile needs a positive belt width")
    xs: List[float] = [0.0]
    ys: List[float] = [1.0 if hq_flags[0] else 0.0]
    for k, boundary in enumerate(scheme.inner_boundaries, start=1):
        if hq_flags[k] == hq_flags[k - 1]:
            continue
        start = float(np.interp(boundary, xs, ys))
        while len(xs) > 1 and xs[-1] >= boundary:
            xs.pop()
            ys.pop()
        xs += [boundary, boundary + belt_width]
        ys += [start, 1.0 if hq_flags[k] else 0.0]
    return np.array(xs), np.array(ys)


def blend_weight_map(
    pattern: QualityPattern,
    em: EccentricityMap,
    scheme: ZoneScheme = DEFAULT_ZONE_SCHEME,
    belt_width: float = DEFAULT_BELT_WIDTH,
) -> np.ndarray:
    """Per-pixel weight of the source image: 1 in HQ zones, 0 in LQ zones, ramps in belts."""
    values = np.asarray(em.values, dtype=np.float64)
    if belt_width == 0:
        flags = np.array([False] + list(pattern.hq_flags), dtype=np.float64)
        return flags[zone_map(em, scheme)]
    if belt_width < 0:
        raise ValidationError(f"belt width must be non-negative, got {belt_width}")
    xs, ys = blend_profile(pattern.hq_flags, scheme, belt_width)
    return np.interp(values, xs, ys)


def blend(source: np.ndarray, blurred: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """w * source + (1 - w) * blurred, broadcasting weights over channels."""
    src = np.asarray(source, dtype=np.float64)
    w = weights[..., None] if src.ndim == 3 else weights
    return w * src + (1.0 - w) * blurred


def generate_stimulus(
    source: np.ndarray,
    spec: StimulusSpec,
    em: EccentricityMap,
    scheme: ZoneScheme = DEFAULT_ZONE_SCHEME,
    bit_depth: int = 8,
    blurred: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Blend a source viewport with its blurred copy according to ``spec``.

    ``blurred`` may be passed to reuse a blur shared by several patterns.
    """
    source = np.asarray(source)
    if source.shape[:2] != em.shape:
        raise DimensionMismatchError(em.shape, source.shape[:2], "source/eccentricity map")
    if blurred is None:
        blurred = gaussian_blur(source, spec.sigma, spec.kernel_extent)
    weights = blend_weight_map(spec.pattern, em, scheme, spec.belt_width)
    return to_integer_raster(blend(source, blurred, weights), bit_depth)


def plan_stimuli(
    source_ids: Iterable[str],
    patterns: Iterable[QualityPattern],
    sigma_sets: Optional[Mapping[Scenario, Sequence[float]]] = None,
    kernel_extent: int = DEFAULT_KERNEL_EXTENT,
    belt_width: float = DEFAULT_BELT_WIDTH,
) -> List[StimulusSpec]:
    """Enumerate sources x patterns x (scenario's sigmas) in a fixed order."""
    sigma_sets = dict(DEFAULT_SIGMAS if sigma_sets is None else sigma_sets)
    patterns = list(patterns)
    plan = []
    for source_id in source_ids:
        for pattern in patterns:
            for sigma in sigma_sets.get(pattern.scenario, ()):
                plan.append(
                    StimulusSpec(source_id, pattern, float(sigma), kernel_extent, belt_width)
                )
    return plan


@dataclass
class Stimulus:
    """A generated stimulus; ``data`` is dropped once written to ``path``."""

    spec: StimulusSpec
    path: Optional[Path] = None
    data: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def stimulus_id(self) -> str:
        return self.spec.stimulus_id

    def to_dict(self) -> Dict[str, object]:
        entry = self.spec.to_dict()
        entry["path"] = self.path.name if self.path else None
        return entry


SourceLike = Union[np.ndarray, str, Path]


def _load_source(source: SourceLike) -> Tuple[np.ndarray, int]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(f"source image not found: {path}")
        return read_raster(path)
    array = np.asarray(source)
    return array, 16 if array.dtype == np.uint16 else 8


def generate_database(
    sources: Mapping[str, SourceLike],
    em: EccentricityMap,
    scheme: ZoneScheme = DEFAULT_ZONE_SCHEME,
    patterns: Optional[Iterable[QualityPattern]] = None,
    sigma_sets: Optional[Mapping[Scenario, Sequence[float]]] = None,
    kernel_extent: int = DEFAULT_KERNEL_EXTENT,
    belt_width: float = DEFAULT_BELT_WIDTH,
    out_dir: Optional[Path] = None,
    jobs: int = 1,
) -> List[Stimulus]:
    """Generate every planned stimulus.

    With ``out_dir`` each stimulus is written as ``<stimulus_id>.png`` and
    its pixels are not kept in memory. Work is split per (source, sigma) so
    each blur is computed once; results come back in plan order whatever
    ``jobs`` is.
    """
    patterns = list(PATTERNS.values() if patterns is None else patterns)
    plan = plan_stimuli(sources.keys(), patterns, sigma_sets, kernel_extent, belt_width)
    groups: Dict[Tuple[str, float], List[StimulusSpec]] = {}
    for spec in plan:
        groups.setdefault((spec.source_id, spec.sigma), []).append(spec)

    def run_group(key: Tuple[str, float]) -> List[Stimulus]:
        source_id, sigma = key
        source, bit_depth = _load_source(sources[source_id])
        blurred = gaussian_blur(source, sigma, kernel_extent)
        produced = []
        for spec in groups[key]:
            data = generate_stimulus(source, spec, em, scheme, bit_depth, blurred=blurred)
            if out_dir is None:
                produced.append(Stimulus(spec, data=data))
            else:
                path = write_raster(Path(out_dir) / f"{spec.stimulus_id}.png", data, bit_depth)
                produced.append(Stimulus(spec, path=path))
        logger.info("generated %d stimuli for %s at sigma %g", len(produced), source_id, sigma)
        return produced

    keys = list(groups)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            batches = list(executor.map(run_group, keys))
    else:
        batches = [run_group(key) for key in keys]

    by_id = {s.stimulus_id: s for batch in batches for s in batch}
    return [by_id[spec.stimulus_id] for spec in plan]
