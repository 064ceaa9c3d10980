"""Dataset manifests.

A manifest names the source images and every setting that shapes the
stimulus database: viewing geometry, zone scheme, patterns and blur grids.
It is JSON, or YAML when PyYAML is installed. Relative paths resolve
against the manifest's directory, and every check runs at load time so a
bad manifest fails before any stage does work.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ManifestError, ValidationError
from .file_utils import resolve_path
from .geometry import (
    DEFAULT_ZONE_SCHEME,
    GEAR_VR,
    DisplayGeometry,
    VirtualGeometry,
    ZoneScheme,
    derive_virtual_geometry,
)
from .projection import ViewportSpec
from .stimulus import (
    DEFAULT_BELT_WIDTH,
    DEFAULT_KERNEL_EXTENT,
    DEFAULT_SIGMAS,
    PATTERNS,
    QualityPattern,
    Scenario,
    StimulusSpec,
    plan_stimuli,
)
from .zwf import ZoneWeights, resolve_weights

logger = logging.getLogger(__name__)

DEFAULT_FOV_DEG = 96.0
PROJECTIONS = ("equirect", "viewport")

_TOP_LEVEL_KEYS = {
    "seed",
    "output_dir",
    "geometry",
    "zones",
    "fov_deg",
    "images",
    "patterns",
    "sigmas",
    "belt_width_deg",
    "kernel_extent",
    "mos",
    "external_scores",
    "zwf_weights",
}


@dataclass(frozen=True)
class SourceEntry:
    """One source image and the gaze direction its viewport is taken at."""

    source_id: str
    path: Path
    yaw: float = 0.0
    pitch: float = 0.0
    projection: str = "equirect"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.source_id,
            "path": str(self.path),
            "yaw": self.yaw,
            "pitch": self.pitch,
            "projection": self.projection,
        }


@dataclass
class Manifest:
    """A validated dataset manifest."""

    path: Path
    display: DisplayGeometry
    images: List[SourceEntry]
    scheme: ZoneScheme = DEFAULT_ZONE_SCHEME
    fov_deg: float = DEFAULT_FOV_DEG
    patterns: List[QualityPattern] = field(default_factory=lambda: list(PATTERNS.values()))
    sigmas: Dict[Scenario, Tuple[float, ...]] = field(default_factory=lambda: dict(DEFAULT_SIGMAS))
    belt_width: float = DEFAULT_BELT_WIDTH
    kernel_extent: int = DEFAULT_KERNEL_EXTENT
    seed: Optional[int] = None
    output_dir: Optional[Path] = None
    mos: Optional[Path] = None
    external_scores: Optional[Path] = None
    zwf_weights: Optional[ZoneWeights] = None

    @property
    def base_dir(self) -> Path:
        return self.path.parent

    @property
    def virtual_geometry(self) -> VirtualGeometry:
        return derive_virtual_geometry(self.display)

    @property
    def source_ids(self) -> List[str]:
        return [entry.source_id for entry in self.images]

    def viewport_spec(self, entry: SourceEntry) -> ViewportSpec:
        vg = self.virtual_geometry
        return ViewportSpec(
            yaw=entry.yaw,
            pitch=entry.pitch,
            fov_h=self.fov_deg,
            out_width=vg.width_px,
            out_height=vg.height_px,
        )

    def planned_stimuli(self) -> List[StimulusSpec]:
        return plan_stimuli(
            self.source_ids, self.patterns, self.sigmas, self.kernel_extent, self.belt_width
        )


# --- parsing helpers -------------------------------------------------------


def _number(value: Any, field_path: str, positive: bool = False, minimum=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"expected a number, got {value!r}", field_path)
    if positive and not value > 0:
        raise ManifestError(f"must be positive, got {value}", field_path)
    if minimum is not None and value < minimum:
        raise ManifestError(f"must be at least {minimum}, got {value}", field_path)
    return float(value)


def _integer(value: Any, field_path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ManifestError(f"expected an integer, got {value!r}", field_path)
    if value < minimum:
        raise ManifestError(f"must be at least {minimum}, got {value}", field_path)
    return value


def _pair(value: Any, field_path: str, integer: bool = False) -> Tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ManifestError(f"expected a [width, height] pair, got {value!r}", field_path)
    if integer:
        return (
            _integer(value[0], f"{field_path}[0]", 1),
            _integer(value[1], f"{field_path}[1]", 1),
        )
    return (
        _number(value[0], f"{field_path}[0]", positive=True),
        _number(value[1], f"{field_path}[1]", positive=True),
    )


def _mapping(value: Any, field_path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ManifestError(f"expected an object, got {type(value).__name__}", field_path)
    return value


def _existing_file(base: Path, value: Any, field_path: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ManifestError(f"expected a file path, got {value!r}", field_path)
    path = resolve_path(base, value)
    if not path.is_file():
        raise ManifestError(f"file not found: {path}", field_path)
    return path


def parse_geometry(data: Optional[Mapping[str, Any]]) -> DisplayGeometry:
    """Build the display geometry from either a panel spec or explicit viewport size."""
    if data is None:
        return GEAR_VR
    data = _mapping(data, "geometry")
    optics = {}
    for key in ("focal_length_mm", "lens_to_display_mm", "lens_to_eye_mm"):
        if key not in data:
            raise ManifestError("missing required field", f"geometry.{key}")
        optics[key] = _number(data[key], f"geometry.{key}")
    if "viewport_px" not in data:
        raise ManifestError("missing required field", "geometry.viewport_px")
    viewport_px = _pair(data["viewport_px"], "geometry.viewport_px", integer=True)

    try:
        if "screen_diagonal_in" in data:
            if "panel_px" not in data:
                raise ManifestError("required with screen_diagonal_in", "geometry.panel_px")
            return DisplayGeometry.from_screen(
                focal_length=optics["focal_length_mm"],
                lens_to_display=optics["lens_to_display_mm"],
                lens_to_eye=optics["lens_to_eye_mm"],
                diagonal_inches=_number(
                    data["screen_diagonal_in"], "geometry.screen_diagonal_in", positive=True
                ),
                panel_px=_pair(data["panel_px"], "geometry.panel_px", integer=True),
                viewport_px=viewport_px,
            )
        if "viewport_mm" not in data:
            raise ManifestError(
                "either viewport_mm or screen_diagonal_in with panel_px is required",
                "geometry",
            )
        width_mm, height_mm = _pair(data["viewport_mm"], "geometry.viewport_mm")
        return DisplayGeometry(
            focal_length=optics["focal_length_mm"],
            lens_to_display=optics["lens_to_display_mm"],
            lens_to_eye=optics["lens_to_eye_mm"],
            viewport_width_px=int(viewport_px[0]),
            viewport_height_px=int(viewport_px[1]),
            viewport_width_mm=width_mm,
            viewport_height_mm=height_mm,
        )
    except ManifestError:
        raise
    except ValidationError as e:
        raise ManifestError(str(e), "geometry") from e


def parse_zones(data: Optional[Mapping[str, Any]]) -> ZoneScheme:
    if data is None:
        return DEFAULT_ZONE_SCHEME
    data = _mapping(data, "zones")
    boundaries = data.get("boundaries_deg")
    if not isinstance(boundaries, list) or not boundaries:
        raise ManifestError("expected a non-empty list", "zones.boundaries_deg")
    values = [_number(v, f"zones.boundaries_deg[{i}]") for i, v in enumerate(boundaries)]
    try:
        return ZoneScheme.from_boundaries(values)
    except ValidationError as e:
        raise ManifestError(str(e), "zones.boundaries_deg") from e


def parse_images(base: Path, data: Any) -> List[SourceEntry]:
    if not isinstance(data, list) or not data:
        raise ManifestError("expected a non-empty list of images", "images")
    entries: List[SourceEntry] = []
    seen: Dict[str, int] = {}
    for index, item in enumerate(data):
        where = f"images[{index}]"
        item = _mapping(item, where)
        source_id = item.get("id")
        if not isinstance(source_id, str) or not source_id:
            raise ManifestError("expected a non-empty string id", f"{where}.id")
        if source_id in seen:
            raise ManifestError(
                f"duplicate image id {source_id!r} (first used by images[{seen[source_id]}])",
                f"{where}.id",
            )
        seen[source_id] = index
        projection = item.get("projection", "equirect")
        if projection not in PROJECTIONS:
            raise ManifestError(
                f"expected one of {', '.join(PROJECTIONS)}, got {projection!r}",
                f"{where}.projection",
            )
        pitch = _number(item.get("pitch", 0.0), f"{where}.pitch")
        if not -90.0 <= pitch <= 90.0:
            raise ManifestError(f"must lie in [-90, 90], got {pitch}", f"{where}.pitch")
        entries.append(
            SourceEntry(
                source_id=source_id,
                path=_existing_file(base, item.get("path"), f"{where}.path"),
                yaw=_number(item.get("yaw", 0.0), f"{where}.yaw"),
                pitch=pitch,
                projection=projection,
            )
        )
    return entries


def parse_patterns(data: Any, scheme: ZoneScheme) -> List[QualityPattern]:
    if data is None:
        patterns = list(PATTERNS.values())
    else:
        if not isinstance(data, list) or not data:
            raise ManifestError("expected a non-empty list of pattern ids", "patterns")
        patterns = []
        for index, pattern_id in enumerate(data):
            if pattern_id not in PATTERNS:
                raise ManifestError(
                    f"unknown pattern {pattern_id!r}; expected one of {', '.join(PATTERNS)}",
                    f"patterns[{index}]",
                )
            if PATTERNS[pattern_id] in patterns:
                raise ManifestError(f"duplicate pattern {pattern_id!r}", f"patterns[{index}]")
            patterns.append(PATTERNS[pattern_id])
    for pattern in patterns:
        if pattern.zone_count != scheme.zone_count:
            raise ManifestError(
                f"pattern {pattern.pattern_id} covers {pattern.zone_count} zones "
                f"but the scheme has {scheme.zone_count}",
                "zones.boundaries_deg",
            )
    return patterns


def parse_sigmas(data: Any) -> Dict[Scenario, Tuple[float, ...]]:
    """Per-scenario blur levels; scenarios left out keep their defaults."""
    sigmas = dict(DEFAULT_SIGMAS)
    if data is None:
        return sigmas
    data = _mapping(data, "sigmas")
    for key, values in data.items():
        try:
            scenario = Scenario(key)
        except ValueError:
            raise ManifestError(
                f"unknown scenario {key!r}; expected S1 or S2", f"sigmas.{key}"
            ) from None
        if not isinstance(values, list) or not values:
            raise ManifestError("expected a non-empty list", f"sigmas.{key}")
        parsed = tuple(
            _number(v, f"sigmas.{key}[{i}]", positive=True) for i, v in enumerate(values)
        )
        if len(set(parsed)) != len(parsed):
            raise ManifestError(f"duplicate sigma in {list(parsed)}", f"sigmas.{key}")
        sigmas[scenario] = parsed
    return sigmas


def parse_manifest(data: Mapping[str, Any], path: Path) -> Manifest:
    """Validate decoded manifest content; ``path`` anchors relative paths."""
    data = _mapping(data, "<root>")
    unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
    if unknown:
        logger.warning("%s: ignoring unknown manifest keys %s", path, ", ".join(unknown))
    base = path.parent

    scheme = parse_zones(data.get("zones"))
    manifest = Manifest(
        path=path,
        display=parse_geometry(data.get("geometry")),
        images=parse_images(base, data.get("images")),
        scheme=scheme,
        patterns=parse_patterns(data.get("patterns"), scheme),
        sigmas=parse_sigmas(data.get("sigmas")),
    )
    if "fov_deg" in data:
        manifest.fov_deg = _number(data["fov_deg"], "fov_deg", positive=True)
        if manifest.fov_deg >= 180:
            raise ManifestError(f"must be below 180, got {manifest.fov_deg}", "fov_deg")
    if "belt_width_deg" in data:
        manifest.belt_width = _number(data["belt_width_deg"], "belt_width_deg", minimum=0)
    if "kernel_extent" in data:
        manifest.kernel_extent = _integer(data["kernel_extent"], "kernel_extent", 1)
    if "seed" in data:
        manifest.seed = _integer(data["seed"], "seed")
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str) or not data["output_dir"]:
            raise ManifestError("expected a directory path", "output_dir")
        manifest.output_dir = resolve_path(base, data["output_dir"])
    if "mos" in data:
        manifest.mos = _existing_file(base, data["mos"], "mos")
    if "external_scores" in data:
        manifest.external_scores = _existing_file(
            base, data["external_scores"], "external_scores"
        )
    if "zwf_weights" in data:
        manifest.zwf_weights = _parse_weights(data["zwf_weights"], scheme)

    try:
        manifest.virtual_geometry
    except ValidationError as e:
        raise ManifestError(str(e), "geometry") from e
    return manifest


def _parse_weights(value: Union[str, Sequence[float]], scheme: ZoneScheme) -> ZoneWeights:
    if not isinstance(value, (str, list)):
        raise ManifestError(
            f"expected a weight-set name or a list, got {value!r}", "zwf_weights"
        )
    try:
        weights = resolve_weights(value)
    except (ValidationError, TypeError) as e:
        raise ManifestError(str(e), "zwf_weights") from e
    if weights.zone_count != scheme.zone_count:
        raise ManifestError(
            f"{weights.zone_count} weights for {scheme.zone_count} zones", "zwf_weights"
        )
    return weights


def _decode(path: Path) -> Any:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            import yaml  # type: ignore[import-untyped]
        except ImportError:
            raise ManifestError(
                "YAML manifests need PyYAML (pip install foveal-iqa[yaml])"
            ) from None
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ManifestError(f"{path}: invalid YAML: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e


def load_manifest(path: Union[str, Path]) -> Manifest:
    """Read and validate a manifest file.

    Args:
        path: JSON (or YAML) manifest

    Returns:
        The validated Manifest

    Raises:
        FileNotFoundError: the manifest itself does not exist
        ManifestError: schema violations, duplicate ids or missing referenced files
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    manifest = parse_manifest(_decode(path), path)
    logger.info(
        "loaded %s: %d images, %d planned stimuli",
        path,
        len(manifest.images),
        len(manifest.planned_stimuli()),
    )
    return manifest
