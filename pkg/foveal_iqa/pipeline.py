"""
Batch pipeline over a dataset manifest.

Stages, in dependency order:

    geometry      derived virtual viewport, angular resolution and zone coverage
    extract       source viewports rendered from the equirectangular images
    make-stimuli  the non-uniform-quality stimulus database
    score         every selected metric plus zone MSEs for every stimulus
    fit-weights   per-image and pooled zone weights fitted to MOS
    evaluate      logistic mapping and PCC/RMSE per metric and group
    report        evaluation outputs plus scatter plots of score vs MOS

Later stages rebuild the artifacts they depend on when those are missing or
do not match the manifest, so each stage can be run on its own. Outputs
depend only on the manifest, the input bytes and the seed, whatever the
number of jobs.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from .errors import (
    DimensionMismatchError,
    FovealIQAError,
    InsufficientDataError,
    NonIdentifiableError,
    PipelineError,
    UndefinedCorrelationError,
    ValidationError,
)
from .evaluation import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_RESTARTS,
    DEFAULT_TOLERANCE,
    SubjectiveRecord,
    evaluate_metric,
    fit_zone_weights,
)
from .file_utils import write_text_atomic
from .geometry import (
    degrees_per_pixel,
    display_nyquist,
    eccentricity_map,
    zone_area_fractions,
    zone_map,
    zone_pixel_counts,
)
from .manifest import Manifest, SourceEntry
from .projection import extract_viewport
from .raster_io import ViewportImage, read_equirect, read_viewport, write_matrix, write_raster
from .reports import (
    FitRow,
    ScoresTable,
    format_evaluation_table,
    read_external_scores,
    read_mos_csv,
    read_scores_csv,
    write_fit_csv,
    write_mos_csv,
    write_scatter_svg,
    write_scores_csv,
)
from .scoring import DEFAULT_METRICS, ScoringContext, score_pair, validate_metric_ids
from .stimulus import StimulusSpec, generate_database

logger = logging.getLogger(__name__)

COMMANDS = ("geometry", "extract", "make-stimuli", "score", "fit-weights", "evaluate", "report")
GROUP_BY_CHOICES = ("image", "all")
POOLED_GROUP = "all"

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class RunOptions:
    """Settings of one pipeline run after CLI, environment, manifest and config are merged."""

    out_dir: Path
    seed: int = 0
    jobs: int = 1
    metrics: List[str] = field(default_factory=lambda: list(DEFAULT_METRICS))
    group_by: str = "image"
    max_value: Optional[float] = None
    restarts: int = DEFAULT_RESTARTS
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.jobs < 1:
            raise ValidationError(f"jobs must be at least 1, got {self.jobs}")
        if self.group_by not in GROUP_BY_CHOICES:
            raise ValidationError(
                f"group_by must be one of {', '.join(GROUP_BY_CHOICES)}, got {self.group_by!r}"
            )
        if self.max_value is not None and not self.max_value > 0:
            raise ValidationError(f"max_value must be positive, got {self.max_value}")
        self.metrics = validate_metric_ids(self.metrics)

    @property
    def fit_options(self) -> Dict[str, float]:
        return {
            "restarts": self.restarts,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
        }


@dataclass
class PipelineResult:
    """What a command produced: files written and text for the terminal."""

    command: str
    artifacts: List[Path] = field(default_factory=list)
    text: str = ""


class Pipeline:
    """Runs pipeline commands for one manifest."""

    def __init__(self, manifest: Manifest, options: RunOptions):
        self.manifest = manifest
        self.options = options
        self.geometry = manifest.virtual_geometry
        self.eccentricity = eccentricity_map(self.geometry)
        self._viewports: Optional[Dict[str, ViewportImage]] = None

    # --- layout ---------------------------------------------------------------

    @property
    def out_dir(self) -> Path:
        return self.options.out_dir

    @property
    def viewport_dir(self) -> Path:
        return self.out_dir / "viewports"

    @property
    def stimulus_dir(self) -> Path:
        return self.out_dir / "stimuli"

    @property
    def stimuli_index(self) -> Path:
        return self.out_dir / "stimuli.json"

    @property
    def scores_path(self) -> Path:
        return self.out_dir / "scores.csv"

    @property
    def weights_path(self) -> Path:
        return self.out_dir / "weights.csv"

    @property
    def evaluation_path(self) -> Path:
        return self.out_dir / "evaluation.csv"

    # --- helpers ----------------------------------------------------------------

    def _map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """Apply ``fn`` to every item, in parallel when jobs > 1; keeps input order."""
        if self.options.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.options.jobs) as executor:
                return list(executor.map(fn, items))
        return [fn(item) for item in items]

    def _render_viewport(self, entry: SourceEntry) -> ViewportImage:
        if entry.projection == "viewport":
            viewport = read_viewport(entry.path, geometry=self.geometry)
            if viewport.shape != self.geometry.shape:
                raise DimensionMismatchError(self.geometry.shape, viewport.shape, entry.source_id)
            return viewport
        spec = self.manifest.viewport_spec(entry)
        viewport = extract_viewport(read_equirect(entry.path), spec)
        logger.info("extracted %s at yaw %g, pitch %g", entry.source_id, spec.yaw, spec.pitch)
        return ViewportImage(viewport.data, viewport.bit_depth, self.geometry)

    def source_viewports(self) -> Dict[str, ViewportImage]:
        """Reference viewports keyed by source id, rendered once per run."""
        if self._viewports is None:
            images = self.manifest.images
            rendered = self._map(self._render_viewport, images)
            self._viewports = {e.source_id: v for e, v in zip(images, rendered)}
        return self._viewports

    def max_value(self) -> float:
        if self.options.max_value is not None:
            return float(self.options.max_value)
        first = next(iter(self.source_viewports().values()))
        return float(first.max_value)

    def _stimulus_path(self, spec: StimulusSpec) -> Path:
        return self.stimulus_dir / f"{spec.stimulus_id}.png"

    def _stimuli_current(self, plan: Sequence[StimulusSpec]) -> bool:
        if not self.stimuli_index.is_file():
            return False
        try:
            entries = json.loads(self.stimuli_index.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return False
        expected = [spec.to_dict() for spec in plan]
        recorded = [
            {k: v for k, v in entry.items() if k not in ("path", "geometry")} for entry in entries
        ]
        if recorded != expected:
            return False
        return all(self._stimulus_path(spec).is_file() for spec in plan)

    def ensure_stimuli(self) -> List[StimulusSpec]:
        plan = self.manifest.planned_stimuli()
        if not self._stimuli_current(plan):
            logger.info("stimulus database missing or stale; generating it")
            self.make_stimuli()
        return plan

    def ensure_scores(self) -> ScoresTable:
        if self.scores_path.is_file():
            table = read_scores_csv(self.scores_path)
            planned = {spec.stimulus_id for spec in self.manifest.planned_stimuli()}
            if planned <= set(table.stimulus_ids):
                return table
            logger.info("%s does not cover the planned stimuli; rescoring", self.scores_path)
        self.score()
        return read_scores_csv(self.scores_path)

    def load_mos(self) -> Dict[str, SubjectiveRecord]:
        if self.manifest.mos is None:
            raise ValidationError("the manifest names no MOS file ('mos')")
        return read_mos_csv(self.manifest.mos)

    def groups(self, stimulus_ids: Sequence[str]) -> Dict[str, List[str]]:
        """Stimulus ids per evaluation group: one per source image and the pooled set."""
        source_of = {spec.stimulus_id: spec.source_id for spec in self.manifest.planned_stimuli()}
        groups: Dict[str, List[str]] = {}
        if self.options.group_by == "image":
            for source_id in self.manifest.source_ids:
                members = [s for s in stimulus_ids if source_of.get(s) == source_id]
                if members:
                    groups[source_id] = members
        groups[POOLED_GROUP] = list(stimulus_ids)
        return groups

    def scenarios(self) -> Dict[str, str]:
        return {spec.stimulus_id: spec.scenario.value for spec in self.manifest.planned_stimuli()}

    # --- stages -------------------------------------------------------------------

    def geometry_stage(self) -> PipelineResult:
        display = self.manifest.display
        vg = self.geometry
        scheme = self.manifest.scheme
        zones = zone_map(self.eccentricity, scheme)
        counts = zone_pixel_counts(zones, scheme.zone_count)
        fractions = zone_area_fractions(zones, scheme.zone_count)
        dpp_x, dpp_y = degrees_per_pixel(vg)

        lines = [
            "Display",
            f"  focal length F:          {display.focal_length:.4f} mm",
            f"  lens to display S0:      {display.lens_to_display:.4f} mm",
            f"  lens to eye S2:          {display.lens_to_eye:.4f} mm",
            f"  viewport:                {display.viewport_width_px} x "
            f"{display.viewport_height_px} px, {display.viewport_width_mm:.4f} x "
            f"{display.viewport_height_mm:.4f} mm",
            "Virtual viewport",
            f"  lens to virtual S1:      {vg.lens_to_virtual:.4f} mm",
            f"  eye to virtual S3:       {vg.eye_to_virtual:.4f} mm",
            f"  size:                    {vg.width_mm:.4f} x {vg.height_mm:.4f} mm",
            f"  magnification:           {vg.magnification:.4f}",
            f"  degrees per pixel:       {dpp_x:.6f} x {dpp_y:.6f}",
            f"  display Nyquist:         {display_nyquist(vg):.4f} cycles/degree",
            f"  max eccentricity:        {float(self.eccentricity.values.max()):.4f} deg",
            "Zones",
        ]
        for k in range(1, scheme.zone_count + 1):
            lines.append(
                f"  {scheme.label(k):<32} {int(counts[k - 1]):>9} px  {fractions[k - 1]:7.2%}"
            )

        report = {
            "display": display.to_dict(),
            "virtual": vg.to_dict(),
            "degrees_per_pixel": [dpp_x, dpp_y],
            "display_nyquist": display_nyquist(vg),
            "zones": [
                {
                    "zone": k,
                    "interval_deg": [scheme.interval(k)[0], _json_float(scheme.interval(k)[1])],
                    "name": scheme.names[k - 1] if scheme.names else None,
                    "pixels": int(counts[k - 1]),
                    "fraction": float(fractions[k - 1]),
                }
                for k in range(1, scheme.zone_count + 1)
            ],
        }
        artifacts = [
            write_text_atomic(self.out_dir / "geometry.json", json.dumps(report, indent=2) + "\n"),
            write_matrix(self.out_dir / "eccentricity.npy", self.eccentricity.values),
            write_matrix(self.out_dir / "zones.npy", zones),
        ]
        return PipelineResult("geometry", artifacts, "\n".join(lines) + "\n")

    def extract(self) -> PipelineResult:
        artifacts = [
            write_raster(self.viewport_dir / f"{source_id}.png", vp.data, vp.bit_depth)
            for source_id, vp in self.source_viewports().items()
        ]
        return PipelineResult("extract", artifacts, f"Extracted {len(artifacts)} viewport(s)\n")

    def make_stimuli(self) -> PipelineResult:
        viewports = self.source_viewports()
        manifest = self.manifest
        stimuli = generate_database(
            {source_id: vp.data for source_id, vp in viewports.items()},
            self.eccentricity,
            manifest.scheme,
            manifest.patterns,
            manifest.sigmas,
            manifest.kernel_extent,
            manifest.belt_width,
            out_dir=self.stimulus_dir,
            jobs=self.options.jobs,
        )
        geometry = self.geometry.to_dict()
        index = [dict(stimulus.to_dict(), geometry=geometry) for stimulus in stimuli]
        write_text_atomic(self.stimuli_index, json.dumps(index, indent=2) + "\n")
        artifacts = [s.path for s in stimuli if s.path is not None] + [self.stimuli_index]
        return PipelineResult(
            "make-stimuli", artifacts, f"Generated {len(stimuli)} stimuli in {self.stimulus_dir}\n"
        )

    def score(self) -> PipelineResult:
        plan = self.ensure_stimuli()
        references = self.source_viewports()
        ctx = ScoringContext.build(
            self.geometry, self.manifest.scheme, zwf_weights=self.manifest.zwf_weights
        )
        metric_ids = list(self.options.metrics)
        if "ZWF" in metric_ids and ctx.zwf_weights is None:
            logger.warning("no zone weights for %d zones; skipping ZWF", ctx.zone_count)
            metric_ids.remove("ZWF")

        def score_one(spec: StimulusSpec):
            ref = references[spec.source_id]
            dist = read_viewport(self._stimulus_path(spec), geometry=self.geometry)
            return score_pair(ref, dist, ctx, metric_ids)

        results = self._map(score_one, plan)
        table = ScoresTable(zone_count=ctx.zone_count)
        for spec, (scores, zone_mse) in zip(plan, results):
            table.add_scores(spec.stimulus_id, scores, zone_mse)
        if self.manifest.external_scores is not None:
            table.merge(read_external_scores(self.manifest.external_scores, ctx.zone_count))

        path = write_scores_csv(table, self.scores_path)
        return PipelineResult(
            "score", [path], f"Scored {len(plan)} stimuli with {len(metric_ids)} metric(s)\n"
        )

    def fit_weights(self) -> PipelineResult:
        table = self.ensure_scores()
        mos = self.load_mos()
        zone_mses = table.zone_mses()
        ids = [s for s in sorted(zone_mses) if s in mos]
        max_value = self.max_value()

        def fit_group(item: Tuple[str, List[str]]) -> Optional[FitRow]:
            group, members = item
            try:
                result = fit_zone_weights(
                    [zone_mses[s] for s in members],
                    [mos[s].mos for s in members],
                    max_value=max_value,
                    seed=self.options.seed,
                    **self.options.fit_options,
                )
            except (InsufficientDataError, NonIdentifiableError) as e:
                logger.warning("skipping zone-weight fit for %s: %s", group, e)
                return None
            if not result.converged:
                logger.warning("zone-weight fit for %s did not converge", group)
            return FitRow("ZWF", group, result)

        fitted = self._map(fit_group, list(self.groups(ids).items()))
        rows = [row for row in fitted if row is not None]
        path = write_fit_csv(rows, self.weights_path, self.manifest.scheme.zone_count)
        header = " ".join(f"{'w' + str(k):>7}" for k in range(1, table.zone_count + 1))
        lines = [f"{'Group':<10} {header} {'PCC':>7} {'RMSE':>7}"]
        for row in rows:
            weights = row.result.weights.weights if row.result.weights else ()
            lines.append(
                f"{row.group:<10} "
                + " ".join(f"{w:7.3f}" for w in weights)
                + f" {row.result.pcc:7.4f} {row.result.rmse:7.4f}"
            )
        return PipelineResult("fit-weights", [path], "\n".join(lines) + "\n")

    def evaluation_rows(self) -> Tuple[List[FitRow], ScoresTable, Dict[str, SubjectiveRecord]]:
        table = self.ensure_scores()
        mos = self.load_mos()
        tasks = []
        for metric_id in table.metric_ids:
            scores = table.scores_for(metric_id)
            ids = [s for s in sorted(scores) if s in mos]
            missing = len(scores) - len(ids)
            if missing:
                logger.warning("%s: %d scored stimuli have no MOS", metric_id, missing)
            for group, members in self.groups(ids).items():
                x = [scores[s] for s in members]
                tasks.append((metric_id, group, x, [mos[s].mos for s in members]))

        def evaluate_one(task) -> Optional[FitRow]:
            metric_id, group, x, y = task
            try:
                result = evaluate_metric(x, y, seed=self.options.seed, **self.options.fit_options)
            except (InsufficientDataError, UndefinedCorrelationError) as e:
                logger.warning("skipping %s / %s: %s", metric_id, group, e)
                return None
            return FitRow(metric_id, group, result)

        rows = [row for row in self._map(evaluate_one, tasks) if row is not None]
        return rows, table, mos

    def _write_evaluation(self, command: str, rows: List[FitRow]) -> PipelineResult:
        text = format_evaluation_table(rows)
        artifacts = [
            write_fit_csv(rows, self.evaluation_path, self.manifest.scheme.zone_count),
            write_text_atomic(self.out_dir / "evaluation.txt", text),
        ]
        return PipelineResult(command, artifacts, text)

    def evaluate(self) -> PipelineResult:
        rows, _, _ = self.evaluation_rows()
        return self._write_evaluation("evaluate", rows)

    def report(self) -> PipelineResult:
        rows, table, mos = self.evaluation_rows()
        result = self._write_evaluation("report", rows)
        pooled = {row.metric_id: row.result for row in rows if row.group == POOLED_GROUP}
        scenarios = self.scenarios()
        mos_values = {s: r.mos for s, r in mos.items()}
        for metric_id in table.metric_ids:
            result.artifacts.append(
                write_scatter_svg(
                    metric_id,
                    table.scores_for(metric_id),
                    mos_values,
                    scenarios,
                    self.out_dir / "plots" / f"{metric_id}.svg",
                    fit=pooled.get(metric_id),
                )
            )
        result.artifacts.append(write_mos_csv(mos, self.out_dir / "mos_summary.csv"))
        return result

    def run(self, command: str) -> PipelineResult:
        stages: Dict[str, Callable[[], PipelineResult]] = {
            "geometry": self.geometry_stage,
            "extract": self.extract,
            "make-stimuli": self.make_stimuli,
            "score": self.score,
            "fit-weights": self.fit_weights,
            "evaluate": self.evaluate,
            "report": self.report,
        }
        if command not in stages:
            raise ValidationError(
                f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}"
            )
        logger.info("running %s into %s", command, self.out_dir)
        try:
            return stages[command]()
        except PipelineError:
            raise
        except (FovealIQAError, OSError, ValueError) as e:
            raise PipelineError(command, str(e)) from e


def _json_float(value: float):
    return value if math.isfinite(value) else None


def run_pipeline(manifest: Manifest, command: str, options: RunOptions) -> PipelineResult:
    """Run one command; failures surface as :class:`PipelineError` naming the stage."""
    return Pipeline(manifest, options).run(command)
