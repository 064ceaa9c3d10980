"""Score tables, subjective data and evaluation reports.

File formats:

* scores CSV: ``stimulus_id,metric_id,score,provenance,mse_z1..mse_zK``,
  rows sorted by (stimulus_id, metric_id), floats at 9 significant digits,
  infinite scores written as ``inf``; zone MSE cells are blank for absent
  zones and for external scores.
* fit CSV: ``metric,group,beta1..beta5,w1..wK,pcc,rmse,converged``.
* MOS CSV: either ``stimulus_id,mos`` (optionally ``ci95``) or raw ratings
  ``stimulus_id,score`` with one row per rating.
* external scores CSV: ``stimulus_id,metric_id,score``.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .errors import ValidationError  # noqa: E402
from .evaluation import FitResult, SubjectiveRecord, logistic5, mos_with_ci  # noqa: E402
from .file_utils import atomic_output, write_text_atomic  # noqa: E402
from .stimulus import Scenario  # noqa: E402
from .zwf import ZoneMseVector  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"
PROVENANCES = ("computed", "external")
SCORE_COLUMNS = ["stimulus_id", "metric_id", "score", "provenance"]

PathLike = Union[str, Path]


def _write_frame(df: pd.DataFrame, path: PathLike) -> Path:
    buffer = io.StringIO()
    df.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return write_text_atomic(path, buffer.getvalue())


def _read_frame(path: PathLike, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"CSV not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
    return df


def _numeric(series: pd.Series, path: PathLike, column: str) -> pd.Series:
    try:
        return pd.to_numeric(series.replace("", np.nan), errors="raise").astype(np.float64)
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{path}: non-numeric value in column {column!r}: {e}") from e


# --- scores ------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreRow:
    stimulus_id: str
    metric_id: str
    score: float
    provenance: str = "computed"
    zone_mse: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        if math.isnan(self.score):
            raise ValidationError(f"{self.stimulus_id}/{self.metric_id}: score is NaN")


@dataclass
class ScoresTable:
    """Scores keyed by (stimulus_id, metric_id) with per-stimulus zone MSEs."""

    zone_count: int = 5
    rows: Dict[Tuple[str, str], ScoreRow] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def add(self, row: ScoreRow) -> None:
        key = (row.stimulus_id, row.metric_id)
        if key in self.rows:
            raise ValidationError(f"duplicate score for stimulus {key[0]!r}, metric {key[1]!r}")
        if row.zone_mse and len(row.zone_mse) != self.zone_count:
            raise ValidationError(
                f"{row.stimulus_id}: {len(row.zone_mse)} zone MSEs for {self.zone_count} zones"
            )
        self.rows[key] = row

    def add_scores(
        self, stimulus_id: str, scores: Mapping[str, float], zone_mse: ZoneMseVector
    ) -> None:
        for metric_id, score in scores.items():
            self.add(ScoreRow(stimulus_id, metric_id, float(score), "computed", zone_mse.mse))

    def sorted_rows(self) -> List[ScoreRow]:
        return [self.rows[key] for key in sorted(self.rows)]

    @property
    def metric_ids(self) -> List[str]:
        """Metric ids in first-seen order of the sorted rows."""
        return list(dict.fromkeys(row.metric_id for row in self.sorted_rows()))

    @property
    def stimulus_ids(self) -> List[str]:
        return sorted({key[0] for key in self.rows})

    def scores_for(self, metric_id: str) -> Dict[str, float]:
        return {
            row.stimulus_id: row.score for row in self.sorted_rows() if row.metric_id == metric_id
        }

    def zone_mses(self) -> Dict[str, ZoneMseVector]:
        """One zone MSE vector per stimulus that has computed scores."""
        result: Dict[str, ZoneMseVector] = {}
        for row in self.sorted_rows():
            if row.zone_mse and row.stimulus_id not in result:
                counts = tuple(0 if math.isnan(v) else 1 for v in row.zone_mse)
                result[row.stimulus_id] = ZoneMseVector(row.zone_mse, counts)
        return result

    def merge(self, other: "ScoresTable") -> None:
        for row in other.sorted_rows():
            self.add(row)


def scores_header(zone_count: int) -> List[str]:
    return SCORE_COLUMNS + [f"mse_z{k}" for k in range(1, zone_count + 1)]


def write_scores_csv(table: ScoresTable, path: PathLike) -> Path:
    """Write ``table`` atomically; an empty table yields a header-only file."""
    header = scores_header(table.zone_count)
    records = []
    for row in table.sorted_rows():
        zone_values = list(row.zone_mse) if row.zone_mse else [math.nan] * table.zone_count
        records.append([row.stimulus_id, row.metric_id, row.score, row.provenance] + zone_values)
    df = pd.DataFrame(records, columns=header)
    path = _write_frame(df, path)
    logger.info("wrote %d score rows to %s", len(records), path)
    return path


def read_scores_csv(path: PathLike) -> ScoresTable:
    df = _read_frame(path, SCORE_COLUMNS)
    zone_columns = [c for c in df.columns if c.startswith("mse_z")]
    table = ScoresTable(zone_count=len(zone_columns))
    scores = _numeric(df["score"], path, "score")
    zones = [_numeric(df[c], path, c) for c in zone_columns]
    for i in range(len(df)):
        zone_mse = tuple(float(col.iloc[i]) for col in zones)
        if all(math.isnan(v) for v in zone_mse):
            zone_mse = ()
        table.add(
            ScoreRow(
                df["stimulus_id"].iloc[i],
                df["metric_id"].iloc[i],
                float(scores.iloc[i]),
                df["provenance"].iloc[i],
                zone_mse,
            )
        )
    return table


def read_external_scores(path: PathLike, zone_count: int = 5) -> ScoresTable:
    """Scores produced by other tools, tagged with provenance ``external``."""
    df = _read_frame(path, ["stimulus_id", "metric_id", "score"])
    scores = _numeric(df["score"], path, "score")
    table = ScoresTable(zone_count=zone_count)
    for i in range(len(df)):
        table.add(
            ScoreRow(
                df["stimulus_id"].iloc[i],
                df["metric_id"].iloc[i],
                float(scores.iloc[i]),
                "external",
            )
        )
    logger.info("read %d external scores for %s", len(table), ", ".join(table.metric_ids))
    return table


# --- subjective data ---------------------------------------------------------


def read_mos_csv(path: PathLike) -> Dict[str, SubjectiveRecord]:
    """Load MOS per stimulus from aggregated or raw-rating CSV."""
    df = _read_frame(path, ["stimulus_id"])
    records: Dict[str, SubjectiveRecord] = {}
    if "mos" in df.columns:
        mos = _numeric(df["mos"], path, "mos")
        ci = _numeric(df["ci95"], path, "ci95") if "ci95" in df.columns else None
        for i, stimulus_id in enumerate(df["stimulus_id"]):
            if stimulus_id in records:
                raise ValidationError(f"{path}: duplicate MOS for {stimulus_id!r}")
            value = float(mos.iloc[i])
            if not 1.0 <= value <= 5.0:
                raise ValidationError(f"{path}: MOS of {stimulus_id!r} outside 1..5: {value}")
            half_width = float(ci.iloc[i]) if ci is not None else math.nan
            records[stimulus_id] = SubjectiveRecord(stimulus_id, (), value, half_width)
        return records

    if "score" not in df.columns:
        raise ValidationError(f"{path}: expected a 'mos' or a 'score' column")
    ratings = _numeric(df["score"], path, "score")
    if np.any(ratings != np.round(ratings)):
        raise ValidationError(f"{path}: ratings must be integers on the 1..5 scale")
    grouped = pd.DataFrame({"stimulus_id": df["stimulus_id"], "score": ratings.astype(int)})
    for stimulus_id, group in grouped.groupby("stimulus_id", sort=True):
        records[str(stimulus_id)] = mos_with_ci(group["score"].tolist(), str(stimulus_id))
    return records


def write_mos_csv(records: Mapping[str, SubjectiveRecord], path: PathLike) -> Path:
    df = pd.DataFrame(
        [(r.stimulus_id, r.mos, r.ci95, len(r.scores)) for _, r in sorted(records.items())],
        columns=["stimulus_id", "mos", "ci95", "ratings"],
    )
    return _write_frame(df, path)


# --- fits ---------------------------------------------------------------------


@dataclass(frozen=True)
class FitRow:
    """One fitted (metric, group) pair."""

    metric_id: str
    group: str
    result: FitResult


def fit_header(zone_count: int) -> List[str]:
    return (
        ["metric", "group"]
        + [f"beta{i}" for i in range(1, 6)]
        + [f"w{k}" for k in range(1, zone_count + 1)]
        + ["pcc", "rmse", "converged"]
    )


def write_fit_csv(rows: Iterable[FitRow], path: PathLike, zone_count: int = 5) -> Path:
    records = []
    for row in rows:
        weights = (
            list(row.result.weights.weights) if row.result.weights else [math.nan] * zone_count
        )
        records.append(
            [row.metric_id, row.group]
            + list(row.result.params.as_tuple())
            + weights
            + [row.result.pcc, row.result.rmse, "true" if row.result.converged else "false"]
        )
    return _write_frame(pd.DataFrame(records, columns=fit_header(zone_count)), path)


def format_evaluation_table(rows: Sequence[FitRow]) -> str:
    """Fixed-width text table: metrics as rows, one PCC/RMSE column pair per group."""
    metrics = list(dict.fromkeys(row.metric_id for row in rows))
    groups = list(dict.fromkeys(row.group for row in rows))
    cells = {(row.metric_id, row.group): row.result for row in rows}
    name_width = max([len("Metric")] + [len(m) for m in metrics])
    col_width = 15

    lines = [
        "Metric".ljust(name_width) + "".join(f"  {g:^{col_width}}" for g in groups),
        " " * name_width + "".join(f"  {'PCC':>7} {'RMSE':>7}" for _ in groups),
        "-" * (name_width + len(groups) * (col_width + 2)),
    ]
    for metric in metrics:
        line = metric.ljust(name_width)
        for group in groups:
            result = cells.get((metric, group))
            if result is None:
                line += f"  {'-':>7} {'-':>7}"
            else:
                line += f"  {result.pcc:>7.4f} {result.rmse:>7.4f}"
        lines.append(line)
    return "\n".join(lines) + "\n"


# --- plots --------------------------------------------------------------------

_SCENARIO_STYLE = {
    Scenario.S1.value: ("tab:blue", "o", "S1 (center HQ)"),
    Scenario.S2.value: ("tab:red", "^", "S2 (center LQ)"),
    "other": ("tab:gray", "s", "other"),
}


def write_scatter_svg(
    metric_id: str,
    scores: Mapping[str, float],
    mos: Mapping[str, float],
    scenarios: Mapping[str, str],
    path: PathLike,
    fit: Optional[FitResult] = None,
) -> Path:
    """Scatter plot of metric score versus MOS with one marker style per scenario.

    Output is byte-stable for equal inputs (fixed SVG hash salt, no date).
    """
    ids = sorted(s for s in scores if s in mos and math.isfinite(scores[s]))
    with plt.rc_context({"svg.hashsalt": "foveal-iqa", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(4.5, 4.0))
        try:
            for scenario, (color, marker, label) in _SCENARIO_STYLE.items():
                members = [s for s in ids if scenarios.get(s, "other") == scenario]
                if not members:
                    continue
                ax.scatter(
                    [scores[s] for s in members],
                    [mos[s] for s in members],
                    c=color,
                    marker=marker,
                    s=18,
                    label=label,
                )
            if fit is not None and ids:
                xs = np.linspace(min(scores[s] for s in ids), max(scores[s] for s in ids), 200)
                ax.plot(xs, logistic5(xs, fit.params), color="black", linewidth=1.0, label="fit")
            ax.set_xlabel(metric_id)
            ax.set_ylabel("MOS")
            ax.set_title(metric_id)
            ax.legend(loc="best", fontsize="small")
            fig.tight_layout()
            with atomic_output(path, suffix=".svg") as tmp:
                fig.savefig(tmp, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return Path(path)
