"""Logistic MOS mapping, correlation scoring and zone-weight estimation.

Objective scores x are mapped to MOS with the five-parameter logistic

    y = b1 * (1/2 - 1 / (1 + exp(b2 * (x - b3)))) + b4 * x + b5

fitted by nonlinear least squares. Metric performance is the Pearson
correlation and RMSE between mapped scores and MOS.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special, stats

from .errors import (
    InsufficientDataError,
    NonIdentifiableError,
    UndefinedCorrelationError,
    ValidationError,
)
from .zwf import ZoneMseVector, ZoneWeights

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 8
DEFAULT_MAX_ITERATIONS = 2000
DEFAULT_TOLERANCE = 1e-10

# Weighted zone MSE never drops below this, so ZWF stays finite while fitting.
_MSE_FLOOR = 1e-10
_DB = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class LogisticParams:
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float

    def __post_init__(self):
        if not all(math.isfinite(b) for b in self.as_tuple()):
            raise ValidationError(f"logistic parameters must be finite: {self.as_tuple()}")

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "LogisticParams":
        return cls(*(float(v) for v in values))

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.beta1, self.beta2, self.beta3, self.beta4, self.beta5)


@dataclass(frozen=True)
class SubjectiveRecord:
    """MOS of one stimulus with its 95% confidence-interval half-width."""

    stimulus_id: str
    scores: Tuple[int, ...]
    mos: float
    ci95: float


@dataclass
class FitResult:
    """Outcome of a logistic (and optionally zone-weight) fit."""

    params: LogisticParams
    pcc: float
    rmse: float
    weights: Optional[ZoneWeights] = None
    iterations: int = 0
    converged: bool = True
    n: int = 0
    trace: List[float] = field(default_factory=list)

    def predict(self, x) -> np.ndarray:
        return logistic5(x, self.params)


def logistic5(x, p: LogisticParams):
    """Evaluate the five-parameter logistic; saturates cleanly for large |b2 (x - b3)|."""
    x = np.asarray(x, dtype=np.float64)
    y = p.beta1 * (special.expit(p.beta2 * (x - p.beta3)) - 0.5) + p.beta4 * x + p.beta5
    return float(y) if y.ndim == 0 else y


def _as_series(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def pcc(a, b) -> float:
    """Pearson correlation coefficient."""
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if len(a) != len(b):
        raise InsufficientDataError(f"series lengths differ: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise InsufficientDataError("correlation needs at least two points")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    r, _ = stats.pearsonr(a, b)
    return float(np.clip(r, -1.0, 1.0))


def rmse(pred, obs) -> float:
    """Root mean squared residual."""
    pred = _as_series(pred, "pred")
    obs = _as_series(obs, "obs")
    if len(pred) != len(obs):
        raise InsufficientDataError(f"series lengths differ: {len(pred)} vs {len(obs)}")
    if len(pred) == 0:
        raise InsufficientDataError("RMSE needs at least one point")
    return float(np.sqrt(np.mean((pred - obs) ** 2)))


def _residuals(beta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    b1, b2, b3, b4, b5 = beta
    return b1 * (special.expit(b2 * (x - b3)) - 0.5) + b4 * x + b5 - y


def _jacobian(beta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    b1, b2, b3, _, _ = beta
    s = special.expit(b2 * (x - b3))
    ds = s * (1.0 - s)
    return np.column_stack(
        [s - 0.5, b1 * ds * (x - b3), -b1 * ds * b2, x, np.ones_like(x)]
    )


def initial_params(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Deterministic starting point: center at median(x), slope 4/std(x).

    The amplitude takes the sign of the x-y correlation so decreasing
    metrics (MSE) start on the right branch.
    """
    spread = float(np.std(x))
    b2 = 4.0 / spread if spread > 0 else 1.0
    b1 = float(np.max(y) - np.min(y))
    if spread > 0 and np.std(y) > 0 and np.corrcoef(x, y)[0, 1] < 0:
        b1 = -b1
    return np.array([b1, b2, float(np.median(x)), 0.0, float(np.mean(y))])


def _random_starts(x: np.ndarray, y: np.ndarray, count: int, rng: np.random.Generator):
    base = initial_params(x, y)
    lo, hi = float(np.min(x)), float(np.max(x))
    for _ in range(count):
        start = base.copy()
        start[0] *= rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        start[1] *= 10.0 ** rng.uniform(-1.0, 1.0)
        start[2] = rng.uniform(lo, hi) if hi > lo else lo
        start[4] += rng.normal(0.0, 0.1 * (float(np.std(y)) + 1e-12))
        yield start


def _solve(x, y, start, max_iterations, tolerance):
    result = optimize.least_squares(
        _residuals,
        start,
        jac=_jacobian,
        args=(x, y),
        method="lm",
        x_scale="jac",
        ftol=tolerance,
        xtol=tolerance,
        gtol=tolerance,
        max_nfev=max_iterations,
    )
    return result.x, float(np.sum(result.fun**2)), result.nfev, result.status > 0


def _fit_from_starts(x, y, starts, max_iterations, tolerance):
    best = None
    trace: List[float] = []
    for start in starts:
        beta, objective, nfev, converged = _solve(x, y, start, max_iterations, tolerance)
        if not np.all(np.isfinite(beta)):
            continue
        if best is None or objective < best[1]:
            best = (beta, objective, nfev, converged)
        trace.append(best[1])
    if best is None:
        raise NonIdentifiableError("no logistic fit produced finite parameters")
    return best, trace


def _safe_pcc(pred: np.ndarray, obs: np.ndarray, residual: float) -> float:
    try:
        return pcc(pred, obs)
    except UndefinedCorrelationError:
        # a constant target reproduced exactly counts as a perfect fit
        return 1.0 if residual < 1e-12 else 0.0


def fit_logistic(
    x,
    y,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    warm_start: Optional[Sequence[float]] = None,
) -> FitResult:
    """Least-squares fit of the logistic mapping from ``x`` to ``y``.

    Starts from :func:`initial_params` (and ``warm_start`` when given), then
    ``restarts`` seeded random restarts; the best solution wins. ``trace``
    holds the best objective after each start.
    """
    x = _as_series(x, "x")
    y = _as_series(y, "y")
    if len(x) != len(y):
        raise InsufficientDataError(f"series lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 5:
        raise InsufficientDataError(f"logistic fitting needs at least 5 points, got {len(x)}")

    starts = [initial_params(x, y)]
    if warm_start is not None:
        starts.insert(0, np.asarray(warm_start, dtype=np.float64))
    starts.extend(_random_starts(x, y, restarts, np.random.default_rng(seed)))
    (beta, objective, nfev, converged), trace = _fit_from_starts(
        x, y, starts, max_iterations, tolerance
    )
    if not converged:
        logger.warning("logistic fit stopped after %d evaluations without converging", nfev)

    params = LogisticParams.from_array(beta)
    pred = logistic5(x, params)
    fit_rmse = rmse(pred, y)
    return FitResult(
        params=params,
        pcc=_safe_pcc(pred, y, fit_rmse),
        rmse=fit_rmse,
        iterations=int(nfev),
        converged=bool(converged),
        n=len(x),
        trace=trace,
    )


def evaluate_metric(scores, mos, seed: int = 0, **fit_options) -> FitResult:
    """Map metric scores to MOS and report PCC/RMSE of the mapped scores.

    Infinite scores (identical images) are excluded with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    mos = _as_series(mos, "mos")
    if len(scores) != len(mos):
        raise InsufficientDataError(f"{len(scores)} scores for {len(mos)} MOS values")
    finite = np.isfinite(scores)
    if not np.all(finite):
        logger.warning("excluding %d non-finite scores from the fit", int(np.sum(~finite)))
    return fit_logistic(scores[finite], mos[finite], seed=seed, **fit_options)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1} (sort-based)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    theta = cssv[rho - 1] / rho
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def zwf_values(mse_matrix: np.ndarray, w: np.ndarray, max_value: float) -> np.ndarray:
    """ZWF of every stimulus (row) for weights ``w``."""
    weighted = np.maximum(mse_matrix @ w, _MSE_FLOOR)
    return _DB * np.log(max_value * max_value / weighted)


class _ZoneWeightProblem:
    """Joint least-squares problem over (beta, w) for fixed data."""

    def __init__(self, mse_matrix: np.ndarray, mos: np.ndarray, max_value: float, options):
        self.m = mse_matrix
        self.y = mos
        self.max_value = max_value
        self.options = options

    def objective(self, beta: np.ndarray, w: np.ndarray) -> float:
        x = zwf_values(self.m, w, self.max_value)
        return float(np.sum(_residuals(beta, x, self.y) ** 2))

    def weight_gradient(self, beta: np.ndarray, w: np.ndarray) -> np.ndarray:
        b1, b2, b3, b4, _ = beta
        weighted = np.maximum(self.m @ w, _MSE_FLOOR)
        x = _DB * np.log(self.max_value**2 / weighted)
        s = special.expit(b2 * (x - b3))
        slope = b1 * b2 * s * (1.0 - s) + b4
        r = _residuals(beta, x, self.y)
        dx_dw = -_DB * self.m / weighted[:, None]
        return 2.0 * (r * slope) @ dx_dw

    def beta_step(self, beta: np.ndarray, w: np.ndarray) -> np.ndarray:
        x = zwf_values(self.m, w, self.max_value)
        starts = [beta, initial_params(x, self.y)]
        (best, _, _, _), _ = _fit_from_starts(
            x, self.y, starts, self.options["max_iterations"], self.options["tolerance"]
        )
        return best

    def weight_step(self, beta: np.ndarray, w: np.ndarray, step: float, iterations: int = 25):
        """Projected gradient descent with backtracking; never increases the objective."""
        current = self.objective(beta, w)
        for _ in range(iterations):
            grad = self.weight_gradient(beta, w)
            step *= 2.0
            for _ in range(40):
                candidate = project_simplex(w - step * grad)
                delta = candidate - w
                value = self.objective(beta, candidate)
                if value <= current + grad @ delta + (delta @ delta) / (2.0 * step):
                    break
                step *= 0.5
            else:
                return w, current, step
            if value >= current:
                break
            w, current = candidate, value
        return w, current, step

    def polish(self, beta: np.ndarray, w: np.ndarray):
        """Joint trust-region refinement; weights are normalized inside the model."""
        n = len(self.y)
        k = len(w)

        def residuals(theta):
            v = theta[5:]
            total = v.sum()
            wn = v / total if total > 0 else np.full(k, 1.0 / k)
            x = zwf_values(self.m, wn, self.max_value)
            return np.append(_residuals(theta[:5], x, self.y), math.sqrt(n) * (total - 1.0))

        lower = np.concatenate([np.full(5, -np.inf), np.zeros(k)])
        result = optimize.least_squares(
            residuals,
            np.concatenate([beta, w]),
            bounds=(lower, np.full(5 + k, np.inf)),
            method="trf",
            ftol=self.options["tolerance"],
            xtol=self.options["tolerance"],
            max_nfev=self.options["max_iterations"],
        )
        return result.x[:5], project_simplex(result.x[5:])


def _zone_mse_matrix(zone_mses: Sequence[ZoneMseVector]) -> np.ndarray:
    matrix = np.array([zm.as_array() for zm in zone_mses], dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise InsufficientDataError("zone MSE vectors must share one zone count")
    if not np.all(np.isfinite(matrix)):
        raise InsufficientDataError("every stimulus must have pixels in every zone")
    if np.any(matrix < 0):
        raise ValidationError("zone MSE values must be non-negative")
    return matrix


def fit_zone_weights(
    zone_mses: Sequence[ZoneMseVector],
    mos,
    max_value: float = 255.0,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    rounds: int = 60,
) -> FitResult:
    """Jointly fit logistic parameters and simplex-constrained zone weights.

    Each start (uniform weights plus ``restarts`` seeded Dirichlet draws)
    alternates a logistic fit for fixed weights with projected gradient
    descent on the weights for fixed logistic parameters, then refines both
    jointly. The best start is returned; its weights lie exactly on the
    simplex.
    """
    matrix = _zone_mse_matrix(zone_mses)
    y = _as_series(mos, "mos")
    n, k = matrix.shape
    if len(y) != n:
        raise InsufficientDataError(f"{n} zone MSE vectors for {len(y)} MOS values")
    error_free = matrix.sum(axis=1) == 0
    if np.any(error_free):
        logger.warning(
            "excluding %d stimuli without error in any zone (infinite ZWF) from the fit",
            int(np.sum(error_free)),
        )
        matrix, y = matrix[~error_free], y[~error_free]
        n = len(y)
    if n < k + 5:
        raise InsufficientDataError(f"fitting {k} weights needs at least {k + 5} stimuli, got {n}")
    if np.all(matrix == matrix[0]):
        raise NonIdentifiableError("all stimuli have identical zone MSEs, so ZWF is constant")

    options = {"max_iterations": max_iterations, "tolerance": tolerance}
    problem = _ZoneWeightProblem(matrix, y, max_value, options)
    rng = np.random.default_rng(seed)
    starts = [np.full(k, 1.0 / k)] + [rng.dirichlet(np.ones(k)) for _ in range(restarts)]

    best = None
    for index, w in enumerate(starts):
        x = zwf_values(matrix, w, max_value)
        beta = _fit_from_starts(x, y, [initial_params(x, y)], max_iterations, tolerance)[0][0]
        objective = problem.objective(beta, w)
        trace = [objective]
        step = 1e-3
        converged = False
        for _ in range(rounds):
            beta = problem.beta_step(beta, w)
            w, value, step = problem.weight_step(beta, w, step)
            trace.append(value)
            if abs(objective - value) <= tolerance * max(objective, 1e-300):
                converged = True
                objective = value
                break
            objective = value

        polished_beta, polished_w = problem.polish(beta, w)
        polished_beta = problem.beta_step(polished_beta, polished_w)
        polished = problem.objective(polished_beta, polished_w)
        if polished <= objective:
            beta, w, objective = polished_beta, polished_w, polished
            trace.append(objective)
        logger.debug("zone-weight start %d: objective %.6g", index, objective)
        if best is None or objective < best[2]:
            best = (beta, w, objective, trace, converged)

    beta, w, objective, trace, converged = best  # type: ignore[misc]
    weights = ZoneWeights(tuple(float(v) for v in w))
    x = zwf_values(matrix, weights.as_array(), max_value)
    params = LogisticParams.from_array(beta)
    pred = logistic5(x, params)
    if np.ptp(x) == 0:
        raise NonIdentifiableError("fitted weights give every stimulus the same ZWF")
    fit_rmse = rmse(pred, y)
    return FitResult(
        params=params,
        pcc=_safe_pcc(pred, y, fit_rmse),
        rmse=fit_rmse,
        weights=weights,
        iterations=len(trace) - 1,
        converged=converged,
        n=n,
        trace=trace,
    )


def mos_with_ci(raw_scores: Sequence[int], stimulus_id: str = "") -> SubjectiveRecord:
    """Mean opinion score and Student-t 95% confidence half-width."""
    scores = tuple(int(s) for s in raw_scores)
    if len(scores) < 2:
        raise InsufficientDataError("a confidence interval needs at least two ratings")
    if any(s < 1 or s > 5 for s in scores):
        raise ValidationError(f"ratings must lie on the 1..5 scale: {scores}")
    arr = np.array(scores, dtype=np.float64)
    n = len(arr)
    half_width = float(stats.t.ppf(0.975, n - 1) * arr.std(ddof=1) / math.sqrt(n))
    return SubjectiveRecord(stimulus_id, scores, float(arr.mean()), half_width)
