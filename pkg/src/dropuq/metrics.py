"""Accuracy and calibration metrics for Gaussian predictive distributions.

The negative log-likelihood treats each prediction as Normal(mean, variance)
and averages the per-sample terms (y - mean)^2 / (2 variance) + log(variance)/2.
Calibration compares nominal two-sided confidence levels against the observed
frequency of |y - mean| <= z_alpha * sigma, where sigma is the predictive
standard deviation.

Variances below ``VARIANCE_FLOOR`` (including zeros from passes that all
agreed) are clamped to the floor before any division or logarithm; every clamp
bumps the module-level ``floor_diagnostics`` counter so degenerate inputs stay
visible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import EmptyDataError, InputShapeError, ValidationError

VARIANCE_FLOOR = 1e-12

DEFAULT_ALPHA_POINTS = 99

_STD_NORMAL = NormalDist()


@dataclass
class FloorDiagnostics:
    """Running count of variance entries clamped to the floor."""

    events: int = 0

    def reset(self) -> None:
        self.events = 0


floor_diagnostics = FloorDiagnostics()


def floor_variances(variances) -> np.ndarray:
    """Clamp variances up to ``VARIANCE_FLOOR``, counting every clamp."""
    var = np.asarray(variances, dtype=np.float64)
    below = var < VARIANCE_FLOOR
    n_below = int(np.count_nonzero(below))
    if n_below:
        floor_diagnostics.events += n_below
        var = np.where(below, VARIANCE_FLOOR, var)
    return var


def _paired_vectors(a, b, name_a: str, name_b: str) -> tuple[np.ndarray, np.ndarray]:
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1:
        raise InputShapeError(f"{name_a} and {name_b} must be one-dimensional")
    if va.shape != vb.shape:
        raise InputShapeError(
            f"{name_a} has length {va.shape[0]} but {name_b} has length {vb.shape[0]}"
        )
    if va.shape[0] == 0:
        raise EmptyDataError(f"{name_a} is empty")
    return va, vb


def rmse(targets, predictions) -> float:
    """Root mean squared error."""
    y, p = _paired_vectors(targets, predictions, "targets", "predictions")
    diff = y - p
    return float(np.sqrt(np.mean(diff * diff)))


def gaussian_nll(targets, predictions, variances) -> float:
    """Average Gaussian negative log-likelihood (constant term dropped)."""
    y, p = _paired_vectors(targets, predictions, "targets", "predictions")
    _, var = _paired_vectors(targets, variances, "targets", "variances")
    var = floor_variances(var)
    diff = y - p
    return float(np.mean(0.5 * diff * diff / var + 0.5 * np.log(var)))


def z_quantile(alpha: float) -> float:
    """Half-width, in standard deviations, of the central interval of mass alpha.

    This is the standard normal quantile at (1 + alpha) / 2; alpha must lie in
    [0, 1). alpha = 0 gives exactly 0.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"confidence level must lie in [0, 1), got {alpha}")
    if alpha == 0.0:
        return 0.0
    return _STD_NORMAL.inv_cdf(0.5 * (1.0 + alpha))


def observed_frequency(targets, means, variances, alpha: float) -> float:
    """Fraction of samples inside the central interval of nominal mass alpha."""
    y, m = _paired_vectors(targets, means, "targets", "means")
    _, var = _paired_vectors(targets, variances, "targets", "variances")
    sigma = np.sqrt(floor_variances(var))
    z = z_quantile(alpha)
    return float(np.mean(np.abs(y - m) <= z * sigma))


@dataclass(frozen=True)
class CalibrationCurve:
    """Observed coverage at a grid of nominal confidence levels.

    Attributes:
        alphas: strictly increasing levels in (0, 1).
        observed: observed frequencies in [0, 1], non-decreasing.
    """

    alphas: np.ndarray = field(repr=False)
    observed: np.ndarray = field(repr=False)

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64)
        observed = np.asarray(self.observed, dtype=np.float64)
        if alphas.ndim != 1 or alphas.shape != observed.shape or alphas.shape[0] == 0:
            raise ValidationError("a curve needs equal-length, non-empty alpha/observed vectors")
        if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
            raise ValidationError("alphas must lie strictly inside (0, 1)")
        if np.any(np.diff(alphas) <= 0.0):
            raise ValidationError("alphas must be strictly increasing")
        if np.any(observed < 0.0) or np.any(observed > 1.0):
            raise ValidationError("observed frequencies must lie in [0, 1]")
        if np.any(np.diff(observed) < 0.0):
            raise ValidationError("observed frequencies must be non-decreasing")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "observed", observed)

    def __len__(self) -> int:
        return self.alphas.shape[0]


def alpha_grid(n_points: int = DEFAULT_ALPHA_POINTS) -> np.ndarray:
    """Evenly spaced interior levels m / (n_points + 1), m = 1..n_points."""
    if n_points < 1:
        raise ValidationError(f"the level grid needs at least one point, got {n_points}")
    return np.arange(1, n_points + 1, dtype=np.float64) / (n_points + 1)


def calibration_curve(targets, means, variances, n_points: int = DEFAULT_ALPHA_POINTS) -> CalibrationCurve:
    """Observed coverage at each level of the default grid.

    Matches :func:`observed_frequency` exactly at every grid level (same
    comparison, evaluated for all levels at once).
    """
    y, m = _paired_vectors(targets, means, "targets", "means")
    _, var = _paired_vectors(targets, variances, "targets", "variances")
    alphas = alpha_grid(n_points)
    sigma = np.sqrt(floor_variances(var))
    z = np.array([z_quantile(a) for a in alphas])
    inside = np.abs(y - m)[:, None] <= z[None, :] * sigma[:, None]
    return CalibrationCurve(alphas, inside.mean(axis=0))


def miscalibration_area(curve: CalibrationCurve) -> float:
    """Mean absolute gap between observed and nominal coverage."""
    return float(np.mean(np.abs(curve.observed - curve.alphas)))


def balance(curve: CalibrationCurve) -> float:
    """Mean signed gap between observed and nominal coverage.

    Negative means intervals are too narrow on average (uncertainty
    underestimated), positive means too wide.
    """
    return float(np.mean(curve.observed - curve.alphas))


def write_curve_csv(curve: CalibrationCurve, path) -> None:
    """Write a curve as CSV rows (alpha, observed)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "observed"])
        for a, o in zip(curve.alphas, curve.observed):
            writer.writerow([repr(float(a)), repr(float(o))])


def read_curve_csv(path) -> CalibrationCurve:
    """Read a curve written by :func:`write_curve_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["alpha", "observed"]:
        raise ValidationError(f"{path}: expected header 'alpha,observed'")
    try:
        alphas = [float(r[0]) for r in rows[1:]]
        observed = [float(r[1]) for r in rows[1:]]
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed curve row: {exc}") from exc
    return CalibrationCurve(np.asarray(alphas), np.asarray(observed))

def metrics_summary(rmse_value: float, nll: float, ma: float, bal: float) -> dict:
    """Bundle headline metrics in the layout the report files use."""
    return {
        "rmse": float(rmse_value),
        "nll": float(nll),
        "miscalibration_area": float(ma),
        "balance": float(bal),
    }
