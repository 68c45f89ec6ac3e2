"""Post-hoc scaling of predictive variances.

Treating each prediction as Normal(mean, sigma^2), the per-sample NLL over
sigma^2 is minimized exactly at the squared error (y - mean)^2, so the squared
errors act as the ideal per-sample uncertainties. Restricting to one global
multiplier c applied to every variance, the NLL over c is minimized in closed
form at

    C = mean over samples of (y_n - mean_n)^2 / sigma_n^2,

so C > 1 says the raw variances underestimate the errors. A second, coarser
notion of fit is the signed calibration balance; because coverage only widens
as variances grow, the balance is non-decreasing in c and a sign-changing
bracket around a balanced factor can be bisected. That bisection ("relaxation")
trades a little NLL for a curve whose average signed miscalibration is within
a tolerance of zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    InputShapeError,
    NoBracketError,
    ValidationError,
)
from .metrics import (
    DEFAULT_ALPHA_POINTS,
    VARIANCE_FLOOR,
    balance,
    calibration_curve,
    floor_variances,
    _paired_vectors,
)

DEFAULT_TOLERANCE = 0.01
MAX_BRACKET_DOUBLINGS = 60
MAX_RELAX_ITERATIONS = 200


@dataclass(frozen=True)
class ScaleResult:
    """Optimal global variance multiplier and the NLL on both sides of it.

    Attributes:
        factor: the minimizing multiplier C (always positive).
        nll_unscaled: NLL of the variances as given.
        nll_scaled: NLL after multiplying every variance by ``factor``; never
            above ``nll_unscaled``.
    """

    factor: float
    nll_unscaled: float
    nll_scaled: float

    def __post_init__(self):
        if not (math.isfinite(self.factor) and self.factor > 0.0):
            raise ValidationError(f"scale factor must be positive and finite, got {self.factor}")
        tol = 1e-9 * max(1.0, abs(self.nll_unscaled))
        if self.nll_scaled > self.nll_unscaled + tol:
            raise ValidationError(
                "scaled NLL exceeds unscaled NLL; the factor is not a minimizer"
            )


@dataclass(frozen=True)
class RelaxationResult:
    """Outcome of bisecting the balance to (approximately) zero.

    Attributes:
        factor_relaxed: the balanced multiplier C_r.
        iterations: bisection steps spent.
        final_balance: balance at ``factor_relaxed``; |final_balance| < tolerance.
        tolerance: the acceptance threshold used.
    """

    factor_relaxed: float
    iterations: int
    final_balance: float
    tolerance: float

    def __post_init__(self):
        if not (math.isfinite(self.factor_relaxed) and self.factor_relaxed > 0.0):
            raise ValidationError("relaxed factor must be positive and finite")
        if abs(self.final_balance) >= self.tolerance:
            raise ValidationError("relaxation result does not meet its own tolerance")


def ideal_uncertainty(targets, predictions) -> np.ndarray:
    """Per-sample squared errors, the exact per-sample NLL minimizers."""
    y, p = _paired_vectors(targets, predictions, "targets", "predictions")
    diff = y - p
    return diff * diff


def optimal_scale(sq_errors, variances) -> ScaleResult:
    """Closed-form NLL-minimizing multiplier for a shared variance scale.

    Degenerate all-zero errors would give C = 0; the factor is clamped to the
    variance floor so it stays positive (shrinking further only lowers NLL, so
    the scaled-vs-unscaled ordering survives the clamp).
    """
    eps2, var = _paired_vectors(sq_errors, variances, "sq_errors", "variances")
    if np.any(eps2 < 0.0):
        raise ValidationError("squared errors must be non-negative")
    var = floor_variances(var)
    factor = float(np.mean(eps2 / var))
    factor = max(factor, VARIANCE_FLOOR)
    nll_unscaled = float(np.mean(0.5 * eps2 / var + 0.5 * np.log(var)))
    scaled = factor * var
    nll_scaled = float(np.mean(0.5 * eps2 / scaled + 0.5 * np.log(scaled)))
    return ScaleResult(factor, nll_unscaled, nll_scaled)


def apply_scale(variances, factor: float) -> np.ndarray:
    """Multiply every variance by a positive factor (order-preserving)."""
    if not (isinstance(factor, (int, float)) and math.isfinite(factor) and factor > 0.0):
        raise ValidationError(f"scale factor must be positive and finite, got {factor}")
    var = np.asarray(variances, dtype=np.float64)
    return var * float(factor)


def balance_at_scale(
    targets, means, variances, factor: float, n_points: int = DEFAULT_ALPHA_POINTS
) -> float:
    """Calibration balance after scaling the variances by ``factor``."""
    curve = calibration_curve(targets, means, apply_scale(variances, factor), n_points)
    return balance(curve)


def bracket_scale(
    targets,
    means,
    variances,
    factor: float,
    n_points: int = DEFAULT_ALPHA_POINTS,
    max_doublings: int = MAX_BRACKET_DOUBLINGS,
) -> tuple[float, float]:
    """Grow [lo, hi] geometrically from ``factor`` until the balance changes sign.

    Returns (lo, hi) with balance(lo) < 0 < balance(hi). Raises
    :class:`NoBracketError` if one side never flips within the doubling cap
    (for example zero residuals, where every interval already covers and the
    balance stays positive at any scale).
    """
    if not (math.isfinite(factor) and factor > 0.0):
        raise ValidationError(f"bracket seed factor must be positive and finite, got {factor}")
    start = balance_at_scale(targets, means, variances, factor, n_points)
    lo, bal_lo = factor, start
    steps = 0
    while bal_lo >= 0.0:
        if steps == max_doublings:
            raise NoBracketError(
                sign=1,
                message=(
                    f"balance stayed non-negative ({bal_lo:+.4f}) after {max_doublings} "
                    f"halvings from {factor:g}; no lower bracket"
                ),
            )
        lo *= 0.5
        bal_lo = balance_at_scale(targets, means, variances, lo, n_points)
        steps += 1
    hi, bal_hi = factor, start
    steps = 0
    while bal_hi <= 0.0:
        if steps == max_doublings:
            raise NoBracketError(
                sign=-1,
                message=(
                    f"balance stayed non-positive ({bal_hi:+.4f}) after {max_doublings} "
                    f"doublings from {factor:g}; no upper bracket"
                ),
            )
        hi *= 2.0
        bal_hi = balance_at_scale(targets, means, variances, hi, n_points)
        steps += 1
    return lo, hi


def relax_scale(
    targets,
    means,
    variances,
    lo: float,
    hi: float,
    tolerance: float = DEFAULT_TOLERANCE,
    n_points: int = DEFAULT_ALPHA_POINTS,
    max_iterations: int = MAX_RELAX_ITERATIONS,
) -> RelaxationResult:
    """Bisect a sign-changing bracket until |balance| < tolerance.

    The bracket must satisfy balance(lo) < 0 < balance(hi); this is checked.
    Because the balance is a step function of the factor, termination is on
    the tolerance band rather than on exact zero; hitting the iteration cap
    raises :class:`ConvergenceError` carrying the last balance seen.
    """
    if not (0.0 < tolerance < 1.0):
        raise ValidationError(f"tolerance must lie in (0, 1), got {tolerance}")
    if not (0.0 < lo < hi):
        raise ValidationError(f"bracket must satisfy 0 < lo < hi, got ({lo}, {hi})")
    bal_lo = balance_at_scale(targets, means, variances, lo, n_points)
    bal_hi = balance_at_scale(targets, means, variances, hi, n_points)
    if not (bal_lo < 0.0 < bal_hi):
        raise ValidationError(
            f"bracket does not straddle zero balance: balance({lo:g}) = {bal_lo:+.4f}, "
            f"balance({hi:g}) = {bal_hi:+.4f}"
        )
    mid_balance = bal_lo
    for iteration in range(1, max_iterations + 1):
        mid = 0.5 * (lo + hi)
        mid_balance = balance_at_scale(targets, means, variances, mid, n_points)
        if abs(mid_balance) < tolerance:
            return RelaxationResult(mid, iteration, mid_balance, tolerance)
        if mid_balance < 0.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        iterations=max_iterations,
        last_value=mid_balance,
        message=(
            f"balance still {mid_balance:+.4f} (tolerance {tolerance}) after "
            f"{max_iterations} bisection steps"
        ),
    )
