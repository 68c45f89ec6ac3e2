"""Dropout-rate selection by validation NLL.

Two objectives over the same rate grid: the plain validation NLL of the raw
Monte-Carlo variances, and the scale-aware variant that first applies each
rate's optimal multiplier C(rate) and only then compares rates. The second
collapses the joint search over (rate, scale) to a sweep over rate alone,
because the best scale at a fixed rate is available in closed form.

Masks are re-drawn per rate from seeds keyed by (base seed, method, rate
index), so adding or removing grid points never shifts another rate's draw.
Ties in the objective resolve toward the smaller rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ValidationError
from .mc import DEFAULT_PASSES, McEstimate, mc_predict
from .metrics import (
    DEFAULT_ALPHA_POINTS,
    calibration_curve,
    gaussian_nll,
    miscalibration_area,
    rmse,
)
from .nn import DropoutConfig, MlpModel, TrainConfig, train
from .scaling import (
    DEFAULT_TOLERANCE,
    RelaxationResult,
    apply_scale,
    bracket_scale,
    ideal_uncertainty,
    optimal_scale,
    relax_scale,
)
from .seeds import derive_seed

_METHOD_IDS = {"injected": 0, "embedded": 1}

SWEEP_CSV_COLUMNS = (
    "rate",
    "rmse",
    "nll_unscaled",
    "nll_scaled",
    "scale_factor",
    "ma_unscaled",
    "ma_scaled",
    "nll_ideal",
)


@dataclass(frozen=True)
class RateGrid:
    """A strictly increasing, duplicate-free grid of dropout rates in [0, 1)."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if not rates:
            raise ValidationError("a rate grid cannot be empty")
        for r in rates:
            if not 0.0 <= r < 1.0:
                raise ValidationError(f"rates must lie in [0, 1), got {r}")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValidationError("rates must be strictly increasing with no duplicates")
        object.__setattr__(self, "rates", rates)

    def __len__(self) -> int:
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    @classmethod
    def log_spaced(cls, lo: float, hi: float, count: int) -> "RateGrid":
        if lo <= 0.0:
            raise ValidationError("log spacing needs a positive lower endpoint")
        if count < 1:
            raise ValidationError("a grid needs at least one rate")
        if count == 1:
            return cls((lo,))
        return cls(tuple(np.geomspace(lo, hi, count)))

    @classmethod
    def linear(cls, lo: float, hi: float, count: int) -> "RateGrid":
        if count < 1:
            raise ValidationError("a grid needs at least one rate")
        if count == 1:
            return cls((lo,))
        return cls(tuple(np.linspace(lo, hi, count)))

    @classmethod
    def from_spec(cls, spec: str) -> "RateGrid":
        """Parse "min,max,count,log" or "min,max,count,lin"."""
        parts = [p.strip() for p in spec.split(",")]
        if len(parts) != 4 or parts[3] not in {"log", "lin"}:
            raise ValidationError(
                f"rate grid spec must look like 'min,max,count,log|lin', got {spec!r}"
            )
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ValidationError(f"bad rate grid spec {spec!r}: {exc}") from exc
        return cls.log_spaced(lo, hi, count) if parts[3] == "log" else cls.linear(lo, hi, count)


DEFAULT_GRID = RateGrid.log_spaced(0.001, 0.5, 15)


@dataclass(frozen=True)
class RateEvaluation:
    """Validation metrics of one dropout rate."""

    rate: float
    rmse: float
    nll_unscaled: float
    nll_scaled: float
    scale_factor: float
    ma_unscaled: float
    ma_scaled: float
    nll_ideal: float
    train_seed: Optional[int] = None

    def to_dict(self) -> dict:
        doc = {name: getattr(self, name) for name in SWEEP_CSV_COLUMNS}
        if self.train_seed is not None:
            doc["train_seed"] = self.train_seed
        return doc


@dataclass(frozen=True)
class MethodSweep:
    """All per-rate rows of one uncertainty method plus its chosen rates."""

    method: str
    rows: tuple[RateEvaluation, ...]
    chosen_rate_unscaled: float
    chosen_rate_scaled: float
    chosen_scale_factor: float
    relaxation: Optional[RelaxationResult] = None

    def row_at(self, rate: float) -> RateEvaluation:
        for row in self.rows:
            if row.rate == rate:
                return row
        raise ValidationError(f"no row for rate {rate}")

    def to_dict(self) -> dict:
        doc = {
            "method": self.method,
            "rows": [row.to_dict() for row in self.rows],
            "chosen_rate_unscaled": self.chosen_rate_unscaled,
            "chosen_rate_scaled": self.chosen_rate_scaled,
            "chosen_scale_factor": self.chosen_scale_factor,
        }
        if self.relaxation is not None:
            doc["relaxation"] = {
                "factor_relaxed": self.relaxation.factor_relaxed,
                "iterations": self.relaxation.iterations,
                "final_balance": self.relaxation.final_balance,
                "tolerance": self.relaxation.tolerance,
            }
        return doc


@dataclass(frozen=True)
class SweepReport:
    """Per-rate tables for the injected (and optionally embedded) method."""

    injected: MethodSweep
    embedded: Optional[MethodSweep]
    passes: int
    alpha_points: int
    base_seed: int

    def to_dict(self) -> dict:
        doc = {
            "passes": self.passes,
            "alpha_points": self.alpha_points,
            "base_seed": self.base_seed,
            "injected": self.injected.to_dict(),
        }
        if self.embedded is not None:
            doc["embedded"] = self.embedded.to_dict()
        return doc


@dataclass(frozen=True)
class EmbeddedSpec:
    """What the sweep needs to train dropout into the network per rate.

    Every rate starts from the same ``initial`` weights and uses the same SGD
    settings; only the dropout rate changes.
    """

    initial: MlpModel
    x_train: np.ndarray
    y_train: np.ndarray
    config: TrainConfig


def rate_seed(base_seed: int, method: str, index: int) -> int:
    """Seed of the mask stream for one (method, rate index) cell."""
    return derive_seed(base_seed, _METHOD_IDS[method], index)


def _evaluate(
    model: MlpModel,
    x_val,
    y_val,
    rate: float,
    passes: int,
    seed: int,
    alpha_points: int,
    placement,
    train_seed: Optional[int] = None,
) -> tuple[RateEvaluation, McEstimate]:
    est = mc_predict(model, x_val, DropoutConfig(rate, placement), passes, seed)
    eps2 = ideal_uncertainty(y_val, est.mean)
    scale = optimal_scale(eps2, est.variance)
    curve_unscaled = calibration_curve(y_val, est.mean, est.variance, alpha_points)
    curve_scaled = calibration_curve(
        y_val, est.mean, apply_scale(est.variance, scale.factor), alpha_points
    )
    row = RateEvaluation(
        rate=rate,
        rmse=rmse(y_val, est.mean),
        nll_unscaled=scale.nll_unscaled,
        nll_scaled=scale.nll_scaled,
        scale_factor=scale.factor,
        ma_unscaled=miscalibration_area(curve_unscaled),
        ma_scaled=miscalibration_area(curve_scaled),
        nll_ideal=gaussian_nll(y_val, est.mean, eps2),
        train_seed=train_seed,
    )
    return row, est


def _argmin_rate(rows, attr: str) -> float:
    best_rate = rows[0].rate
    best_value = getattr(rows[0], attr)
    for row in rows[1:]:
        value = getattr(row, attr)
        if value < best_value:
            best_value = value
            best_rate = row.rate
    return best_rate


def _sweep_method(
    method: str,
    rows: list[RateEvaluation],
    estimates: dict[float, McEstimate],
    y_val,
    tau: Optional[float],
    alpha_points: int,
) -> MethodSweep:
    chosen_unscaled = _argmin_rate(rows, "nll_unscaled")
    chosen_scaled = _argmin_rate(rows, "nll_scaled")
    chosen_row = next(r for r in rows if r.rate == chosen_scaled)
    relaxation = None
    if tau is not None:
        est = estimates[chosen_scaled]
        lo, hi = bracket_scale(
            y_val, est.mean, est.variance, chosen_row.scale_factor, alpha_points
        )
        relaxation = relax_scale(
            y_val, est.mean, est.variance, lo, hi, tau, alpha_points
        )
    return MethodSweep(
        method=method,
        rows=tuple(rows),
        chosen_rate_unscaled=chosen_unscaled,
        chosen_rate_scaled=chosen_scaled,
        chosen_scale_factor=chosen_row.scale_factor,
        relaxation=relaxation,
    )


def tune_unscaled(
    model: MlpModel,
    x_val,
    y_val,
    grid: RateGrid = DEFAULT_GRID,
    passes: int = DEFAULT_PASSES,
    base_seed: int = 0,
    alpha_points: int = DEFAULT_ALPHA_POINTS,
    placement=None,
) -> tuple[float, tuple[RateEvaluation, ...]]:
    """Rate minimizing plain validation NLL; returns (rate, per-rate rows)."""
    rows = [
        _evaluate(
            model, x_val, y_val, r, passes,
            rate_seed(base_seed, "injected", k), alpha_points, placement,
        )[0]
        for k, r in enumerate(grid)
    ]
    return _argmin_rate(rows, "nll_unscaled"), tuple(rows)


def tune_scaled(
    model: MlpModel,
    x_val,
    y_val,
    grid: RateGrid = DEFAULT_GRID,
    passes: int = DEFAULT_PASSES,
    base_seed: int = 0,
    alpha_points: int = DEFAULT_ALPHA_POINTS,
    placement=None,
) -> tuple[float, float, tuple[RateEvaluation, ...]]:
    """Rate minimizing scale-aware NLL; returns (rate, its factor, rows)."""
    rows = [
        _evaluate(
            model, x_val, y_val, r, passes,
            rate_seed(base_seed, "injected", k), alpha_points, placement,
        )[0]
        for k, r in enumerate(grid)
    ]
    chosen = _argmin_rate(rows, "nll_scaled")
    factor = next(r.scale_factor for r in rows if r.rate == chosen)
    return chosen, factor, tuple(rows)


def sweep(
    model: MlpModel,
    x_val,
    y_val,
    grid: RateGrid = DEFAULT_GRID,
    passes: int = DEFAULT_PASSES,
    base_seed: int = 0,
    *,
    alpha_points: int = DEFAULT_ALPHA_POINTS,
    tau: Optional[float] = DEFAULT_TOLERANCE,
    placement=None,
    embedded: Optional[EmbeddedSpec] = None,
) -> SweepReport:
    """Full per-rate table(s) with chosen rates and optional relaxation.

    The injected method masks ``model`` as-is at every rate; the model is
    read, never written. With an :class:`EmbeddedSpec`, a second table trains
    one network per rate with dropout active and evaluates it at its own rate.
    ``tau=None`` skips the balance relaxation.
    """
    rows: list[RateEvaluation] = []
    estimates: dict[float, McEstimate] = {}
    for k, rate in enumerate(grid):
        row, est = _evaluate(
            model, x_val, y_val, rate, passes,
            rate_seed(base_seed, "injected", k), alpha_points, placement,
        )
        rows.append(row)
        estimates[rate] = est
    injected = _sweep_method("injected", rows, estimates, y_val, tau, alpha_points)

    embedded_sweep = None
    if embedded is not None:
        emb_rows: list[RateEvaluation] = []
        emb_estimates: dict[float, McEstimate] = {}
        for k, rate in enumerate(grid):
            config = replace(embedded.config, dropout=DropoutConfig(rate, placement))
            trained = train(embedded.initial, embedded.x_train, embedded.y_train, config)
            row, est = _evaluate(
                trained, x_val, y_val, rate, passes,
                rate_seed(base_seed, "embedded", k), alpha_points, placement,
                train_seed=config.seed,
            )
            emb_rows.append(row)
            emb_estimates[rate] = est
        embedded_sweep = _sweep_method(
            "embedded", emb_rows, emb_estimates, y_val, tau, alpha_points
        )

    return SweepReport(
        injected=injected,
        embedded=embedded_sweep,
        passes=passes,
        alpha_points=alpha_points,
        base_seed=base_seed,
    )


def write_sweep_csv(rows, path) -> None:
    """Write per-rate rows with the standard column set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            writer.writerow([repr(float(getattr(row, c))) for c in SWEEP_CSV_COLUMNS])
