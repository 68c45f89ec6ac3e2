"""End-to-end evaluation protocol on tabular regression data.

Each repeat draws its own shuffled 90/10 train/test split, carves 20% of the
train partition into a validation set, z-scores features and target on the
training rows only, trains a plain network, tunes the dropout rate on the
validation set (both formulations), computes the analytic scale factor and its
balance-relaxed variant there as well, and only then touches the test rows.
Test data therefore never influences any tuned quantity.

All reported NLL and calibration numbers live in standardized target units;
RMSE is reported both standardized and in raw units.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, Standardizer
from .errors import ValidationError
from .mc import DEFAULT_PASSES, mc_predict
from .metrics import (
    DEFAULT_ALPHA_POINTS,
    CalibrationCurve,
    calibration_curve,
    gaussian_nll,
    miscalibration_area,
    rmse,
)
from .nn import DropoutConfig, TrainConfig, init_model, train
from .scaling import DEFAULT_TOLERANCE, apply_scale
from .seeds import derive_seed
from .tuner import (
    DEFAULT_GRID,
    EmbeddedSpec,
    RateGrid,
    SWEEP_CSV_COLUMNS,
    SweepReport,
    sweep,
)
from . import _kernels

CURVE_KINDS = ("unscaled", "scaled", "relaxed")


@dataclass(frozen=True)
class SplitPlan:
    """How to slice the data, and how often.

    Attributes:
        test_fraction: share of all rows held out for the final test.
        validation_fraction: share of the train partition used for tuning.
        repeats: number of independent shuffled repetitions.
        base_seed: root of every stream an experiment uses.
    """

    test_fraction: float = 0.1
    validation_fraction: float = 0.2
    repeats: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError("test_fraction must lie in (0, 1)")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValidationError("validation_fraction must lie in (0, 1)")
        if self.repeats < 1:
            raise ValidationError("repeats must be at least 1")


def split_indices(
    n: int, test_fraction: float, validation_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint (train, validation, test) index arrays covering range(n)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    n_val = int(round((n - n_test) * validation_fraction))
    n_train = n - n_test - n_val
    if min(n_test, n_val, n_train) < 1:
        raise ValidationError(
            f"split of {n} rows leaves an empty partition "
            f"(train {n_train}, validation {n_val}, test {n_test})"
        )
    test = perm[:n_test]
    val = perm[n_test : n_test + n_val]
    rest = perm[n_test + n_val :]
    return np.sort(rest), np.sort(val), np.sort(test)


@dataclass(frozen=True)
class TestMetrics:
    """Held-out metrics at the scale-aware chosen rate.

    NLL and calibration are reported three ways: raw variances, variances
    scaled by the analytic factor, and variances scaled by the balance-relaxed
    factor. Factors come from the validation set of the same repeat.
    """

    rate_unscaled: float
    rate_scaled: float
    scale_factor: float
    scale_factor_relaxed: float
    relax_iterations: int
    relax_final_balance: float
    rmse: float
    rmse_standardized: float
    nll_unscaled: float
    nll_scaled: float
    nll_relaxed: float
    ma_unscaled: float
    ma_scaled: float
    ma_relaxed: float

    def to_dict(self) -> dict:
        return asdict(self)


AGGREGATE_FIELDS = (
    "rate_unscaled",
    "rate_scaled",
    "scale_factor",
    "scale_factor_relaxed",
    "rmse",
    "rmse_standardized",
    "nll_unscaled",
    "nll_scaled",
    "nll_relaxed",
    "ma_unscaled",
    "ma_scaled",
    "ma_relaxed",
)


@dataclass(frozen=True)
class RepeatResult:
    """Everything one repeat produced."""

    index: int
    sweep: SweepReport
    test: TestMetrics
    curves: dict[str, CalibrationCurve] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "sweep": self.sweep.to_dict(),
            "test": self.test.to_dict(),
            "curves": {
                kind: {
                    "alphas": [float(a) for a in curve.alphas],
                    "observed": [float(o) for o in curve.observed],
                }
                for kind, curve in self.curves.items()
            },
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Full record of an experiment: settings, every repeat, and aggregates."""

    dataset: str
    n_rows: int
    n_features: int
    plan: SplitPlan
    settings: dict
    repeats: tuple[RepeatResult, ...]
    aggregates: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "n_rows": self.n_rows,
            "n_features": self.n_features,
            "plan": asdict(self.plan),
            "settings": self.settings,
            "aggregates": self.aggregates,
            "repeats": [r.to_dict() for r in self.repeats],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _aggregate(repeats: list[RepeatResult]) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for name in AGGREGATE_FIELDS:
        values = np.array([float(getattr(r.test, name)) for r in repeats])
        std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        out[name] = {"mean": float(values.mean()), "std": std}
    return out


def run_experiment(
    dataset: Dataset,
    plan: SplitPlan,
    train_config: TrainConfig = TrainConfig(),
    *,
    hidden=(50,),
    activation: str = "relu",
    grid: RateGrid = DEFAULT_GRID,
    passes: int = DEFAULT_PASSES,
    tau: float = DEFAULT_TOLERANCE,
    alpha_points: int = DEFAULT_ALPHA_POINTS,
    embedded: bool = False,
) -> ExperimentReport:
    """Run the full protocol; deterministic in ``plan.base_seed``.

    ``train_config`` supplies SGD settings; its seed and dropout fields are
    overridden per repeat (the plain network trains without dropout).
    """
    if not (isinstance(tau, float) and math.isfinite(tau)):
        raise ValidationError("tau must be a finite float")
    hidden = tuple(int(h) for h in hidden)
    if not hidden or any(h < 1 for h in hidden):
        raise ValidationError("hidden layer sizes must be positive")

    layer_sizes = (dataset.n_features, *hidden, 1)
    results: list[RepeatResult] = []
    for r in range(plan.repeats):
        split_seed = derive_seed(plan.base_seed, r, 0)
        init_seed = derive_seed(plan.base_seed, r, 1)
        sgd_seed = derive_seed(plan.base_seed, r, 2)
        sweep_seed = derive_seed(plan.base_seed, r, 3)
        test_seed = derive_seed(plan.base_seed, r, 4)

        idx_train, idx_val, idx_test = split_indices(
            len(dataset), plan.test_fraction, plan.validation_fraction, split_seed
        )
        std = Standardizer.fit(dataset.features[idx_train], dataset.targets[idx_train])
        x_train = std.transform_features(dataset.features[idx_train])
        y_train = std.transform_targets(dataset.targets[idx_train])
        x_val = std.transform_features(dataset.features[idx_val])
        y_val = std.transform_targets(dataset.targets[idx_val])
        x_test = std.transform_features(dataset.features[idx_test])
        y_test = std.transform_targets(dataset.targets[idx_test])

        initial = init_model(layer_sizes, activation, init_seed)
        config = replace(train_config, seed=sgd_seed, dropout=None)
        model = train(initial, x_train, y_train, config)

        spec = EmbeddedSpec(initial, x_train, y_train, config) if embedded else None
        sweep_report = sweep(
            model, x_val, y_val, grid, passes, sweep_seed,
            alpha_points=alpha_points, tau=tau, embedded=spec,
        )
        chosen = sweep_report.injected
        rate = chosen.chosen_rate_scaled
        factor = chosen.chosen_scale_factor
        relaxation = chosen.relaxation

        est = mc_predict(model, x_test, DropoutConfig(rate), passes, test_seed)
        scaled_var = apply_scale(est.variance, factor)
        relaxed_var = apply_scale(est.variance, relaxation.factor_relaxed)
        curves = {
            "unscaled": calibration_curve(y_test, est.mean, est.variance, alpha_points),
            "scaled": calibration_curve(y_test, est.mean, scaled_var, alpha_points),
            "relaxed": calibration_curve(y_test, est.mean, relaxed_var, alpha_points),
        }
        rmse_std_units = rmse(y_test, est.mean)
        test = TestMetrics(
            rate_unscaled=chosen.chosen_rate_unscaled,
            rate_scaled=rate,
            scale_factor=factor,
            scale_factor_relaxed=relaxation.factor_relaxed,
            relax_iterations=relaxation.iterations,
            relax_final_balance=relaxation.final_balance,
            rmse=rmse_std_units * std.target_scale,
            rmse_standardized=rmse_std_units,
            nll_unscaled=gaussian_nll(y_test, est.mean, est.variance),
            nll_scaled=gaussian_nll(y_test, est.mean, scaled_var),
            nll_relaxed=gaussian_nll(y_test, est.mean, relaxed_var),
            ma_unscaled=miscalibration_area(curves["unscaled"]),
            ma_scaled=miscalibration_area(curves["scaled"]),
            ma_relaxed=miscalibration_area(curves["relaxed"]),
        )
        results.append(RepeatResult(index=r, sweep=sweep_report, test=test, curves=curves))

    settings = {
        "hidden": list(hidden),
        "activation": activation,
        "epochs": train_config.epochs,
        "batch_size": train_config.batch_size,
        "learning_rate": train_config.learning_rate,
        "rates": [float(r) for r in grid],
        "passes": passes,
        "tau": tau,
        "alpha_points": alpha_points,
        "embedded": embedded,
        "backend": _kernels.backend(),
    }
    return ExperimentReport(
        dataset=dataset.name,
        n_rows=len(dataset),
        n_features=dataset.n_features,
        plan=plan,
        settings=settings,
        repeats=tuple(results),
        aggregates=_aggregate(results),
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _sweep_rows_csv(rows: list[dict]) -> str:
    lines = [",".join(SWEEP_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(repr(float(row[c])) for c in SWEEP_CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _curve_csv(curve: dict) -> str:
    lines = ["alpha,observed"]
    for a, o in zip(curve["alphas"], curve["observed"]):
        lines.append(f"{a!r},{o!r}")
    return "\n".join(lines) + "\n"


def export_report(report, out_dir) -> list[str]:
    """Write report files into ``out_dir``; returns the emitted names.

    Accepts an :class:`ExperimentReport` or its dict form (as read back from
    ``report.json``). Emits the full report, a summary, per-repeat sweep and
    calibration-curve CSVs, and a manifest; each file lands via a temp-file
    rename so a crash never leaves a half-written file under its final name.
    """
    doc = report.to_dict() if isinstance(report, ExperimentReport) else dict(report)
    repeats = doc.get("repeats") or []
    if not repeats:
        raise ValidationError("report has zero repeats; nothing to export")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    def emit(name: str, text: str) -> None:
        _atomic_write(out / name, text)
        files.append(name)

    emit("report.json", json.dumps(doc, indent=1) + "\n")
    summary = {
        "dataset": doc.get("dataset"),
        "n_rows": doc.get("n_rows"),
        "n_features": doc.get("n_features"),
        "plan": doc.get("plan"),
        "settings": doc.get("settings"),
        "aggregates": doc.get("aggregates"),
    }
    emit("summary.json", json.dumps(summary, indent=1) + "\n")

    for rep in repeats:
        idx = rep["index"]
        emit(f"sweep_injected_r{idx:02d}.csv", _sweep_rows_csv(rep["sweep"]["injected"]["rows"]))
        if rep["sweep"].get("embedded"):
            emit(
                f"sweep_embedded_r{idx:02d}.csv",
                _sweep_rows_csv(rep["sweep"]["embedded"]["rows"]),
            )
        for kind in CURVE_KINDS:
            if kind in rep["curves"]:
                emit(f"curve_{kind}_r{idx:02d}.csv", _curve_csv(rep["curves"][kind]))

    manifest = {"dataset": doc.get("dataset"), "files": sorted(files)}
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    files.append("manifest.json")
    return files


def load_report(path) -> dict:
    """Read a ``report.json`` written by :func:`export_report`."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "repeats" not in doc:
        raise ValidationError(f"{path}: not an experiment report (no 'repeats' field)")
    return doc
