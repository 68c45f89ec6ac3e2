"""Tabular dataset loading and z-score standardization.

CSV layout: one regression target in the last column, features in all other
columns. A first row with any non-numeric cell is treated as a header. Rows
must be rectangular and fully numeric; parse failures report the 1-based row
number of the offending line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataError, InputShapeError, ParseError, ValidationError


@dataclass(eq=False)
class Dataset:
    """Feature matrix plus target vector.

    Attributes:
        name: label used in reports.
        features: (n, d) float64, all finite.
        targets: (n,) float64, all finite.
        feature_names: optional column names, one per feature.
    """

    name: str
    features: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValidationError("features must be a 2-d array")
        if self.targets.ndim != 1 or self.targets.shape[0] != self.features.shape[0]:
            raise ValidationError("targets must hold one value per feature row")
        if self.features.shape[0] == 0:
            raise EmptyDataError("a dataset needs at least one row")
        if self.features.shape[1] == 0:
            raise ValidationError("a dataset needs at least one feature column")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.targets)):
            raise ValidationError("dataset values must all be finite")
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != self.features.shape[1]:
                raise ValidationError(
                    f"{len(names)} feature names for {self.features.shape[1]} columns"
                )
            self.feature_names = names

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _try_parse_row(cells: list[str]) -> list[float] | None:
    values = []
    for cell in cells:
        try:
            values.append(float(cell))
        except ValueError:
            return None
    return values


def load_csv(path, name: str | None = None) -> Dataset:
    """Load a dataset; last column is the target."""
    path = Path(path)
    with open(path, newline="") as fh:
        raw = [row for row in csv.reader(fh)]
    rows = [(i, row) for i, row in enumerate(raw, start=1) if row]
    if not rows:
        raise ParseError(f"{path}: file contains no data")

    feature_names = None
    first_row = rows[0][1]
    if _try_parse_row([c.strip() for c in first_row]) is None:
        feature_names = tuple(c.strip() for c in first_row[:-1])
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header only, no data rows")

    n_columns = len(rows[0][1])
    if n_columns < 2:
        raise ParseError(
            f"{path}: row {rows[0][0]}: need at least one feature column and a target"
        )
    features = []
    targets = []
    for line_no, row in rows:
        if len(row) != n_columns:
            raise ParseError(
                f"{path}: row {line_no}: expected {n_columns} columns, got {len(row)}"
            )
        values = []
        for col, cell in enumerate(row, start=1):
            text = cell.strip()
            if not text:
                raise ParseError(f"{path}: row {line_no}: missing value in column {col}")
            try:
                value = float(text)
            except ValueError as exc:
                raise ParseError(
                    f"{path}: row {line_no}: non-numeric value {text!r} in column {col}"
                ) from exc
            if not math.isfinite(value):
                raise ParseError(
                    f"{path}: row {line_no}: non-finite value {text!r} in column {col}"
                )
            values.append(value)
        features.append(values[:-1])
        targets.append(values[-1])

    return Dataset(
        name=name or path.stem,
        features=np.asarray(features),
        targets=np.asarray(targets),
        feature_names=feature_names,
    )


@dataclass(frozen=True)
class Standardizer:
    """Per-feature and target z-scoring, fit on training data only.

    Zero-variance columns get a unit divisor so constant features map to zero
    instead of NaN.
    """

    feature_mean: np.ndarray = field(repr=False)
    feature_scale: np.ndarray = field(repr=False)
    target_mean: float = 0.0
    target_scale: float = 1.0

    @classmethod
    def fit(cls, features, targets) -> "Standardizer":
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise InputShapeError("fit expects a (n, d) matrix and a length-n target vector")
        if x.shape[0] == 0:
            raise EmptyDataError("cannot fit a standardizer on zero rows")
        f_std = x.std(axis=0)
        t_std = float(y.std())
        return cls(
            feature_mean=x.mean(axis=0),
            feature_scale=np.where(f_std == 0.0, 1.0, f_std),
            target_mean=float(y.mean()),
            target_scale=t_std if t_std != 0.0 else 1.0,
        )

    def transform_features(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        return (x - self.feature_mean) / self.feature_scale

    def transform_targets(self, targets) -> np.ndarray:
        y = np.asarray(targets, dtype=np.float64)
        return (y - self.target_mean) / self.target_scale

    def inverse_targets(self, standardized) -> np.ndarray:
        y = np.asarray(standardized, dtype=np.float64)
        return y * self.target_scale + self.target_mean


def fold_standardizer(model, standardizer: Standardizer):
    """Absorb a standardizer into a network trained on standardized data.

    Returns an equivalent model mapping raw features to raw targets: the
    feature transform folds into the first layer's affine map and the target
    transform into the output layer's. Hidden activations are untouched, so
    dropout masks act identically on both parameterizations.
    """
    from .nn import MlpModel

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    weights[0] = weights[0] / standardizer.feature_scale[None, :]
    biases[0] = biases[0] - weights[0] @ standardizer.feature_mean
    weights[-1] = weights[-1] * standardizer.target_scale
    biases[-1] = biases[-1] * standardizer.target_scale + standardizer.target_mean
    return MlpModel(model.layer_sizes, weights, biases, model.hidden_activation)
