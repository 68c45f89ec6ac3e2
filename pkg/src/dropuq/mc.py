"""Monte-Carlo prediction under test-time dropout.

Running T stochastic forward passes and pooling them per instance gives a
predictive mean and an unbiased sample variance (divisor T - 1). One mask is
drawn per pass and shared by every instance in the batch, so a pass is a
coherent "thinned network" snapshot rather than per-row noise. Mask streams
are keyed by (base_seed, pass index): the result is identical however the
passes are scheduled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InputShapeError, ValidationError
from .nn import (
    DropoutConfig,
    MlpModel,
    _ACT_IDS,
    _check_batch,
    resolve_placement,
    sample_mask,
)
from .seeds import pass_streams

DEFAULT_PASSES = 100


@dataclass(frozen=True)
class McEstimate:
    """Pooled result of T stochastic passes.

    Attributes:
        mean: per-instance predictive mean, shape (n,).
        variance: per-instance unbiased sample variance, shape (n,); exactly
            zero where all passes agreed.
        passes: number of passes T (at least 2).
        rate: dropout rate the passes were drawn at.
    """

    mean: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)
    passes: int
    rate: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.variance, dtype=np.float64)
        if mean.ndim != 1 or var.shape != mean.shape:
            raise ValidationError("mean and variance must be equal-length vectors")
        if self.passes < 2:
            raise ValidationError("an estimate needs at least 2 passes")
        if np.any(var < 0.0):
            raise ValidationError("variance entries must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    def __len__(self) -> int:
        return self.mean.shape[0]


def mc_predict(
    model: MlpModel,
    inputs,
    dropout: DropoutConfig,
    passes: int = DEFAULT_PASSES,
    base_seed: int = 0,
) -> McEstimate:
    """Predictive mean and variance from T masked forward passes.

    Where every pass produced the same value (for example at rate 0, where
    each mask keeps everything), the mean is that value and the variance is
    exactly zero rather than whatever rounding a T-term average would leave.
    """
    if passes < 2:
        raise ValidationError(f"passes must be at least 2, got {passes}")
    x = _check_batch(model, inputs)
    placement = resolve_placement(dropout, model)
    keep = dropout.keep_scale
    widths = model.hidden_sizes

    scales = [np.ones((passes, w)) for w in widths]
    for t, stream in enumerate(pass_streams(base_seed, passes)):
        mask = sample_mask(dropout, model, np.random.default_rng(stream))
        for layer, vec in zip(placement, mask.layer_masks):
            scales[layer][t] = vec * keep

    preds = _kernels.masked_passes(
        x, model.weights, model.biases, scales, _ACT_IDS[model.hidden_activation], passes
    )
    mean = preds.mean(axis=0)
    variance = preds.var(axis=0, ddof=1)
    agree = np.all(preds == preds[0], axis=0)
    if np.any(agree):
        mean = np.where(agree, preds[0], mean)
        variance = np.where(agree, 0.0, variance)
    return McEstimate(mean, variance, passes, dropout.rate)


def write_predictions_csv(estimate: McEstimate, path, instance_ids=None) -> None:
    """Write per-instance rows as (instance_id, mean, variance)."""
    n = len(estimate)
    if instance_ids is None:
        instance_ids = range(n)
    else:
        instance_ids = list(instance_ids)
        if len(instance_ids) != n:
            raise InputShapeError(f"expected {n} instance ids, got {len(instance_ids)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "mean", "variance"])
        for ident, m, v in zip(instance_ids, estimate.mean, estimate.variance):
            writer.writerow([ident, repr(float(m)), repr(float(v))])


def read_predictions_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read a file written by :func:`write_predictions_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["instance_id", "mean", "variance"]:
        raise ValidationError(f"{path}: expected header 'instance_id,mean,variance'")
    ids: list[str] = []
    means: list[float] = []
    variances: list[float] = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ValidationError(f"{path}: row {i}: expected 3 columns, got {len(row)}")
        try:
            means.append(float(row[1]))
            variances.append(float(row[2]))
        except ValueError as exc:
            raise ValidationError(f"{path}: row {i}: {exc}") from exc
        ids.append(row[0])
    if not ids:
        raise ValidationError(f"{path}: no prediction rows")
    return ids, np.asarray(means), np.asarray(variances)
