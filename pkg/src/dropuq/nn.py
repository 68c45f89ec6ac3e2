"""Feed-forward regression networks with optional dropout.

A model is a fully connected stack with one linear output unit. Dropout here
is a first-class inference feature, not only a training regularizer: masks can
be sampled and applied to a network that never saw dropout during training.
Masks zero hidden activations and rescale the survivors by ``1 / (1 - rate)``
(inverted dropout), so the masked pass is unbiased layer by layer. The input
layer is never masked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    InputShapeError,
    TrainingDivergedError,
    ValidationError,
)

ACTIVATIONS = ("relu", "tanh")

_ACT_IDS = {"relu": _kernels.ACT_RELU, "tanh": _kernels.ACT_TANH}


def _as_float_array(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(eq=False)
class MlpModel:
    """Weights and topology of a fully connected regression network.

    Attributes:
        layer_sizes: (input_dim, hidden_1, ..., hidden_k, 1).
        weights: per layer, array of shape (layer_sizes[l+1], layer_sizes[l]).
        biases: per layer, array of shape (layer_sizes[l+1],).
        hidden_activation: "relu" or "tanh"; the output unit is always linear.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)
    hidden_activation: str = "relu"

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValidationError("layer_sizes needs at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValidationError("layer sizes must be positive")
        if self.layer_sizes[-1] != 1:
            raise ValidationError("the output layer must have exactly one unit")
        if self.hidden_activation not in ACTIVATIONS:
            raise ValidationError(
                f"unknown hidden_activation {self.hidden_activation!r}; expected one of {ACTIVATIONS}"
            )
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValidationError(
                f"expected {n_layers} weight/bias arrays, got {len(self.weights)}/{len(self.biases)}"
            )
        self.weights = [_as_float_array(w, f"weights[{i}]") for i, w in enumerate(self.weights)]
        self.biases = [_as_float_array(b, f"biases[{i}]") for i, b in enumerate(self.biases)]
        for i in range(n_layers):
            want = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if self.weights[i].shape != want:
                raise ValidationError(
                    f"weights[{i}] has shape {self.weights[i].shape}, expected {want}"
                )
            if self.biases[i].shape != (self.layer_sizes[i + 1],):
                raise ValidationError(
                    f"biases[{i}] has shape {self.biases[i].shape}, expected ({self.layer_sizes[i + 1]},)"
                )

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_hidden(self) -> int:
        return len(self.layer_sizes) - 2

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.layer_sizes[1:-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
        )


@dataclass(frozen=True)
class DropoutConfig:
    """Where and how strongly to drop hidden activations.

    Attributes:
        rate: probability of zeroing a unit, in [0, 1).
        placement: indices of hidden layers to mask (0-based), or None for
            every hidden layer.
    """

    rate: float
    placement: tuple[int, ...] | None = None

    def __post_init__(self):
        if not (isinstance(self.rate, (int, float)) and math.isfinite(self.rate)):
            raise ValidationError("dropout rate must be a finite number")
        if not 0.0 <= self.rate < 1.0:
            raise ValidationError(f"dropout rate must lie in [0, 1), got {self.rate}")
        if self.placement is not None:
            placement = tuple(int(i) for i in self.placement)
            if any(i < 0 for i in placement):
                raise ValidationError("placement indices must be non-negative")
            if len(set(placement)) != len(placement):
                raise ValidationError("placement indices must be unique")
            object.__setattr__(self, "placement", tuple(sorted(placement)))

    @property
    def keep_scale(self) -> float:
        """Inverted-dropout multiplier for retained units."""
        return 1.0 / (1.0 - self.rate)


def resolve_placement(config: DropoutConfig, model: MlpModel) -> tuple[int, ...]:
    """Hidden-layer indices the config masks on this model."""
    if model.n_hidden == 0 and (config.placement is None or config.placement == ()):
        return ()
    if config.placement is None:
        return tuple(range(model.n_hidden))
    bad = [i for i in config.placement if i >= model.n_hidden]
    if bad:
        raise ValidationError(
            f"placement indices {bad} out of range for a model with {model.n_hidden} hidden layers"
        )
    return config.placement


@dataclass(frozen=True)
class DropoutMask:
    """One sampled mask, aligned with the hidden layers it applies to.

    Attributes:
        layer_masks: binary vectors (0 drops, 1 keeps), one per entry of
            ``placement``, each as long as that hidden layer is wide.
        rate: the rate the mask was drawn at.
        placement: hidden-layer indices the vectors belong to.
        seed: seed of the stream the mask came from, if known.
    """

    layer_masks: tuple[np.ndarray, ...]
    rate: float
    placement: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self):
        if len(self.layer_masks) != len(self.placement):
            raise ValidationError("one mask vector per placed hidden layer is required")
        masks = []
        for i, m in enumerate(self.layer_masks):
            arr = np.asarray(m, dtype=np.float64)
            if arr.ndim != 1:
                raise ValidationError(f"mask vector {i} must be one-dimensional")
            if not np.all((arr == 0.0) | (arr == 1.0)):
                raise ValidationError(f"mask vector {i} must be binary")
            masks.append(arr)
        object.__setattr__(self, "layer_masks", tuple(masks))
        if not 0.0 <= self.rate < 1.0:
            raise ValidationError(f"mask rate must lie in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch SGD settings.

    A non-None ``dropout`` makes training itself stochastic (a fresh mask per
    mini-batch); leaving it None trains a plain network that can still be
    masked later at inference time.
    """

    batch_size: int = 32
    learning_rate: float = 0.05
    epochs: int = 200
    seed: int = 0
    dropout: DropoutConfig | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValidationError("learning_rate must be positive and finite")


def init_model(
    layer_sizes,
    hidden_activation: str = "relu",
    seed: int = 0,
) -> MlpModel:
    """Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, hidden_activation)


def _check_batch(model: MlpModel, x) -> np.ndarray:
    arr = _as_float_array(x, "inputs")
    if arr.ndim != 2 or arr.shape[1] != model.input_dim:
        raise InputShapeError(
            f"expected inputs of shape (n, {model.input_dim}), got {arr.shape}"
        )
    return np.ascontiguousarray(arr)

def _check_vector(model: MlpModel, x) -> np.ndarray:
    arr = _as_float_array(x, "input")
    if arr.ndim != 1 or arr.shape[0] != model.input_dim:
        raise InputShapeError(
            f"expected an input vector of length {model.input_dim}, got shape {arr.shape}"
        )
    return arr

def _ones_scales(model: MlpModel, t_passes: int) -> list[np.ndarray]:
    return [np.ones((t_passes, w)) for w in model.hidden_sizes]


def scale_vectors(model: MlpModel, mask: DropoutMask) -> list[np.ndarray]:
    """Fold a mask and its inverted-dropout rescale into per-layer multipliers."""
    placed = dict(zip(mask.placement, mask.layer_masks))
    keep = 1.0 / (1.0 - mask.rate)
    scales = []
    for layer, width in enumerate(model.hidden_sizes):
        if layer in placed:
            vec = placed[layer]
            if vec.shape[0] != width:
                raise InputShapeError(
                    f"mask for hidden layer {layer} has length {vec.shape[0]}, expected {width}"
                )
            scales.append((vec * keep)[None, :])
        else:
            scales.append(np.ones((1, width)))
    return scales


def forward_batch(model: MlpModel, x) -> np.ndarray:
    """Deterministic predictions for a batch of rows, shape (n,)."""
    batch = _check_batch(model, x)
    out = _kernels.masked_passes(
        batch, model.weights, model.biases, _ones_scales(model, 1),
        _ACT_IDS[model.hidden_activation], 1,
    )
    return out[0]


def forward(model: MlpModel, x) -> float:
    """Deterministic prediction for a single feature vector."""
    vec = _check_vector(model, x)
    return float(forward_batch(model, vec[None, :])[0])


def sample_mask(config: DropoutConfig, model: MlpModel, rng) -> DropoutMask:
    """Draw one mask from a seeded stream.

    ``rng`` may be an integer seed, a ``SeedSequence``, or a ``Generator``.
    Keep/drop decisions are drawn in placement order, one uniform per unit.
    """
    placement = resolve_placement(config, model)
    seed = rng if isinstance(rng, int) else None
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    masks = tuple(
        (gen.random(model.hidden_sizes[layer]) >= config.rate).astype(np.float64)
        for layer in placement
    )
    return DropoutMask(masks, config.rate, placement, seed=seed)


def forward_dropout(model: MlpModel, x, mask: DropoutMask) -> float:
    """Single stochastic prediction under a fixed mask.

    With an all-ones mask at rate 0 this reproduces :func:`forward` exactly:
    both run the same kernel and the multipliers are exactly 1.0.
    """
    vec = _check_vector(model, x)
    out = _kernels.masked_passes(
        np.ascontiguousarray(vec[None, :]), model.weights, model.biases,
        scale_vectors(model, mask), _ACT_IDS[model.hidden_activation], 1,
    )
    return float(out[0, 0])


def _activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        # Subgradient 0 at z == 0.
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def _loss_and_grads(weights, biases, activation, bx, by, scales):
    """Mean squared error and its gradients for one mini-batch.

    ``scales`` is None for a plain pass, or one multiplier vector per hidden
    layer (mask times inverted-dropout rescale; ones where unmasked).
    """
    n_layers = len(weights)
    batch_n = bx.shape[0]
    acts = [bx]
    pre = []
    cur = bx
    for layer in range(n_layers):
        z = cur @ weights[layer].T + biases[layer]
        pre.append(z)
        if layer < n_layers - 1:
            h = _activation(activation, z)
            if scales is not None:
                h = h * scales[layer]
            cur = h
        else:
            cur = z
        acts.append(cur)
    resid = cur[:, 0] - by
    loss = float(np.mean(resid * resid))
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = (2.0 / batch_n) * resid[:, None]
    grad_w[n_layers - 1] = delta.T @ acts[n_layers - 1]
    grad_b[n_layers - 1] = delta.sum(axis=0)
    if n_layers > 1:
        back = delta @ weights[n_layers - 1]
        for layer in range(n_layers - 2, -1, -1):
            dz = back * _activation_grad(activation, pre[layer])
            if scales is not None:
                dz = dz * scales[layer]
            grad_w[layer] = dz.T @ acts[layer]
            grad_b[layer] = dz.sum(axis=0)
            if layer > 0:
                back = dz @ weights[layer]
    return loss, grad_w, grad_b


def train(model: MlpModel, x, y, config: TrainConfig) -> MlpModel:
    """Mini-batch SGD on mean squared error; returns a new model.

    The input model provides topology and initial weights and is not touched.
    Given the same initial model, data, and config the result is bit-identical
    across runs. Raises :class:`TrainingDivergedError` naming the epoch if the
    running loss stops being finite.
    """
    batch_x = _check_batch(model, x)
    targets = _as_float_array(y, "targets")
    if targets.ndim != 1 or targets.shape[0] != batch_x.shape[0]:
        raise InputShapeError(
            f"targets must be one value per input row, got shape {targets.shape}"
        )
    if targets.shape[0] == 0:
        raise ValidationError("cannot train on an empty dataset")

    placement: tuple[int, ...] = ()
    keep = 1.0
    if config.dropout is not None:
        placement = resolve_placement(config.dropout, model)
        keep = config.dropout.keep_scale

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    widths = model.hidden_sizes
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n = targets.shape[0]
    lr = config.learning_rate

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            scales = None
            if config.dropout is not None:
                scales = [np.ones(w) for w in widths]
                for layer in placement:
                    drawn = rng.random(widths[layer])
                    scales[layer] = (drawn >= config.dropout.rate) * keep
            loss, grad_w, grad_b = _loss_and_grads(
                weights, biases, model.hidden_activation, batch_x[idx], targets[idx], scales
            )
            epoch_loss += loss
            n_batches += 1
            for layer in range(len(weights)):
                weights[layer] -= lr * grad_w[layer]
                biases[layer] -= lr * grad_b[layer]
        if not math.isfinite(epoch_loss / n_batches):
            raise TrainingDivergedError(epoch)
    return MlpModel(model.layer_sizes, weights, biases, model.hidden_activation)


def save_model(model: MlpModel, path) -> None:
    """Write a model as JSON.

    Weight rows are stored row-major per layer. Python's float repr emits up
    to 17 significant digits, so every value survives the round-trip exactly.
    """
    doc = {
        "layer_sizes": list(model.layer_sizes),
        "activation": model.hidden_activation,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> MlpModel:
    """Read a model written by :func:`save_model`, validating every field."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object at the top level")
    for key in ("layer_sizes", "activation", "weights", "biases"):
        if key not in doc:
            raise ValidationError(f"{path}: missing field {key!r}")
    try:
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed weights or biases: {exc}") from exc
    return MlpModel(tuple(doc["layer_sizes"]), weights, biases, doc["activation"])
