"""Shared fixtures: synthetic tasks and pre-trained models.

The expensive fixtures are session-scoped; tests must treat them as
read-only.
"""

from types import SimpleNamespace

import numpy as np
import pytest

from dropuq import (
    Standardizer,
    TrainConfig,
    init_model,
    split_indices,
    train,
)


def linear_task(n: int, noise: float = 0.0, seed: int = 0):
    """1-d regression on y = 3x, optionally with Gaussian observation noise."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(n, 1))
    y = 3.0 * x[:, 0]
    if noise > 0.0:
        y = y + rng.normal(0.0, noise, size=n)
    return x, y


def standardized_splits(x, y, seed: int):
    """Train/validation/test split with train-fit z-scoring, as the harness does."""
    idx_train, idx_val, idx_test = split_indices(len(y), 0.1, 0.2, seed)
    std = Standardizer.fit(x[idx_train], y[idx_train])
    return SimpleNamespace(
        standardizer=std,
        x_train=std.transform_features(x[idx_train]),
        y_train=std.transform_targets(y[idx_train]),
        x_val=std.transform_features(x[idx_val]),
        y_val=std.transform_targets(y[idx_val]),
        x_test=std.transform_features(x[idx_test]),
        y_test=std.transform_targets(y[idx_test]),
    )


@pytest.fixture(scope="session")
def noisy_linear():
    """A network fit to noisy 1-d linear data, with standardized splits."""
    x, y = linear_task(2000, noise=0.5, seed=11)
    splits = standardized_splits(x, y, seed=12)
    config = TrainConfig(batch_size=32, learning_rate=0.05, epochs=150, seed=14)
    model = train(init_model((1, 50, 1), "relu", seed=13), splits.x_train, splits.y_train, config)
    splits.model = model
    splits.train_config = config
    return splits


@pytest.fixture(scope="session")
def small_random_model():
    """An untrained 3-5-1 network with seeded random weights."""
    return init_model((3, 5, 1), "relu", seed=42)
