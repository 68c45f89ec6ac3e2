"""CSV loading, z-scoring, and the standardizer-folding reparameterization."""

import numpy as np
import pytest

from dropuq import (
    Dataset,
    DropoutConfig,
    EmptyDataError,
    Standardizer,
    TrainConfig,
    ValidationError,
    fold_standardizer,
    forward_batch,
    init_model,
    load_csv,
    mc_predict,
    train,
)

from conftest import linear_task


class TestLoadCsv:
    def test_reads_headered_file(self, tmp_path):
        path = tmp_path / "demo.csv"
        path.write_text("a,b,target\n1,2,3\n4,5,6\n")
        ds = load_csv(path)
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.features, [[1.0, 2.0], [4.0, 5.0]])
        np.testing.assert_array_equal(ds.targets, [3.0, 6.0])
        assert ds.name == "demo"

    def test_reads_headerless_file(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("1,2,3\n4,5,6\n")
        ds = load_csv(path)
        assert ds.features.shape == (2, 2)

    def test_skips_blank_lines_but_keeps_numbering(self, tmp_path):
        path = tmp_path / "gaps.csv"
        path.write_text("a,b\n1,2\n\n3,4\n")
        ds = load_csv(path)
        assert ds.features.shape == (2, 1)

    def test_ragged_row_names_its_line(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b\n1,2\n1\n")
        with pytest.raises(ValidationError, match="row 3"):
            load_csv(path)

    def test_missing_value_names_row_and_column(self, tmp_path):
        path = tmp_path / "missing.csv"
        path.write_text("a,b\n1,2\n1,\n")
        with pytest.raises(ValidationError, match="row 3"):
            load_csv(path)

    def test_non_numeric_cell_rejected(self, tmp_path):
        path = tmp_path / "words.csv"
        path.write_text("a,b\n1,2\n1,oops\n")
        with pytest.raises(ValidationError, match="row 3"):
            load_csv(path)

    def test_non_finite_cell_rejected(self, tmp_path):
        path = tmp_path / "inf.csv"
        path.write_text("a,b\n1,2\n1,inf\n")
        with pytest.raises(ValidationError, match="row 3"):
            load_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValidationError, match="no data"):
            load_csv(path)

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "header.csv"
        path.write_text("a,b\n")
        with pytest.raises(ValidationError, match="no data rows"):
            load_csv(path)

    def test_single_column_rejected(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("a\n1\n2\n")
        with pytest.raises(ValidationError):
            load_csv(path)


class TestDataset:
    def test_validation(self):
        with pytest.raises(EmptyDataError):
            Dataset("d", np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(ValidationError):
            Dataset("d", np.zeros((3, 2)), np.zeros(4))
        with pytest.raises(ValidationError):
            Dataset("d", np.array([[1.0, np.nan]]), np.zeros(1))


class TestStandardizer:
    def test_transforms_to_zero_mean_unit_scale(self):
        rng = np.random.default_rng(95)
        x = rng.normal(3.0, 10.0, size=(500, 3))
        y = rng.normal(-7.0, 4.0, size=500)
        std = Standardizer.fit(x, y)
        zx = std.transform_features(x)
        zy = std.transform_targets(y)
        np.testing.assert_allclose(zx.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(zx.std(axis=0), 1.0, rtol=1e-12)
        np.testing.assert_allclose(zy.mean(), 0.0, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(96)
        x = rng.normal(size=(100, 2)) * 7 + 3
        y = rng.normal(size=100) * 11 - 5
        std = Standardizer.fit(x, y)
        np.testing.assert_allclose(std.inverse_targets(std.transform_targets(y)), y, atol=1e-12)

    def test_constant_column_divides_by_one(self):
        x = np.column_stack([np.full(10, 4.0), np.arange(10.0)])
        y = np.arange(10.0)
        std = Standardizer.fit(x, y)
        zx = std.transform_features(x)
        assert np.all(zx[:, 0] == 0.0)
        assert np.all(np.isfinite(zx))


class TestFoldStandardizer:
    def test_plain_forward_equivalent(self):
        rng = np.random.default_rng(97)
        x = rng.normal(5.0, 3.0, size=(300, 2))
        y = 2.0 * x[:, 0] - x[:, 1] + rng.normal(0, 0.1, size=300)
        std = Standardizer.fit(x, y)
        model = train(
            init_model((2, 16, 1), "relu", seed=1),
            std.transform_features(x),
            std.transform_targets(y),
            TrainConfig(epochs=40, seed=2),
        )
        folded = fold_standardizer(model, std)
        raw_preds = forward_batch(folded, x)
        manual = std.inverse_targets(forward_batch(model, std.transform_features(x)))
        np.testing.assert_allclose(raw_preds, manual, rtol=1e-10, atol=1e-10)

    def test_stochastic_passes_equivalent(self):
        # Masks act on hidden activations, which the folding leaves untouched,
        # so means transform affinely and variances by the squared target scale.
        rng = np.random.default_rng(98)
        x = rng.normal(5.0, 3.0, size=(50, 2))
        y = x[:, 0] + rng.normal(0, 0.2, size=50)
        std = Standardizer.fit(x, y)
        model = train(
            init_model((2, 12, 1), "relu", seed=3),
            std.transform_features(x),
            std.transform_targets(y),
            TrainConfig(epochs=30, seed=4),
        )
        folded = fold_standardizer(model, std)
        config = DropoutConfig(rate=0.3)
        est_raw = mc_predict(folded, x, config, passes=40, base_seed=5)
        est_std = mc_predict(model, std.transform_features(x), config, passes=40, base_seed=5)
        np.testing.assert_allclose(
            est_raw.mean, std.inverse_targets(est_std.mean), rtol=1e-9, atol=1e-9
        )
        np.testing.assert_allclose(
            est_raw.variance,
            est_std.variance * std.target_scale**2,
            rtol=1e-9,
            atol=1e-12,
        )
