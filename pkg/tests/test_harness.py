"""Experiment protocol: splits, repeats, report files, and the CLI."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from dropuq import (
    Dataset,
    SplitPlan,
    TrainConfig,
    ValidationError,
    derive_seed,
    export_report,
    load_report,
    run_experiment,
    split_indices,
)
from dropuq.cli import main
from dropuq.tuner import RateGrid

from conftest import linear_task

SMALL_GRID = RateGrid((0.02, 0.1, 0.3))


def small_dataset(n=400, noise=0.5, seed=200):
    x, y = linear_task(n, noise=noise, seed=seed)
    return Dataset("linear", x, y)


def quick_experiment(dataset, repeats=1, base_seed=0, **kwargs):
    plan = SplitPlan(test_fraction=0.15, validation_fraction=0.25, repeats=repeats, base_seed=base_seed)
    config = TrainConfig(batch_size=32, learning_rate=0.05, epochs=60, seed=0)
    defaults = dict(hidden=(24,), grid=SMALL_GRID, passes=60)
    defaults.update(kwargs)
    return run_experiment(dataset, plan, config, **defaults)


class TestSplits:
    def test_disjoint_and_covering(self):
        train, val, test = split_indices(1000, 0.1, 0.2, seed=3)
        assert len(test) == 100
        assert len(val) == 180
        assert len(train) == 720
        combined = np.concatenate([train, val, test])
        assert np.array_equal(np.sort(combined), np.arange(1000))

    def test_deterministic(self):
        a = split_indices(300, 0.1, 0.2, seed=4)
        b = split_indices(300, 0.1, 0.2, seed=4)
        for ia, ib in zip(a, b):
            np.testing.assert_array_equal(ia, ib)
        c = split_indices(300, 0.1, 0.2, seed=5)
        assert any(not np.array_equal(ia, ic) for ia, ic in zip(a, c))

    def test_empty_partition_rejected(self):
        with pytest.raises(ValidationError):
            split_indices(5, 0.1, 0.2, seed=6)

    def test_plan_validation(self):
        with pytest.raises(ValidationError):
            SplitPlan(test_fraction=0.0)
        with pytest.raises(ValidationError):
            SplitPlan(validation_fraction=1.0)
        with pytest.raises(ValidationError):
            SplitPlan(repeats=0)


@pytest.fixture(scope="module")
def report():
    return quick_experiment(small_dataset(), repeats=2, base_seed=7)


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    out = tmp_path_factory.mktemp("report")
    files = export_report(quick_experiment(small_dataset(seed=203), repeats=2, base_seed=10), out)
    return out, files


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    x, y = linear_task(240, noise=0.4, seed=204)
    lines = ["x,y"] + [f"{float(xi[0])!r},{float(yi)!r}" for xi, yi in zip(x, y)]
    (root / "data.csv").write_text("\n".join(lines) + "\n")
    code = main(["train", "--data", str(root / "data.csv"), "--out",
                 str(root / "model.json"), "--epochs", "80", "--hidden", "24",
                 "--seed", "1"])
    assert code == 0
    return root


class TestRunExperiment:
    def test_repeats_and_aggregates(self, report):
        assert len(report.repeats) == 2
        values = [r.test.nll_scaled for r in report.repeats]
        agg = report.aggregates["nll_scaled"]
        assert agg["mean"] == pytest.approx(float(np.mean(values)), rel=1e-12)
        assert agg["std"] == pytest.approx(float(np.std(values, ddof=1)), rel=1e-12)

    def test_deterministic_reruns(self, report):
        again = quick_experiment(small_dataset(), repeats=2, base_seed=7)
        assert json.dumps(report.to_dict(), sort_keys=True) == json.dumps(
            again.to_dict(), sort_keys=True
        )

    def test_fits_noiseless_linear(self):
        report = quick_experiment(small_dataset(noise=0.0, seed=201), repeats=1, base_seed=8)
        assert report.aggregates["rmse"]["mean"] < 0.1

    def test_curves_present_per_repeat(self, report):
        for repeat in report.repeats:
            assert set(repeat.curves) == {"unscaled", "scaled", "relaxed"}

    def test_scaled_at_most_unscaled_on_test(self, report):
        for repeat in report.repeats:
            assert repeat.test.nll_scaled <= repeat.test.nll_unscaled + 1e-9

    def test_chosen_rates_come_from_grid(self, report):
        for repeat in report.repeats:
            assert repeat.test.rate_scaled in tuple(SMALL_GRID)
            assert repeat.test.rate_unscaled in tuple(SMALL_GRID)

    def test_test_rows_do_not_influence_tuning(self):
        # Tuning sees only train and validation rows, so corrupting the test
        # partition must leave the chosen rate and scale factor untouched.
        base = small_dataset(seed=202)
        plan_seed = 9
        _, _, idx_test = split_indices(len(base), 0.15, 0.25, derive_seed(plan_seed, 0, 0))
        corrupted_targets = base.targets.copy()
        corrupted_targets[idx_test] += 25.0
        corrupted = Dataset("linear", base.features.copy(), corrupted_targets)

        rep_a = quick_experiment(base, repeats=1, base_seed=plan_seed).repeats[0]
        rep_b = quick_experiment(corrupted, repeats=1, base_seed=plan_seed).repeats[0]
        assert rep_a.test.rate_scaled == rep_b.test.rate_scaled
        assert rep_a.test.rate_unscaled == rep_b.test.rate_unscaled
        assert rep_a.test.scale_factor == rep_b.test.scale_factor
        assert rep_a.test.nll_scaled != rep_b.test.nll_scaled


class TestExportReport:
    def test_emits_expected_files(self, exported):
        out, files = exported
        names = {Path(f).name for f in files}
        assert "report.json" in names
        assert "summary.json" in names
        assert "manifest.json" in names
        for r in ("r00", "r01"):
            assert f"sweep_injected_{r}.csv" in names
            for kind in ("unscaled", "scaled", "relaxed"):
                assert f"curve_{kind}_{r}.csv" in names
        for f in files:
            assert (out / f).exists()

    def test_manifest_lists_exactly_the_files(self, exported):
        out, files = exported
        manifest = json.loads((out / "manifest.json").read_text())
        listed = set(manifest["files"])
        emitted = {Path(f).name for f in files} - {"manifest.json"}
        assert listed == emitted

    def test_no_temp_files_left(self, exported):
        out, _ = exported
        assert not list(out.glob("*.tmp"))

    def test_round_trip_reemission_is_identical(self, exported, tmp_path):
        out, _ = exported
        doc = load_report(out / "report.json")
        export_report(doc, tmp_path)
        assert (tmp_path / "summary.json").read_bytes() == (out / "summary.json").read_bytes()
        assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()

    def test_zero_repeats_rejected_before_writing(self, tmp_path):
        with pytest.raises(ValidationError):
            export_report({"dataset": "x", "repeats": []}, tmp_path / "sub")
        assert not (tmp_path / "sub").exists()


class TestCli:
    def test_train_inject_relax_pipeline(self, workdir, capsys):
        data = str(workdir / "data.csv")
        model = str(workdir / "pipeline_model.json")
        preds = str(workdir / "preds.csv")
        relax_out = str(workdir / "relax.json")
        assert main(["train", "--data", data, "--out", model, "--epochs", "80",
                     "--hidden", "24", "--seed", "1"]) == 0
        assert main(["inject", "--data", data, "--model", model, "--rate", "0.1",
                     "--passes", "80", "--seed", "2", "--out", preds]) == 0
        assert main(["relax", "--preds", preds, "--data", data, "--out", relax_out]) == 0
        doc = json.loads(Path(relax_out).read_text())
        assert abs(doc["final_balance"]) < doc["tolerance"]
        assert doc["nll_scaled"] <= doc["nll_unscaled"] + 1e-9
        capsys.readouterr()

    def test_tune_writes_table_and_choice(self, workdir, capsys):
        data = str(workdir / "data.csv")
        model = str(workdir / "model.json")
        out = workdir / "tune"
        assert main(["tune", "--data", data, "--model", model, "--passes", "40",
                     "--rate-grid", "0.02,0.3,3,log", "--out", str(out)]) == 0
        choice = json.loads((out / "tune.json").read_text())
        table = choice["injected"]
        rates = [row["rate"] for row in table["rows"]]
        assert table["chosen_rate_scaled"] in rates
        assert table["chosen_rate_unscaled"] in rates
        assert (out / "sweep_injected.csv").exists()
        capsys.readouterr()

    def test_experiment_and_report_commands(self, workdir, capsys):
        data = str(workdir / "data.csv")
        out = workdir / "exp"
        assert main(["experiment", "--data", data, "--out", str(out), "--repeats", "1",
                     "--rate-grid", "0.02,0.3,3,log", "--passes", "40", "--epochs", "60",
                     "--hidden", "16"]) == 0
        assert (out / "manifest.json").exists()
        re_out = workdir / "reexport"
        assert main(["report", "--report", str(out / "report.json"), "--out", str(re_out)]) == 0
        assert (re_out / "summary.json").read_bytes() == (out / "summary.json").read_bytes()
        capsys.readouterr()

    def test_bad_rate_exits_2(self, workdir, capsys):
        data = str(workdir / "data.csv")
        model = str(workdir / "model.json")
        code = main(["inject", "--data", data, "--model", model, "--rate", "1.5",
                     "--out", str(workdir / "x.csv")])
        assert code == 2
        capsys.readouterr()

    def test_missing_file_exits_2(self, workdir, capsys):
        code = main(["train", "--data", str(workdir / "nope.csv"),
                     "--out", str(workdir / "m.json")])
        assert code == 2
        capsys.readouterr()

    def test_unknown_flag_exits_2(self, capsys):
        assert main(["train", "--nonsense"]) == 2
        capsys.readouterr()

    def test_unbracketable_predictions_exit_3(self, workdir, capsys):
        # Zero variances everywhere: the balance is stuck negative, which is a
        # convergence failure rather than a validation problem.
        data = workdir / "tiny.csv"
        data.write_text("x,y\n1.0,5.0\n2.0,6.0\n3.0,9.0\n")
        preds = workdir / "flat.csv"
        preds.write_text(
            "instance_id,mean,variance\n0,1.0,0.0\n1,2.0,0.0\n2,3.0,0.0\n"
        )
        code = main(["relax", "--preds", str(preds), "--data", str(data), "--out",
                     str(workdir / "r.json")])
        assert code == 3
        capsys.readouterr()
