"""Command line entry points.

Subcommands mirror the library stages: ``train`` fits and saves a plain
network, ``inject`` draws Monte-Carlo predictions at one dropout rate,
``tune`` sweeps a rate grid, ``relax`` balances saved predictions, and
``experiment`` runs the full repeated protocol, with ``report`` re-emitting
files from a saved report. Exit codes: 0 on success, 2 for validation or
configuration problems, 3 for runtime failures such as divergence or a
missing bracket.

``train``, ``inject``, ``tune``, and ``relax`` operate in the units of the
input file; the ``experiment`` pipeline standardizes internally.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import Standardizer, fold_standardizer, load_csv
from .errors import ComputationError, ValidationError
from .harness import SplitPlan, export_report, load_report, run_experiment
from .mc import DEFAULT_PASSES, mc_predict, read_predictions_csv, write_predictions_csv
from .metrics import (
    DEFAULT_ALPHA_POINTS,
    calibration_curve,
    gaussian_nll,
    miscalibration_area,
    rmse,
)
from .nn import DropoutConfig, TrainConfig, forward_batch, init_model, load_model, save_model, train
from .scaling import (
    DEFAULT_TOLERANCE,
    apply_scale,
    bracket_scale,
    ideal_uncertainty,
    optimal_scale,
    relax_scale,
)
from .seeds import derive_seed
from .tuner import RateGrid, sweep, write_sweep_csv


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ValidationError(f"bad hidden layer spec {text!r}: {exc}") from exc
    if not sizes:
        raise ValidationError("hidden layer spec is empty")
    return sizes


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", default="50", help="comma-separated hidden layer sizes")
    p.add_argument("--activation", default="relu", choices=("relu", "tanh"))
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.05)


def cmd_train(args) -> int:
    dataset = load_csv(args.data)
    dropout = DropoutConfig(args.dropout_rate) if args.dropout_rate is not None else None
    config = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        seed=derive_seed(args.seed, 1),
        dropout=dropout,
    )
    initial = init_model(
        (dataset.n_features, *_parse_hidden(args.hidden), 1),
        args.activation,
        seed=derive_seed(args.seed, 0),
    )
    # SGD runs in standardized coordinates so one learning-rate default works
    # on any column scale; the transform folds back into the saved weights.
    standardizer = Standardizer.fit(dataset.features, dataset.targets)
    fitted = train(
        initial,
        standardizer.transform_features(dataset.features),
        standardizer.transform_targets(dataset.targets),
        config,
    )
    model = fold_standardizer(fitted, standardizer)
    save_model(model, args.out)
    fit = rmse(dataset.targets, forward_batch(model, dataset.features))
    print(f"trained on {len(dataset)} rows; training RMSE {fit:.6g}; model -> {args.out}")
    return 0


def cmd_inject(args) -> int:
    model = load_model(args.model)
    dataset = load_csv(args.data)
    estimate = mc_predict(
        model, dataset.features, DropoutConfig(args.rate), args.passes, args.seed
    )
    write_predictions_csv(estimate, args.out)
    print(
        f"{len(estimate)} instances at rate {args.rate:g} over {args.passes} passes -> {args.out}"
    )
    return 0


def cmd_tune(args) -> int:
    model = load_model(args.model)
    dataset = load_csv(args.data)
    grid = RateGrid.from_spec(args.rate_grid)
    report = sweep(
        model, dataset.features, dataset.targets, grid, args.passes, args.seed,
        alpha_points=args.alpha_points, tau=None,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(report.injected.rows, out / "sweep_injected.csv")
    (out / "tune.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    print(
        f"chosen rate (plain NLL) {report.injected.chosen_rate_unscaled:g}, "
        f"(scale-aware) {report.injected.chosen_rate_scaled:g} "
        f"with factor {report.injected.chosen_scale_factor:.6g} -> {out}"
    )
    return 0


def cmd_relax(args) -> int:
    ids, means, variances = read_predictions_csv(args.preds)
    dataset = load_csv(args.data)
    if len(ids) != len(dataset):
        raise ValidationError(
            f"{args.preds} has {len(ids)} rows but {args.data} has {len(dataset)}"
        )
    targets = dataset.targets
    eps2 = ideal_uncertainty(targets, means)
    scale = optimal_scale(eps2, variances)
    lo, hi = bracket_scale(targets, means, variances, scale.factor, args.alpha_points)
    relaxation = relax_scale(
        targets, means, variances, lo, hi, args.tau, args.alpha_points
    )
    factor_r = relaxation.factor_relaxed
    doc = {
        "scale_factor": scale.factor,
        "scale_factor_relaxed": factor_r,
        "iterations": relaxation.iterations,
        "final_balance": relaxation.final_balance,
        "tolerance": relaxation.tolerance,
        "nll_unscaled": scale.nll_unscaled,
        "nll_scaled": scale.nll_scaled,
        "nll_relaxed": gaussian_nll(targets, means, apply_scale(variances, factor_r)),
        "ma_unscaled": miscalibration_area(
            calibration_curve(targets, means, variances, args.alpha_points)
        ),
        "ma_scaled": miscalibration_area(
            calibration_curve(targets, means, apply_scale(variances, scale.factor), args.alpha_points)
        ),
        "ma_relaxed": miscalibration_area(
            calibration_curve(targets, means, apply_scale(variances, factor_r), args.alpha_points)
        ),
    }
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(
        f"scale factor {scale.factor:.6g} relaxed to {factor_r:.6g} "
        f"in {relaxation.iterations} steps (balance {relaxation.final_balance:+.4f}) -> {args.out}"
    )
    return 0


def cmd_experiment(args) -> int:
    dataset = load_csv(args.data)
    plan = SplitPlan(
        test_fraction=args.test_fraction,
        validation_fraction=args.val_fraction,
        repeats=args.repeats,
        base_seed=args.seed,
    )
    config = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
    )
    report = run_experiment(
        dataset,
        plan,
        config,
        hidden=_parse_hidden(args.hidden),
        activation=args.activation,
        grid=RateGrid.from_spec(args.rate_grid),
        passes=args.passes,
        tau=args.tau,
        alpha_points=args.alpha_points,
        embedded=args.embedded,
    )
    files = export_report(report, args.out)
    agg = report.aggregates
    print(
        f"{plan.repeats} repeats on {dataset.name} ({len(dataset)} rows): "
        f"test NLL unscaled {agg['nll_unscaled']['mean']:.4g}, "
        f"scaled {agg['nll_scaled']['mean']:.4g}, "
        f"relaxed {agg['nll_relaxed']['mean']:.4g}; "
        f"{len(files)} files -> {args.out}"
    )
    return 0


def cmd_report(args) -> int:
    doc = load_report(args.report)
    files = export_report(doc, args.out)
    print(f"re-emitted {len(files)} files -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dropuq",
        description="Uncertainty for regression networks via test-time dropout and sigma scaling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a plain network and save it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--dropout-rate", type=float, default=None,
        help="train with embedded dropout at this rate (default: no dropout)",
    )
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inject", help="Monte-Carlo predictions at one dropout rate")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--passes", type=int, default=DEFAULT_PASSES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("tune", help="sweep a dropout-rate grid on a validation file")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rate-grid", default="0.001,0.5,15,log", help="min,max,count,log|lin")
    p.add_argument("--passes", type=int, default=DEFAULT_PASSES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha-points", type=int, default=DEFAULT_ALPHA_POINTS)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("relax", help="balance saved predictions against their targets")
    p.add_argument("--preds", required=True, help="CSV from 'inject'")
    p.add_argument("--data", required=True, help="CSV the predictions were made on")
    p.add_argument("--tau", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--alpha-points", type=int, default=DEFAULT_ALPHA_POINTS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("experiment", help="repeated split/train/tune/scale/test protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--rate-grid", default="0.001,0.5,15,log", help="min,max,count,log|lin")
    p.add_argument("--passes", type=int, default=DEFAULT_PASSES)
    p.add_argument("--tau", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--alpha-points", type=int, default=DEFAULT_ALPHA_POINTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument(
        "--embedded", action="store_true",
        help="also train one dropout network per rate for comparison",
    )
    _add_train_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-emit files from a saved report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
