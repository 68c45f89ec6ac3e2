"""Regenerate data/synthetic_concrete.csv.

A synthetic stand-in for a concrete compressive-strength table: eight mixture
and age features on realistic scales, a smooth nonlinear response, and
homoscedastic noise. Deterministic; committing the CSV keeps every consumer
byte-stable even if numpy's sampling internals change.
"""

from pathlib import Path

import numpy as np

N_ROWS = 1000
SEED = 20240817

COLUMNS = (
    "cement",
    "slag",
    "fly_ash",
    "water",
    "superplasticizer",
    "coarse_agg",
    "fine_agg",
    "age_days",
    "strength",
)


def make_table(n_rows: int = N_ROWS, seed: int = SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cement = rng.uniform(100.0, 550.0, n_rows)
    slag = rng.uniform(0.0, 360.0, n_rows)
    fly_ash = rng.uniform(0.0, 200.0, n_rows)
    water = rng.uniform(120.0, 250.0, n_rows)
    plasticizer = rng.uniform(0.0, 32.0, n_rows)
    coarse = rng.uniform(800.0, 1150.0, n_rows)
    fine = rng.uniform(590.0, 1000.0, n_rows)
    age = np.exp(rng.uniform(np.log(1.0), np.log(365.0), n_rows))

    binder = cement + 0.85 * slag + 0.55 * fly_ash
    water_binder = water / binder
    strength = (
        12.0
        + 0.040 * cement
        + 0.025 * slag
        + 0.012 * fly_ash
        + 0.30 * plasticizer
        + 8.5 * np.log1p(age)
        - 55.0 * water_binder
        - 0.006 * (coarse - 975.0)
        - 0.004 * (fine - 795.0)
        + 5.0 * np.sin(cement / 95.0)
        + 0.0005 * cement * plasticizer
        - 9.0 * (water_binder - 0.45) ** 2
    )
    strength = strength + rng.normal(0.0, 4.0, n_rows)
    strength = np.maximum(strength, 1.0)
    return np.column_stack(
        [cement, slag, fly_ash, water, plasticizer, coarse, fine, age, strength]
    )


def main() -> None:
    table = make_table()
    out = Path(__file__).resolve().parent.parent / "data" / "synthetic_concrete.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(COLUMNS)]
    for row in table:
        lines.append(",".join(f"{v:.3f}" for v in row))
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out} ({table.shape[0]} rows)")


if __name__ == "__main__":
    main()
