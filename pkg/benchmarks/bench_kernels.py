"""Time the compiled stochastic-pass kernel against the numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--instances N] [--passes T]
                                        [--hidden W,W] [--repeats K]

Both backends consume identical pre-drawn mask streams, so the comparison is
pure kernel time. The first numba call compiles; a warmup run is excluded
from the timings.
"""

import argparse
import time

import numpy as np

from dropuq import DropoutConfig, backend, init_model, sample_mask
from dropuq._kernels import ACT_RELU, masked_passes_numpy
from dropuq.nn import scale_vectors


def build_workload(hidden, instances, passes, rate, seed):
    layer_sizes = (8, *hidden, 1)
    model = init_model(layer_sizes, "relu", seed=seed)
    rng = np.random.default_rng(seed + 1)
    x = np.ascontiguousarray(rng.normal(size=(instances, 8)))
    config = DropoutConfig(rate=rate)
    per_layer = [[] for _ in model.hidden_sizes]
    for t in range(passes):
        mask = sample_mask(config, model, rng=seed + 2 + t)
        for layer, vec in enumerate(scale_vectors(model, mask)):
            per_layer[layer].append(vec[0])
    scales = [np.ascontiguousarray(np.stack(rows)) for rows in per_layer]
    return model, x, scales


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - started)
    return best, out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=2000)
    parser.add_argument("--passes", type=int, default=200)
    parser.add_argument("--hidden", default="128,128", help="comma-separated widths")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--rate", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    hidden = tuple(int(w) for w in args.hidden.split(","))
    model, x, scales = build_workload(
        hidden, args.instances, args.passes, args.rate, args.seed
    )
    print(
        f"workload: {args.instances} instances x {args.passes} passes, "
        f"hidden {hidden}, rate {args.rate}"
    )

    numpy_fn = lambda: masked_passes_numpy(
        x, model.weights, model.biases, scales, ACT_RELU, args.passes
    )
    numpy_time, numpy_out = time_call(numpy_fn, args.repeats)
    print(f"numpy fallback : {numpy_time * 1e3:9.1f} ms")

    if backend() != "numba":
        print("numba backend  : unavailable (DROPUQ_DISABLE_NUMBA set or numba missing)")
        return 0

    from dropuq._kernels import masked_passes_numba

    numba_fn = lambda: masked_passes_numba(
        x, model.weights, model.biases, scales, ACT_RELU, args.passes
    )
    numba_fn()  # compile outside the timed region
    numba_time, numba_out = time_call(numba_fn, args.repeats)
    print(f"numba kernel   : {numba_time * 1e3:9.1f} ms")
    print(f"speedup        : {numpy_time / numba_time:9.2f}x")

    worst = float(np.max(np.abs(numba_out - numpy_out)))
    print(f"max |difference|: {worst:.3e} (loop-order rounding only)")
    if not np.allclose(numba_out, numpy_out, rtol=1e-9, atol=1e-12):
        print("backends disagree beyond rounding; investigate before trusting timings")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
