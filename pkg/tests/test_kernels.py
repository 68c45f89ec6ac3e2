"""Backend equivalence: the compiled kernel against the numpy fallback."""

import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from dropuq import DropoutConfig, backend, init_model, mc_predict, sample_mask
from dropuq._kernels import (
    ACT_RELU,
    ACT_TANH,
    masked_passes,
    masked_passes_numpy,
)
from dropuq.nn import scale_vectors


def random_scales(model, rate, t_passes, seed):
    """Stacked per-pass multiplier rows, identical draws for both backends."""
    config = DropoutConfig(rate=rate)
    per_layer = [[] for _ in model.hidden_sizes]
    for t in range(t_passes):
        mask = sample_mask(config, model, rng=seed + t)
        for layer, vec in enumerate(scale_vectors(model, mask)):
            per_layer[layer].append(vec[0])
    return [np.ascontiguousarray(np.stack(rows)) for rows in per_layer]


@pytest.mark.parametrize("activation,act_id", [("relu", ACT_RELU), ("tanh", ACT_TANH)])
def test_dispatcher_matches_numpy_reference(activation, act_id):
    model = init_model((4, 12, 9, 1), activation, seed=101)
    rng = np.random.default_rng(102)
    x = np.ascontiguousarray(rng.normal(size=(17, 4)))
    scales = random_scales(model, 0.35, 8, seed=103)
    got = masked_passes(x, model.weights, model.biases, scales, act_id, 8)
    ref = masked_passes_numpy(x, model.weights, model.biases, scales, act_id, 8)
    assert got.shape == (8, 17)
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-12)


def test_mc_predict_agrees_across_backends_in_subprocess():
    # The flag is read at import time, so the numpy-only run happens in a
    # child interpreter; both runs share seeds and must agree to rounding.
    code = textwrap.dedent(
        """
        import json
        import numpy as np
        from dropuq import DropoutConfig, backend, init_model, mc_predict

        model = init_model((3, 20, 1), "relu", seed=7)
        rng = np.random.default_rng(8)
        x = rng.normal(size=(11, 3))
        est = mc_predict(model, x, DropoutConfig(rate=0.25), passes=50, base_seed=9)
        print(json.dumps({
            "backend": backend(),
            "mean": est.mean.tolist(),
            "variance": est.variance.tolist(),
        }))
        """
    )

    def run(disable_numba):
        env = dict(os.environ)
        if disable_numba:
            env["DROPUQ_DISABLE_NUMBA"] = "1"
        else:
            env.pop("DROPUQ_DISABLE_NUMBA", None)
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env
        )
        assert out.returncode == 0, out.stderr
        import json

        return json.loads(out.stdout.strip().splitlines()[-1])

    plain = run(disable_numba=True)
    assert plain["backend"] == "numpy"
    native = run(disable_numba=False)
    np.testing.assert_allclose(plain["mean"], native["mean"], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(
        plain["variance"], native["variance"], rtol=1e-8, atol=1e-12
    )


def test_backend_reports_a_known_name():
    assert backend() in {"numba", "numpy"}


def test_no_hidden_layer_uses_numpy_path():
    # Nothing to mask: the dispatcher must not hand a hidden-layer-free net
    # to the compiled kernel.
    from dropuq import MlpModel

    model = MlpModel(
        layer_sizes=(2, 1),
        weights=[np.array([[2.0, -1.0]])],
        biases=[np.array([0.5])],
        hidden_activation="relu",
    )
    x = np.ascontiguousarray(np.array([[1.0, 1.0], [2.0, 0.0]]))
    out = masked_passes(x, model.weights, model.biases, [], ACT_RELU, 3)
    assert out.shape == (3, 2)
    np.testing.assert_allclose(out, np.tile([1.5, 4.5], (3, 1)))
