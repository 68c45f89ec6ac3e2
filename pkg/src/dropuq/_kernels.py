"""Hot numeric kernels: stochastic forward passes over a batch.

The same computation exists twice: a numba ``@njit`` kernel used by default,
and a pure-numpy fallback. Setting the environment variable
``DROPUQ_DISABLE_NUMBA=1`` before import (or running without numba installed)
selects the fallback. Both paths are deterministic for fixed inputs; they may
differ by last-bit rounding because the compiled kernel accumulates dot
products in loop order while numpy delegates to BLAS.

Shapes used throughout:
    x:       (N, D) float64, one row per instance
    weights: list of (out_l, in_l) float64, one per layer
    biases:  list of (out_l,) float64
    scales:  list over hidden layers of (T, width_l) float64; each row is the
             per-pass multiplier applied to that layer's activations (a dropout
             mask folded together with the inverted-dropout rescale, or ones)
    result:  (T, N) float64, one row of scalar predictions per pass
"""

from __future__ import annotations

import os

import numpy as np

ACT_RELU = 0
ACT_TANH = 1

_ENV_FLAG = "DROPUQ_DISABLE_NUMBA"


def _detect_backend() -> str:
    if os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}:
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


_BACKEND = _detect_backend()


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _BACKEND


def masked_passes_numpy(x, weights, biases, scales, act_id, t_passes):
    """Reference implementation of the stochastic pass kernel."""
    n_layers = len(weights)
    out = np.empty((t_passes, x.shape[0]))
    for t in range(t_passes):
        cur = x
        for layer in range(n_layers):
            z = cur @ weights[layer].T + biases[layer]
            if layer < n_layers - 1:
                if act_id == ACT_RELU:
                    a = np.maximum(z, 0.0)
                else:
                    a = np.tanh(z)
                cur = a * scales[layer][t]
            else:
                cur = z
        out[t] = cur[:, 0]
    return out


if _BACKEND == "numba":
    from numba import njit, prange
    from numba.typed import List as _TypedList

    @njit(parallel=True, cache=True)
    def _masked_passes_jit(x, weights, biases, scales, act_id, out):
        t_passes = out.shape[0]
        n = x.shape[0]
        n_layers = len(weights)
        for t in prange(t_passes):
            cur = x
            for layer in range(n_layers):
                w = weights[layer]
                b = biases[layer]
                width = w.shape[0]
                fan_in = w.shape[1]
                nxt = np.empty((n, width))
                for i in range(n):
                    for j in range(width):
                        acc = b[j]
                        for k in range(fan_in):
                            acc += w[j, k] * cur[i, k]
                        nxt[i, j] = acc
                if layer < n_layers - 1:
                    sc = scales[layer]
                    for i in range(n):
                        for j in range(width):
                            v = nxt[i, j]
                            if act_id == ACT_RELU:
                                if v < 0.0:
                                    v = 0.0
                            else:
                                v = np.tanh(v)
                            nxt[i, j] = v * sc[t, j]
                cur = nxt
            for i in range(n):
                out[t, i] = cur[i, 0]

    def masked_passes_numba(x, weights, biases, scales, act_id, t_passes):
        """Compiled variant of :func:`masked_passes_numpy`."""
        w_list = _TypedList()
        b_list = _TypedList()
        s_list = _TypedList()
        for w in weights:
            w_list.append(np.ascontiguousarray(w))
        for b in biases:
            b_list.append(np.ascontiguousarray(b))
        for s in scales:
            s_list.append(np.ascontiguousarray(s))
        out = np.empty((t_passes, x.shape[0]))
        _masked_passes_jit(np.ascontiguousarray(x), w_list, b_list, s_list, act_id, out)
        return out

else:
    masked_passes_numba = None


def masked_passes(x, weights, biases, scales, act_id, t_passes):
    """Run all stochastic passes through the active backend.

    A network with no hidden layer has no mask to apply and always takes the
    numpy path (there is nothing hot about a single affine map).
    """
    if _BACKEND == "numba" and len(weights) > 1:
        return masked_passes_numba(x, weights, biases, scales, act_id, t_passes)
    return masked_passes_numpy(x, weights, biases, scales, act_id, t_passes)
