"""Dense float64 kernels, numpy implementation.

This is the fallback backend; ``ibgraph._ckernels`` implements the same
callables as a compiled extension and ``ibgraph.kernels`` picks one at
import time. All functions assume C-contiguous float64 inputs whose shapes
were validated by the caller, and none of them mutate their inputs except
``adam_step``, which updates the parameter and moment buffers in place.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"


# -- matrix products ----------------------------------------------------


def matmul(a, b):
    return a @ b


def matmul_nt(a, b):
    """a @ b.T without materializing the transpose."""
    return a @ b.T


def matmul_tn(a, b):
    """a.T @ b without materializing the transpose."""
    return a.T @ b


# -- elementwise --------------------------------------------------------


def ew_add(a, b):
    return a + b


def ew_sub(a, b):
    return a - b


def ew_mul(a, b):
    return a * b


def ew_div(a, b):
    return a / b


def ew_neg(a):
    return -a


def scal_add(a, c):
    return a + c


def scal_mul(a, c):
    return a * c


def relu(a):
    return np.maximum(a, 0.0)


def relu_grad(g, a):
    return np.where(a > 0.0, g, 0.0)


def sigmoid(a):
    # Split by sign so exp() never overflows.
    e = np.exp(-np.abs(a))
    return np.where(a >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_grad(g, s):
    """Gradient from the saved forward output s = sigmoid(x)."""
    return g * s * (1.0 - s)


def softplus(a):
    t = np.log1p(np.exp(-np.abs(a)))
    return np.where(a > 0.0, a + t, t)


def softplus_grad(g, a):
    return g * sigmoid(a)


def exp(a):
    return np.exp(a)


def log(a):
    return np.log(a)


def power(a, p):
    return np.power(a, p)


def power_grad(g, a, p):
    return g * p * np.power(a, p - 1.0)


def clamp(a, lo, hi):
    return np.clip(a, lo, hi)


def clamp_grad(g, a, lo, hi):
    return np.where((a >= lo) & (a <= hi), g, 0.0)


# -- reductions and broadcasts ------------------------------------------


def sum_all(a):
    return float(a.sum())


def mean_all(a):
    return float(a.mean())


def sum_axis(a, axis):
    return np.ascontiguousarray(a.sum(axis=axis))


def mean_axis(a, axis):
    return np.ascontiguousarray(a.mean(axis=axis))


def bcast_rows(v, m):
    """Stack vector v as m identical rows."""
    return np.tile(v, (m, 1))


def bcast_cols(v, n):
    """Stack vector v as n identical columns."""
    return np.tile(v[:, None], (1, n))


def rowvec_add(x, v):
    return x + v[None, :]


def rowvec_mul(x, v):
    return x * v[None, :]


# -- fused ---------------------------------------------------------------


def softmax_xent(logits, y):
    """Stable -log softmax(logits)[y]; returns (loss, softmax probabilities)."""
    mx = float(logits.max())
    e = np.exp(logits - mx)
    s = float(e.sum())
    probs = e / s
    return math.log(s) - (float(logits[y]) - mx), probs


def adam_step(p, g, m, v, step, lr, b1, b2, eps):
    """One Adam update, in place on p, m and v."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    bc1 = 1.0 - b1 ** step
    bc2 = 1.0 - b2 ** step
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
