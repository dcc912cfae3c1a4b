# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense float64 kernels.

Mirrors ``ibgraph._pykernels`` function for function. The win over numpy is
per-call overhead: training graphs here are small, so dispatch cost
dominates the arithmetic.
"""

from libc.math cimport exp as c_exp
from libc.math cimport fabs
from libc.math cimport log as c_log
from libc.math cimport log1p as c_log1p
from libc.math cimport pow as c_pow
from libc.math cimport sqrt as c_sqrt

import numpy as np

NAME = "compiled"


# -- matrix products ----------------------------------------------------


def matmul(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, l
    cdef double ail
    for i in range(m):
        for l in range(k):
            ail = a[i, l]
            for j in range(n):
                o[i, j] = o[i, j] + ail * b[l, j]
    return out


def matmul_nt(double[:, ::1] a, double[:, ::1] b):
    """a @ b.T without materializing the transpose."""
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[0]
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, l
    cdef double s
    for i in range(m):
        for j in range(n):
            s = 0.0
            for l in range(k):
                s += a[i, l] * b[j, l]
            o[i, j] = s
    return out


def matmul_tn(double[:, ::1] a, double[:, ::1] b):
    """a.T @ b without materializing the transpose."""
    cdef Py_ssize_t k = a.shape[0], m = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, l
    cdef double ali
    for l in range(k):
        for i in range(m):
            ali = a[l, i]
            for j in range(n):
                o[i, j] = o[i, j] + ali * b[l, j]
    return out


# -- elementwise --------------------------------------------------------


def ew_add(a, b):
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] + y[i]
    return out.reshape(a.shape)


def ew_sub(a, b):
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] - y[i]
    return out.reshape(a.shape)


def ew_mul(a, b):
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] * y[i]
    return out.reshape(a.shape)


def ew_div(a, b):
    cdef double[::1] x = a.ravel()
    cdef double[::1] y = b.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] / y[i]
    return out.reshape(a.shape)


def ew_neg(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = -x[i]
    return out.reshape(a.shape)


def scal_add(a, double c):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] + c
    return out.reshape(a.shape)


def scal_mul(a, double c):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] * c
    return out.reshape(a.shape)


def relu(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] if x[i] > 0.0 else 0.0
    return out.reshape(a.shape)


def relu_grad(g, a):
    cdef double[::1] gv = g.ravel()
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = gv[i] if x[i] > 0.0 else 0.0
    return out.reshape(a.shape)


def sigmoid(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v, t
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i]
        if v >= 0.0:
            o[i] = 1.0 / (1.0 + c_exp(-v))
        else:
            t = c_exp(v)
            o[i] = t / (1.0 + t)
    return out.reshape(a.shape)


def sigmoid_grad(g, s):
    """Gradient from the saved forward output s = sigmoid(x)."""
    cdef double[::1] gv = g.ravel()
    cdef double[::1] sv = s.ravel()
    cdef Py_ssize_t n = sv.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = gv[i] * sv[i] * (1.0 - sv[i])
    return out.reshape(g.shape)


def softplus(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v, t
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i]
        t = c_log1p(c_exp(-fabs(v)))
        o[i] = v + t if v > 0.0 else t
    return out.reshape(a.shape)


def softplus_grad(g, a):
    cdef double[::1] gv = g.ravel()
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v, t
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i]
        if v >= 0.0:
            o[i] = gv[i] / (1.0 + c_exp(-v))
        else:
            t = c_exp(v)
            o[i] = gv[i] * t / (1.0 + t)
    return out.reshape(g.shape)


def exp(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = c_exp(x[i])
    return out.reshape(a.shape)


def log(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = c_log(x[i])
    return out.reshape(a.shape)


def power(a, double p):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = c_pow(x[i], p)
    return out.reshape(a.shape)


def power_grad(g, a, double p):
    cdef double[::1] gv = g.ravel()
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = gv[i] * p * c_pow(x[i], p - 1.0)
    return out.reshape(g.shape)


def clamp(a, double lo, double hi):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        v = x[i]
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        o[i] = v
    return out.reshape(a.shape)


def clamp_grad(g, a, double lo, double hi):
    cdef double[::1] gv = g.ravel()
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = gv[i] if lo <= x[i] <= hi else 0.0
    return out.reshape(g.shape)


# -- reductions and broadcasts ------------------------------------------


def sum_all(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    cdef double s = 0.0
    for i in range(n):
        s += x[i]
    return s


def mean_all(a):
    cdef double[::1] x = a.ravel()
    cdef Py_ssize_t n = x.shape[0], i
    cdef double s = 0.0
    for i in range(n):
        s += x[i]
    return s / n


def sum_axis(double[:, ::1] a, int axis):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    cdef double s
    cdef double[::1] o
    if axis == 0:
        out = np.zeros(n)
        o = out
        for i in range(m):
            for j in range(n):
                o[j] = o[j] + a[i, j]
        return out
    out = np.empty(m)
    o = out
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += a[i, j]
        o[i] = s
    return out


def mean_axis(double[:, ::1] a, int axis):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i
    cdef double c
    if axis == 0:
        c = <double> m
    else:
        c = <double> n
    out = sum_axis(a, axis)
    cdef double[::1] o = out
    for i in range(o.shape[0]):
        o[i] = o[i] / c
    return out


def bcast_rows(v, Py_ssize_t m):
    """Stack vector v as m identical rows."""
    cdef double[::1] x = v.ravel()
    cdef Py_ssize_t n = x.shape[0], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[i, j] = x[j]
    return out


def bcast_cols(v, Py_ssize_t n):
    """Stack vector v as n identical columns."""
    cdef double[::1] x = v.ravel()
    cdef Py_ssize_t m = x.shape[0], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[i, j] = x[i]
    return out


def rowvec_add(double[:, ::1] x, double[::1] v):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[i, j] = x[i, j] + v[j]
    return out


def rowvec_mul(double[:, ::1] x, double[::1] v):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[i, j] = x[i, j] * v[j]
    return out


# -- fused ---------------------------------------------------------------


def softmax_xent(logits, Py_ssize_t y):
    """Stable -log softmax(logits)[y]; returns (loss, softmax probabilities)."""
    cdef double[::1] l = logits.ravel()
    cdef Py_ssize_t c = l.shape[0], i
    cdef double mx = l[0], s = 0.0
    for i in range(1, c):
        if l[i] > mx:
            mx = l[i]
    probs = np.empty(c)
    cdef double[::1] p = probs
    for i in range(c):
        p[i] = c_exp(l[i] - mx)
        s += p[i]
    for i in range(c):
        p[i] = p[i] / s
    return c_log(s) - (l[y] - mx), probs


def adam_step(p, g, m, v, int step, double lr, double b1, double b2, double eps):
    """One Adam update, in place on p, m and v."""
    cdef double[::1] pv = p.ravel()
    cdef double[::1] gv = g.ravel()
    cdef double[::1] mv = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef Py_ssize_t n = pv.shape[0], i
    cdef double bc1 = 1.0 - c_pow(b1, step)
    cdef double bc2 = 1.0 - c_pow(b2, step)
    for i in range(n):
        mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i]
        vv[i] = b2 * vv[i] + (1.0 - b2) * (gv[i] * gv[i])
        pv[i] = pv[i] - lr * (mv[i] / bc1) / (c_sqrt(vv[i] / bc2) + eps)
