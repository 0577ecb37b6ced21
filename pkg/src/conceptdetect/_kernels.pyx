# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled loss kernels. Mirrors ``_kernels_py`` function for function.

Each row is handled in two sequential passes over the label axis: one to
accumulate the soft counts, one to write the gradient. Reductions run in a
fixed order so results are reproducible.
"""

import numpy as np
from libc.math cimport log, isnan


def soft_f1_components(double[:, ::1] y, double[:, ::1] p, double eps):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1], i, j
    tp_a = np.empty(n)
    fp_a = np.empty(n)
    fn_a = np.empty(n)
    prec_a = np.empty(n)
    rec_a = np.empty(n)
    f1_a = np.empty(n)
    cdef double[::1] tp_v = tp_a, fp_v = fp_a, fn_v = fn_a
    cdef double[::1] prec_v = prec_a, rec_v = rec_a, f1_v = f1_a
    cdef double tp, fp, fn, yy, pp, pr, rc, f
    for i in range(n):
        tp = 0.0
        fp = 0.0
        fn = 0.0
        for j in range(k):
            yy = y[i, j]
            pp = p[i, j]
            tp += yy * pp
            fp += (1.0 - yy) * pp
            fn += yy * (1.0 - pp)
        pr = tp / (tp + fp + eps)
        rc = tp / (tp + fn + eps)
        f = 2.0 * pr * rc / (pr + rc + eps)
        if isnan(f):
            f = 0.0
        tp_v[i] = tp
        fp_v[i] = fp
        fn_v[i] = fn
        prec_v[i] = pr
        rec_v[i] = rc
        f1_v[i] = f
    return tp_a, fp_a, fn_a, prec_a, rec_a, f1_a


def soft_f1_loss(double[:, ::1] y, double[:, ::1] p, double eps):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1], i, j
    grad_a = np.zeros((n, k))
    cdef double[:, ::1] g = grad_a
    cdef double tp, fp, fn, yy, pp, pr, rc, f, p_den, r_den, f_den
    cdef double df_dpr, df_drc, total = 0.0
    for i in range(n):
        tp = 0.0
        fp = 0.0
        fn = 0.0
        for j in range(k):
            yy = y[i, j]
            pp = p[i, j]
            tp += yy * pp
            fp += (1.0 - yy) * pp
            fn += yy * (1.0 - pp)
        p_den = tp + fp + eps
        r_den = tp + fn + eps
        pr = tp / p_den
        rc = tp / r_den
        f_den = pr + rc + eps
        f = 2.0 * pr * rc / f_den
        if isnan(f):
            continue
        total += f
        df_dpr = 2.0 * rc * (rc + eps) / (f_den * f_den) / n
        df_drc = 2.0 * pr * (pr + eps) / (f_den * f_den) / n
        for j in range(k):
            yy = y[i, j]
            g[i, j] = -(df_dpr * ((yy * p_den - tp) / (p_den * p_den)) + df_drc * (yy / r_den))
    return 1.0 - total / n, grad_a


def bce_loss(double[:, ::1] y, double[:, ::1] p, double eps):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1], i, j
    grad_a = np.zeros((n, k))
    cdef double[:, ::1] g = grad_a
    cdef double yy, pp, q, total = 0.0, hi = 1.0 - eps
    cdef double scale = 1.0 / (n * k)
    for i in range(n):
        for j in range(k):
            yy = y[i, j]
            pp = p[i, j]
            if pp < eps:
                q = eps
            elif pp > hi:
                q = hi
            else:
                q = pp
                g[i, j] = (-(yy / q) + (1.0 - yy) / (1.0 - q)) * scale
            total += yy * log(q) + (1.0 - yy) * log(1.0 - q)
    return -total * scale, grad_a
