# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring kernels (hot path).

Mirrors kgelab._kernels._numpy function for function. Per-triad arithmetic
keeps one fixed operation order, so scalar, batch, and sweep calls agree bit
for bit within this backend. Accumulation is a sequential float64 loop,
which may differ from the numpy backend's pairwise reduction in the last
ulp; backends are self-consistent, not mutually bit-identical.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

NAME = "compiled"


def transe_scores(
    cnp.float64_t[:, ::1] ent,
    cnp.float64_t[:, ::1] rel,
    cnp.int64_t[::1] s,
    cnp.int64_t[::1] p,
    cnp.int64_t[::1] o,
    int norm_order=2,
):
    if norm_order != 1 and norm_order != 2:
        raise ValueError(f"norm_order must be 1 or 2, got {norm_order}")
    cdef Py_ssize_t n_rows = s.shape[0]
    cdef Py_ssize_t d = ent.shape[1]
    out_arr = np.empty(n_rows, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, si, pi, oi
    cdef double acc, delta
    for i in range(n_rows):
        si = s[i]
        pi = p[i]
        oi = o[i]
        acc = 0.0
        if norm_order == 2:
            for j in range(d):
                delta = (ent[si, j] + rel[pi, j]) - ent[oi, j]
                acc += delta * delta
            out[i] = -sqrt(acc)
        else:
            for j in range(d):
                delta = (ent[si, j] + rel[pi, j]) - ent[oi, j]
                acc += fabs(delta)
            out[i] = -acc
    return out_arr


def transe_sweep_objects(
    cnp.float64_t[:, ::1] ent,
    cnp.float64_t[:, ::1] rel,
    long long s,
    long long p,
    int norm_order=2,
):
    if norm_order != 1 and norm_order != 2:
        raise ValueError(f"norm_order must be 1 or 2, got {norm_order}")
    cdef Py_ssize_t n = ent.shape[0]
    cdef Py_ssize_t d = ent.shape[1]
    t_arr = np.empty(d, dtype=np.float64)
    cdef cnp.float64_t[::1] t = t_arr
    cdef Py_ssize_t c, j
    cdef double acc, delta
    for j in range(d):
        t[j] = ent[s, j] + rel[p, j]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    for c in range(n):
        acc = 0.0
        if norm_order == 2:
            for j in range(d):
                delta = t[j] - ent[c, j]
                acc += delta * delta
            out[c] = -sqrt(acc)
        else:
            for j in range(d):
                delta = t[j] - ent[c, j]
                acc += fabs(delta)
            out[c] = -acc
    return out_arr


def transe_sweep_subjects(
    cnp.float64_t[:, ::1] ent,
    cnp.float64_t[:, ::1] rel,
    long long p,
    long long o,
    int norm_order=2,
):
    if norm_order != 1 and norm_order != 2:
        raise ValueError(f"norm_order must be 1 or 2, got {norm_order}")
    cdef Py_ssize_t n = ent.shape[0]
    cdef Py_ssize_t d = ent.shape[1]
    cdef Py_ssize_t c, j
    cdef double acc, delta
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    for c in range(n):
        acc = 0.0
        if norm_order == 2:
            for j in range(d):
                delta = (ent[c, j] + rel[p, j]) - ent[o, j]
                acc += delta * delta
            out[c] = -sqrt(acc)
        else:
            for j in range(d):
                delta = (ent[c, j] + rel[p, j]) - ent[o, j]
                acc += fabs(delta)
            out[c] = -acc
    return out_arr


def complex_scores(
    cnp.float64_t[:, ::1] ent,
    cnp.float64_t[:, ::1] rel,
    cnp.int64_t[::1] s,
    cnp.int64_t[::1] p,
    cnp.int64_t[::1] o,
):
    cdef Py_ssize_t n_rows = s.shape[0]
    cdef Py_ssize_t k = ent.shape[1] // 2
    out_arr = np.empty(n_rows, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, si, pi, oi
    cdef double acc, sr, sim, pr, pim, orr, oim
    for i in range(n_rows):
        si = s[i]
        pi = p[i]
        oi = o[i]
        acc = 0.0
        for j in range(k):
            sr = ent[si, j]
            sim = ent[si, k + j]
            pr = rel[pi, j]
            pim = rel[pi, k + j]
            orr = ent[oi, j]
            oim = ent[oi, k + j]
            acc += (((pr * sr) * orr + (pr * sim) * oim) + (pim * sr) * oim) \
                - (pim * sim) * orr
        out[i] = acc
    return out_arr


def complex_sweep_objects(
    cnp.float64_t[:, ::1] ent,
    cnp.float64_t[:, ::1] rel,
    long long s,
    long long p,
):
    cdef Py_ssize_t n = ent.shape[0]
    cdef Py_ssize_t k = ent.shape[1] // 2
    a_arr = np.empty(k, dtype=np.float64)
    b_arr = np.empty(k, dtype=np.float64)
    c_arr = np.empty(k, dtype=np.float64)
    d_arr = np.empty(k, dtype=np.float64)
    cdef cnp.float64_t[::1] a = a_arr, b = b_arr, cc = c_arr, dd = d_arr
    cdef Py_ssize_t c, j
    cdef double acc
    for j in range(k):
        a[j] = rel[p, j] * ent[s, j]
        b[j] = rel[p, j] * ent[s, k + j]
        cc[j] = rel[p, k + j] * ent[s, j]
        dd[j] = rel[p, k + j] * ent[s, k + j]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    for c in range(n):
        acc = 0.0
        for j in range(k):
            acc += ((a[j] * ent[c, j] + b[j] * ent[c, k + j])
                    + cc[j] * ent[c, k + j]) - dd[j] * ent[c, j]
        out[c] = acc
    return out_arr


def complex_sweep_subjects(
    cnp.float64_t[:, ::1] ent,
    cnp.float64_t[:, ::1] rel,
    long long p,
    long long o,
):
    cdef Py_ssize_t n = ent.shape[0]
    cdef Py_ssize_t k = ent.shape[1] // 2
    cdef Py_ssize_t c, j
    cdef double acc, pr, pim, orr, oim, cr, ci
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    for c in range(n):
        acc = 0.0
        for j in range(k):
            pr = rel[p, j]
            pim = rel[p, k + j]
            orr = ent[o, j]
            oim = ent[o, k + j]
            cr = ent[c, j]
            ci = ent[c, k + j]
            acc += (((pr * cr) * orr + (pr * ci) * oim) + (pim * cr) * oim) \
                - (pim * ci) * orr
        out[c] = acc
    return out_arr
