# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: sliding median, non-local means, TV denoising.

Numerically equivalent to the pure-NumPy twins in _kernels_np.py (same
algorithms, same edge handling); these exist because the denoising loops
dominate runtime in transform-heavy experiments.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt

cnp.import_array()


def median_filter_2d(cnp.ndarray[cnp.float64_t, ndim=2] a, int window):
    cdef int r = window // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ap = np.pad(a, r, mode="edge")
    cdef int h = a.shape[0]
    cdef int w = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef int n = window * window
    cdef int mid = n // 2
    cdef double[64] buf
    cdef int y, x, i, j, k, m
    cdef double v
    if n > 64:
        raise ValueError("window too large for compiled median (max 8x8)")
    for y in range(h):
        for x in range(w):
            k = 0
            for i in range(window):
                for j in range(window):
                    v = ap[y + i, x + j]
                    m = k
                    while m > 0 and buf[m - 1] > v:
                        buf[m] = buf[m - 1]
                        m -= 1
                    buf[m] = v
                    k += 1
            if n % 2 == 1:
                out[y, x] = buf[mid]
            else:
                out[y, x] = 0.5 * (buf[mid - 1] + buf[mid])
    return out


def nlm_2d(cnp.ndarray[cnp.float64_t, ndim=2] a, int patch, int search,
           double h, double sigma):
    cdef int f = patch // 2
    cdef int s = search // 2
    cdef int hh = a.shape[0]
    cdef int ww = a.shape[1]
    cdef int pad = f + s
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ap = np.pad(a, pad, mode="edge")
    cdef int hc = hh + 2 * f
    cdef int wc = ww + 2 * f
    cdef cnp.ndarray[cnp.float64_t, ndim=2] num = np.zeros((hh, ww), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] den = np.zeros((hh, ww), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] diff2 = np.empty((hc, wc), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rowsum = np.empty((hc, ww), dtype=np.float64)
    cdef double var2 = 2.0 * sigma * sigma
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double inv_area = 1.0 / (patch * patch)
    cdef int dy, dx, y, x, i
    cdef double d, acc, d2, wgt
    for dy in range(-s, s + 1):
        for dx in range(-s, s + 1):
            for y in range(hc):
                for x in range(wc):
                    d = ap[s + y, s + x] - ap[s + dy + y, s + dx + x]
                    diff2[y, x] = d * d
            for y in range(hc):
                acc = 0.0
                for i in range(patch):
                    acc += diff2[y, i]
                rowsum[y, 0] = acc
                for x in range(1, ww):
                    acc += diff2[y, x + patch - 1] - diff2[y, x - 1]
                    rowsum[y, x] = acc
            for x in range(ww):
                acc = 0.0
                for i in range(patch):
                    acc += rowsum[i, x]
                for y in range(hh):
                    if y > 0:
                        acc += rowsum[y + patch - 1, x] - rowsum[y - 1, x]
                    d2 = acc * inv_area - var2
                    if d2 < 0.0:
                        d2 = 0.0
                    wgt = exp(-d2 * inv_h2)
                    num[y, x] += wgt * ap[pad + dy + y, pad + dx + x]
                    den[y, x] += wgt
    for y in range(hh):
        for x in range(ww):
            num[y, x] /= den[y, x]
    return num


def tv_chambolle_2d(cnp.ndarray[cnp.float64_t, ndim=2] a, double weight,
                    double tol, int max_iter):
    cdef int h = a.shape[0]
    cdef int w = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] p = np.zeros((2, h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] div_p = np.zeros((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u = a.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=2] work = np.empty((h, w), dtype=np.float64)
    cdef double tau = 0.25
    cdef double e_init = -1.0
    cdef double e_prev = 0.0
    cdef double energy, fid, tv, gx, gy, denom, inv_w
    cdef int it, y, x
    objectives = []
    inv_w = 1.0 / weight
    for it in range(max_iter):
        # div p (negative adjoint of the forward-difference gradient)
        for y in range(h):
            for x in range(w):
                div_p[y, x] = 0.0
        for y in range(h - 1):
            for x in range(w):
                div_p[y, x] += p[0, y, x]
                div_p[y + 1, x] -= p[0, y, x]
        for y in range(h):
            for x in range(w - 1):
                div_p[y, x] += p[1, y, x]
                div_p[y, x + 1] -= p[1, y, x]
        fid = 0.0
        tv = 0.0
        for y in range(h):
            for x in range(w):
                u[y, x] = a[y, x] - weight * div_p[y, x]
                fid += (u[y, x] - a[y, x]) ** 2
        for y in range(h):
            for x in range(w):
                gx = u[y + 1, x] - u[y, x] if y < h - 1 else 0.0
                gy = u[y, x + 1] - u[y, x] if x < w - 1 else 0.0
                tv += sqrt(gx * gx + gy * gy)
        energy = 0.5 * fid + weight * tv
        objectives.append(energy)
        if e_init < 0.0:
            e_init = energy
            if e_init == 0.0:
                break
        elif fabs(e_prev - energy) <= tol * e_init:
            break
        e_prev = energy
        for y in range(h):
            for x in range(w):
                work[y, x] = div_p[y, x] - a[y, x] * inv_w
        for y in range(h):
            for x in range(w):
                gx = work[y + 1, x] - work[y, x] if y < h - 1 else 0.0
                gy = work[y, x + 1] - work[y, x] if x < w - 1 else 0.0
                denom = 1.0 + tau * sqrt(gx * gx + gy * gy)
                p[0, y, x] = (p[0, y, x] + tau * gx) / denom
                p[1, y, x] = (p[1, y, x] + tau * gy) / denom
    return u, np.asarray(objectives)
