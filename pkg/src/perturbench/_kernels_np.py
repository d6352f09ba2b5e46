"""Pure-NumPy implementations of the hot image kernels.

Functional twin of the compiled extension in _kernels.pyx; selected at
import time by perturbench.backend when the extension is unavailable (or
when PERTURBENCH_BACKEND=python). All functions operate on single-channel
float64 arrays.
"""

from __future__ import annotations

import numpy as np


def median_filter_2d(a: np.ndarray, window: int) -> np.ndarray:
    """Sliding median with edge-replication padding."""
    r = window // 2
    ap = np.pad(a, r, mode="edge")
    h, w = a.shape
    stack = np.empty((window * window, h, w), dtype=np.float64)
    k = 0
    for i in range(window):
        for j in range(window):
            stack[k] = ap[i : i + h, j : j + w]
            k += 1
    return np.median(stack, axis=0)


def _box_mean(a: np.ndarray, radius: int) -> np.ndarray:
    """Mean over (2r+1)^2 windows, valid region only (output shrinks by 2r)."""
    size = 2 * radius + 1
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    s = (c[size:, size:] - c[:-size, size:] - c[size:, :-size] + c[:-size, :-size])
    return s / (size * size)


def nlm_2d(a: np.ndarray, patch: int, search: int, h: float, sigma: float) -> np.ndarray:
    """Non-local means with the 2*sigma^2 distance offset of the fast variant.

    For each pixel, patches within the search window are compared by mean
    squared difference d2 and averaged with weights
    exp(-max(d2 - 2*sigma^2, 0) / h^2). Edge handling is replicate padding.
    """
    f = patch // 2
    s = search // 2
    hh, ww = a.shape
    pad = f + s
    ap = np.pad(a, pad, mode="edge")
    num = np.zeros((hh, ww), dtype=np.float64)
    den = np.zeros((hh, ww), dtype=np.float64)
    var2 = 2.0 * sigma * sigma
    inv_h2 = 1.0 / (h * h)
    # the (f-padded) window around the output region; box-filtering the
    # squared offset difference gives each pixel's mean patch distance
    core = ap[s : s + hh + 2 * f, s : s + ww + 2 * f]
    for dy in range(-s, s + 1):
        for dx in range(-s, s + 1):
            shifted = ap[s + dy : s + dy + hh + 2 * f, s + dx : s + dx + ww + 2 * f]
            d2 = _box_mean((core - shifted) ** 2, f)
            wgt = np.exp(-np.maximum(d2 - var2, 0.0) * inv_h2)
            num += wgt * shifted[f : f + hh, f : f + ww]
            den += wgt
    return num / den


def _gradient(u: np.ndarray) -> np.ndarray:
    """Forward differences with Neumann boundary (zero at the far edge)."""
    g = np.zeros((2,) + u.shape, dtype=np.float64)
    g[0, :-1, :] = u[1:, :] - u[:-1, :]
    g[1, :, :-1] = u[:, 1:] - u[:, :-1]
    return g


def _divergence(p: np.ndarray) -> np.ndarray:
    """Negative adjoint of _gradient."""
    d = np.zeros(p.shape[1:], dtype=np.float64)
    d[:-1, :] += p[0, :-1, :]
    d[1:, :] -= p[0, :-1, :]
    d[:, :-1] += p[1, :, :-1]
    d[:, 1:] -= p[1, :, :-1]
    return d


def tv_chambolle_2d(a: np.ndarray, weight: float, tol: float, max_iter: int):
    """Chambolle's dual projection iteration for the ROF model.

    Minimizes 0.5*||u - a||^2 + weight*TV(u). Returns (u, objectives) where
    objectives holds the primal energy at each iterate; iteration stops when
    the objective change drops below tol relative to the initial energy.
    """
    tau = 0.25
    p = np.zeros((2,) + a.shape, dtype=np.float64)
    u = a.copy()
    objectives = []
    e_init = None
    e_prev = None
    for _ in range(max_iter):
        div_p = _divergence(p)
        u = a - weight * div_p
        g = _gradient(u)
        energy = 0.5 * float(np.sum((u - a) ** 2)) + weight * float(
            np.sum(np.sqrt(g[0] ** 2 + g[1] ** 2)))
        objectives.append(energy)
        if e_init is None:
            e_init = energy
            if e_init == 0.0:
                break
        elif abs(e_prev - energy) <= tol * e_init:
            break
        e_prev = energy
        # p step ascends the dual of the ROF problem
        gd = _gradient(div_p - a / weight)
        denom = 1.0 + tau * np.sqrt(gd[0] ** 2 + gd[1] ** 2)
        p = (p + tau * gd) / denom
    return u, np.asarray(objectives)
