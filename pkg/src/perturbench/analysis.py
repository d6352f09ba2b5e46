"""Spectral and interpretability tools: DCT energy decomposition of
perturbations, Grad-CAM, attention rollout, and feature-map differencing."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import tensor
from .defenses import resize_matrix
from .models.networks import TAP_ATTN, TAP_FIRST, TAP_LAST, TinyViT
from .rng import Rng


@lru_cache(maxsize=16)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal type-II DCT matrix (rows are basis functions)."""
    m = np.zeros((n, n))
    for u in range(n):
        cu = np.sqrt(1.0 / n) if u == 0 else np.sqrt(2.0 / n)
        m[u] = cu * np.cos((2 * np.arange(n) + 1) * u * np.pi / (2 * n))
    return m


def dct2(a: np.ndarray) -> np.ndarray:
    """2-D orthonormal DCT-II of a single channel."""
    return dct_matrix(a.shape[0]) @ a @ dct_matrix(a.shape[1]).T


@dataclass(frozen=True)
class SpectrumHeatmap:
    """Energy of a perturbation per 2-D frequency, summed over channels.

    spread_radius is the energy-weighted mean frequency radius, normalized
    by the largest radius; 0 means all energy at DC, values toward 1 mean
    the perturbation attacks the high end of the spectrum.
    """

    coefficients: np.ndarray  # (H, W), nonnegative
    total_energy: float
    spread_radius: float


def dct_spectrum(delta: np.ndarray) -> SpectrumHeatmap:
    delta = np.asarray(delta, dtype=np.float64)
    if delta.ndim == 2:
        delta = delta[:, :, None]
    h, w = delta.shape[:2]
    energy = np.zeros((h, w))
    for c in range(delta.shape[2]):
        coeff = dct2(delta[:, :, c])
        energy += coeff * coeff
    total = float(energy.sum())
    uu, vv = np.mgrid[0:h, 0:w].astype(np.float64)
    radius = np.sqrt(uu * uu + vv * vv)
    max_radius = float(np.sqrt((h - 1) ** 2 + (w - 1) ** 2))
    spread = float((energy * radius).sum() / (total * max_radius)) if total > 0 else 0.0
    return SpectrumHeatmap(coefficients=energy, total_energy=total, spread_radius=spread)


def _minmax(a: np.ndarray) -> np.ndarray:
    """Min-max normalize so max is exactly 1 unless the map is all zero."""
    hi = float(a.max())
    if hi == 0.0 and float(a.min()) == 0.0:
        return np.zeros_like(a)
    lo = float(a.min())
    if hi == lo:
        return np.ones_like(a)
    return (a - lo) / (hi - lo)


def _upsample(a: np.ndarray, h: int, w: int) -> np.ndarray:
    my = resize_matrix(h, a.shape[0])
    mx = resize_matrix(w, a.shape[1])
    return my @ a @ mx.T


def _token_grid(tokens: np.ndarray, model: TinyViT) -> np.ndarray:
    """Drop [CLS] and reshape patch tokens to (grid, grid, dim)."""
    g = model.patch_grid[0]
    return tokens[1:].reshape(g, g, tokens.shape[-1])


def grad_cam(model, x: np.ndarray, class_id: int) -> np.ndarray:
    """Class-gradient-weighted activation map (Selvaraju et al. 2019).

    CNNs tap the last convolution stage; attention models tap the layer-norm
    output after the last block, with patch tokens laid back onto the grid.
    Returns an (H, W) map in [0, 1], max exactly 1 unless identically zero.
    """
    x = np.asarray(x, dtype=np.float64)
    _, taps = model.taps_for_class(x, class_id)
    if TAP_LAST not in taps:
        raise ValueError(f"model {model.kind} exposes no {TAP_LAST} tap")
    act_t = taps[TAP_LAST]
    act, grad = act_t.data[0], act_t.grad[0]
    if isinstance(model, TinyViT):
        act = _token_grid(act, model)
        grad = _token_grid(grad, model)
    weights = grad.mean(axis=(0, 1))
    cam = np.maximum((act * weights).sum(axis=-1), 0.0)
    # normalize after upsampling so the map's max is exactly 1
    return _minmax(_upsample(cam, x.shape[0], x.shape[1]))


def attention_rollout(model, x: np.ndarray) -> np.ndarray:
    """Rollout attention visualization (Abnar & Zuidema 2020): per layer
    average heads, mix 0.5 with the identity for the residual path,
    row-normalize, multiply across layers, read the [CLS] row."""
    x = np.asarray(x, dtype=np.float64)
    _, taps = model.forward_graph(tensor(x[None]))
    probs = taps.get(TAP_ATTN)
    if not probs:
        raise ValueError(f"model {model.kind} has no attention maps")
    rollout = None
    for layer in probs:
        a = layer.data[0].mean(axis=0)  # heads averaged, (tokens, tokens)
        a = 0.5 * a + 0.5 * np.eye(a.shape[0])
        a = a / a.sum(axis=1, keepdims=True)
        rollout = a if rollout is None else a @ rollout
    g = model.patch_grid[0]
    cls_row = rollout[0, 1:].reshape(g, g)
    return _minmax(_upsample(cls_row, x.shape[0], x.shape[1]))


def feature_map_diff(model, x: np.ndarray, x_adv: np.ndarray, seed: int = 0) -> np.ndarray:
    """|first-block activations of x minus those of x_adv| for one channel
    (picked from the seed), min-max normalized and upsampled to image size."""
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    _, taps_a = model.forward_graph(tensor(x[None]))
    _, taps_b = model.forward_graph(tensor(x_adv[None]))
    if TAP_FIRST not in taps_a:
        raise ValueError(f"model {model.kind} exposes no {TAP_FIRST} tap")
    a = taps_a[TAP_FIRST].data[0]
    b = taps_b[TAP_FIRST].data[0]
    if isinstance(model, TinyViT):
        a = _token_grid(a, model)
        b = _token_grid(b, model)
    channel = int(Rng(seed, stream=61).integers(0, a.shape[-1]))
    diff = np.abs(a[:, :, channel] - b[:, :, channel])
    return _minmax(_upsample(diff, x.shape[0], x.shape[1]))
