"""Preprocessing defenses: pure Image -> Image maps applied before the model.

Six transforms: median smoothing (ss), non-local means (nlm), total
variation minimization (tvm), JPEG recompression (jpeg), center crop with
rescale (cr), and color channel mixing (ccp). An extra "identity" kind is
the degenerate member used by transform distributions.

All defenses preserve shape and the [0, 1] range and are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .attacks.ccp import CcpParams, ccp_transform
from .image import clip_to_domain

DEFENSE_NAMES = ("ss", "nlm", "tvm", "jpeg", "cr", "ccp", "identity")


def median_smooth(x: np.ndarray, window: int = 3) -> np.ndarray:
    """Per-channel sliding median with edge replication."""
    if window % 2 == 0 or window < 1:
        raise ValueError("median window must be odd and positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for c in range(x.shape[2]):
        out[:, :, c] = backend.median_filter_2d(np.ascontiguousarray(x[:, :, c]), window)
    return out


def estimate_sigma(x: np.ndarray) -> float:
    """Robust wavelet-domain noise estimate (Donoho & Johnstone).

    One level of the orthonormal Haar transform; sigma is the median
    absolute diagonal-detail (HH) coefficient divided by 0.6745, averaged
    over channels. Zero for any locally-smooth noiseless image.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    h, w = x.shape[:2]
    if h < 2 or w < 2:
        raise ValueError("image too small for a Haar level")
    he, we = h - h % 2, w - w % 2
    vals = []
    for c in range(x.shape[2]):
        a = x[:he, :we, c]
        hh = (a[0::2, 0::2] - a[0::2, 1::2] - a[1::2, 0::2] + a[1::2, 1::2]) / 2.0
        vals.append(np.median(np.abs(hh)) / 0.6745)
    return float(np.mean(vals))


def nlm_denoise(x: np.ndarray, patch: int = 7, search: int = 23,
                strength: float = 0.07) -> np.ndarray:
    """Per-channel non-local means.

    Patch distances use the fast-NLM convention: mean squared difference
    minus 2*sigma^2 (floored at 0), with the estimated noise level sigma and
    filtering parameter h = strength. A sigma of exactly 0 short-circuits to
    the input, so clean flat images are never distorted.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < search or x.shape[1] < search:
        raise ValueError(f"image smaller than the {search}x{search} search window")
    sigma = estimate_sigma(x)
    if sigma == 0.0:
        return x.copy()
    out = np.empty_like(x)
    for c in range(x.shape[2]):
        out[:, :, c] = backend.nlm_2d(np.ascontiguousarray(x[:, :, c]),
                                      patch, search, strength, sigma)
    return clip_to_domain(out)


def tv_minimize(x: np.ndarray, weight: float = 0.1, tol: float = 2e-4,
                max_iter: int = 200) -> np.ndarray:
    """Rudin-Osher-Fatemi denoising via Chambolle's dual projection
    iteration (Chambolle 2004), run per channel."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for c in range(x.shape[2]):
        out[:, :, c], _ = backend.tv_chambolle_2d(np.ascontiguousarray(x[:, :, c]),
                                                  weight, tol, max_iter)
    return clip_to_domain(out)


def tv_objectives(x2d: np.ndarray, weight: float = 0.1, tol: float = 2e-4,
                  max_iter: int = 200) -> np.ndarray:
    """Primal ROF objective at each Chambolle iterate (for monotonicity checks)."""
    _, obj = backend.tv_chambolle_2d(np.ascontiguousarray(np.asarray(x2d, dtype=np.float64)),
                                     weight, tol, max_iter)
    return obj


# -- JPEG round-trip -----------------------------------------------------

_Q_LUMA = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99]], dtype=np.float64)

_Q_CHROMA = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99]], dtype=np.float64)

_RGB_TO_YCC = np.array([
    [0.299, 0.587, 0.114],
    [-0.168735892, -0.331264108, 0.5],
    [0.5, -0.418687589, -0.081312411]], dtype=np.float64)

_YCC_TO_RGB = np.linalg.inv(_RGB_TO_YCC)


def _dct8_matrix() -> np.ndarray:
    n = 8
    m = np.zeros((n, n))
    for u in range(n):
        cu = np.sqrt(1.0 / n) if u == 0 else np.sqrt(2.0 / n)
        m[u] = cu * np.cos((2 * np.arange(n) + 1) * u * np.pi / (2 * n))
    return m


_DCT8 = _dct8_matrix()


def _quality_scaled(table: np.ndarray, quality: int) -> np.ndarray:
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((table * scale + 50.0) / 100.0), 1.0, 255.0)


def _jpeg_channel(plane: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    """DCT-quantize-dequantize one level-shifted plane, 8x8 blocks."""
    h, w = plane.shape
    ph, pw = (-h) % 8, (-w) % 8
    p = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    bh, bw = p.shape[0] // 8, p.shape[1] // 8
    blocks = p.reshape(bh, 8, bw, 8).transpose(0, 2, 1, 3)
    coef = _DCT8 @ blocks @ _DCT8.T
    coef = np.round(coef / qtable) * qtable
    rec = _DCT8.T @ coef @ _DCT8
    out = rec.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)
    return out[:h, :w]


def jpeg_roundtrip(x: np.ndarray, quality: int = 65) -> np.ndarray:
    """JPEG-style lossy round trip: YCbCr, blockwise DCT, quantization by
    the standard tables at the given quality, inverse, back to RGB.

    No chroma subsampling and no entropy coding; decoding inverts entropy
    coding losslessly, so all the loss this defense exists for comes from
    quantization.
    """
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in [1, 100]")
    x = np.asarray(x, dtype=np.float64)
    v = x * 255.0
    qy = _quality_scaled(_Q_LUMA, quality)
    if x.shape[2] == 1:
        out = _jpeg_channel(v[:, :, 0] - 128.0, qy) + 128.0
        return clip_to_domain(out[:, :, None] / 255.0)
    qc = _quality_scaled(_Q_CHROMA, quality)
    ycc = v @ _RGB_TO_YCC.T
    ycc[:, :, 1:] += 128.0
    rec = np.empty_like(ycc)
    rec[:, :, 0] = _jpeg_channel(ycc[:, :, 0] - 128.0, qy) + 128.0
    for c in (1, 2):
        rec[:, :, c] = _jpeg_channel(ycc[:, :, c] - 128.0, qc) + 128.0
    rec[:, :, 1:] -= 128.0
    rgb = rec @ _YCC_TO_RGB.T
    return clip_to_domain(rgb / 255.0)


# -- crop and rescale ----------------------------------------------------

def resize_matrix(out_size: int, in_size: int) -> np.ndarray:
    """Row-stochastic 1-D bilinear interpolation matrix (out_size, in_size),
    half-pixel-center convention."""
    m = np.zeros((out_size, in_size), dtype=np.float64)
    scale = in_size / out_size
    for o in range(out_size):
        src = (o + 0.5) * scale - 0.5
        src = min(max(src, 0.0), in_size - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, in_size - 1)
        frac = src - lo
        m[o, lo] += 1.0 - frac
        m[o, hi] += frac
    return m


def crop_rescale(x: np.ndarray, margin: int = 2) -> np.ndarray:
    """Center crop by `margin` pixels per side, then bilinear-resample back
    to the original size."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[:2]
    if h <= 2 * margin or w <= 2 * margin:
        raise ValueError(f"image {h}x{w} too small for margin {margin}")
    crop = x[margin : h - margin, margin : w - margin, :]
    my = resize_matrix(h, h - 2 * margin)
    mx = resize_matrix(w, w - 2 * margin)
    out = np.einsum("oi,ijc->ojc", my, crop)
    out = np.einsum("pj,ojc->opc", mx, out)
    return clip_to_domain(out)


def crop_rescale_adjoint(upstream: np.ndarray, h: int, w: int, margin: int = 2) -> np.ndarray:
    """Exact adjoint of the linear part of crop_rescale (used by adaptive
    attacks to backpropagate through the transform)."""
    my = resize_matrix(h, h - 2 * margin)
    mx = resize_matrix(w, w - 2 * margin)
    g = np.einsum("oi,opc->ipc", my, np.asarray(upstream, dtype=np.float64))
    g = np.einsum("pj,ipc->ijc", mx, g)
    full = np.zeros((h, w, upstream.shape[2]), dtype=np.float64)
    full[margin : h - margin, margin : w - margin, :] = g
    return full


# -- dispatch ------------------------------------------------------------

@dataclass(frozen=True)
class Defense:
    """A named preprocessing transform with its parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    _ALLOWED = {
        "ss": {"window"},
        "nlm": {"patch", "search", "strength"},
        "tvm": {"weight", "tol", "max_iter"},
        "jpeg": {"quality"},
        "cr": {"margin"},
        "ccp": {"seed", "s", "b"},
        "identity": set(),
    }

    def __post_init__(self):
        if self.kind not in DEFENSE_NAMES:
            raise ValueError(f"unknown defense kind {self.kind!r}; choose from {DEFENSE_NAMES}")
        unknown = set(self.params) - self._ALLOWED[self.kind]
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_defense(self.kind, x, **self.params)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}

    @staticmethod
    def from_json(obj) -> "Defense":
        if isinstance(obj, str):
            return Defense(obj)
        obj = dict(obj)
        kind = obj.pop("kind", None)
        if kind is None:
            raise ValueError("defense entry missing 'kind'")
        return Defense(kind, obj)


def apply_defense(kind: str, x: np.ndarray, **params) -> np.ndarray:
    """Dispatch to one of the preprocessing transforms by its short name."""
    if kind == "ss":
        return median_smooth(x, **params)
    if kind == "nlm":
        return nlm_denoise(x, **params)
    if kind == "tvm":
        return tv_minimize(x, **params)
    if kind == "jpeg":
        return jpeg_roundtrip(x, **params)
    if kind == "cr":
        return crop_rescale(x, **params)
    if kind == "ccp":
        return ccp_transform(x, CcpParams.random(**params))
    if kind == "identity":
        return np.asarray(x, dtype=np.float64).copy()
    raise ValueError(f"unknown defense kind {kind!r}")
