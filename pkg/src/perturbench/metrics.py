"""Perceptual and statistical metrics: PSNR, SSIM, Lp stats, ASR, top-1 error.

Internal pixel domain is [0, 1], so PSNR uses MAX=1 (identical to the 8-bit
formula up to the domain scaling) and the SSIM stabilizers are
c1=(0.01)^2, c2=(0.03)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import lp_norm


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float  # math.inf when the images are identical
    ssim: float
    l0_frac: float
    l1: float
    l2: float
    linf: float

    def as_row(self) -> dict:
        return {"psnr_db": self.psnr_db, "ssim": self.ssim, "l0_frac": self.l0_frac,
                "l1": self.l1, "l2": self.l2, "linf": self.linf}


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    c1: float = 0.01 ** 2  # (0.01 * L)^2 with L = 1
    c2: float = 0.03 ** 2


def psnr(x: np.ndarray, x_adv: np.ndarray) -> float:
    """10*log10(MAX^2 / MSE) with MAX=1; returns +inf for identical images."""
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if x.shape != x_adv.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_adv.shape}")
    mse = float(np.mean((x - x_adv) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    g = np.exp(-0.5 * ((np.arange(size) - r) / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def _windows(a: np.ndarray, size: int) -> np.ndarray:
    """All fully-interior size x size windows, shape (oh, ow, size, size)."""
    oh = a.shape[0] - size + 1
    ow = a.shape[1] - size + 1
    s0, s1 = a.strides
    return np.lib.stride_tricks.as_strided(a, (oh, ow, size, size), (s0, s1, s0, s1))


def ssim(x: np.ndarray, x_adv: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean local SSIM (Wang et al. 2004) with a Gaussian window.

    Local means/variances/covariance are computed over every fully-interior
    window, averaged over positions and channels. Symmetric in its arguments.
    """
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if x.shape != x_adv.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_adv.shape}")
    if x.ndim == 2:
        x = x[:, :, None]
        x_adv = x_adv[:, :, None]
    if min(x.shape[0], x.shape[1]) < params.window:
        raise ValueError(f"image smaller than the {params.window}x{params.window} SSIM window")
    w = _gaussian_window(params.window, params.sigma)
    vals = []
    for c in range(x.shape[2]):
        a = x[:, :, c]
        b = x_adv[:, :, c]
        wa = _windows(a, params.window)
        wb = _windows(b, params.window)
        mu_a = np.einsum("ijkl,kl->ij", wa, w)
        mu_b = np.einsum("ijkl,kl->ij", wb, w)
        e_aa = np.einsum("ijkl,kl->ij", wa * wa, w)
        e_bb = np.einsum("ijkl,kl->ij", wb * wb, w)
        e_ab = np.einsum("ijkl,kl->ij", wa * wb, w)
        var_a = e_aa - mu_a * mu_a
        var_b = e_bb - mu_b * mu_b
        cov = e_ab - mu_a * mu_b
        num = (2 * mu_a * mu_b + params.c1) * (2 * cov + params.c2)
        den = (mu_a ** 2 + mu_b ** 2 + params.c1) * (var_a + var_b + params.c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def quality_report(x: np.ndarray, x_adv: np.ndarray) -> QualityReport:
    delta = np.asarray(x_adv, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    return QualityReport(
        psnr_db=psnr(x, x_adv),
        ssim=ssim(x, x_adv),
        l0_frac=lp_norm(delta, 0) / delta.size,
        l1=lp_norm(delta, 1),
        l2=lp_norm(delta, 2),
        linf=lp_norm(delta, math.inf),
    )


def asr(results) -> float:
    """Attack success rate: successes / total, over AttackResults."""
    results = list(results)
    if not results:
        raise ValueError("empty result list")
    return sum(1 for r in results if r.success) / len(results)


def top1_error(model, images, labels, defense=None) -> float:
    """Fraction of (optionally defended) images the model misclassifies."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("empty evaluation set")
    if defense is not None:
        images = np.stack([defense(img) for img in images])
    preds = model.predict_batch(images)
    return float(np.mean(preds != labels))
