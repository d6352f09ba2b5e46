"""Image representation and Lp geometry.

Images are float64 numpy arrays of shape (H, W, C) with C in {1, 3} and
values in [0, 1]. All attack budgets live in this unit domain: parameters
quoted in 8-bit levels (an epsilon of "8", a bias of "30") are divided by
255 on ingestion so that every module shares one scale.

Perturbations are signed arrays of the same shape. The Lp norms and ball
projections here are the geometric substrate of every attack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: entries with |delta| below this threshold do not count toward the L0 norm
L0_TOLERANCE = 1e-12


def as_image(x, channels=None) -> np.ndarray:
    """Validate and return x as a float64 (H, W, C) image in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3 or x.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, C) with C in {{1, 3}}, got shape {x.shape}")
    if channels is not None and x.shape[2] != channels:
        raise ValueError(f"expected {channels}-channel image, got {x.shape[2]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite values")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return x


def clip_to_domain(x: np.ndarray) -> np.ndarray:
    """Elementwise clamp to [0, 1]. Idempotent."""
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class LpBall:
    """Perturbation budget {delta : ||delta||_p <= epsilon}.

    p is one of 0, 1, 2 or math.inf. For p=0 epsilon is a count budget
    (number of modified entries).
    """

    p: float
    epsilon: float

    def __post_init__(self):
        if self.p not in (0, 1, 2, math.inf):
            raise ValueError(f"unsupported norm order {self.p}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def norm_name(self) -> str:
        return {0: "l0", 1: "l1", 2: "l2", math.inf: "linf"}[self.p]


def lp_norm(delta: np.ndarray, p) -> float:
    """||delta||_p for p in {0, 1, 2, inf}.

    L0 counts entries with |delta_i| > 1e-12 so floating-point dust cannot
    inflate pixel counts.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if not np.all(np.isfinite(delta)):
        raise ValueError("non-finite perturbation")
    flat = delta.ravel()
    if p == 0:
        return float(np.count_nonzero(np.abs(flat) > L0_TOLERANCE))
    if p == 1:
        return float(np.sum(np.abs(flat)))
    if p == 2:
        return float(np.sqrt(np.sum(flat * flat)))
    if p == math.inf:
        return float(np.max(np.abs(flat))) if flat.size else 0.0
    raise ValueError(f"unsupported norm order {p}")


# projection outputs land on the ball boundary only up to rounding; the
# interior test tolerates that so projecting twice is a bitwise no-op
_BOUNDARY_SLACK = 1e-9


def _project_l1(flat: np.ndarray, radius: float) -> np.ndarray:
    # Euclidean projection onto the L1 ball via sort-and-threshold
    # (Duchi et al., ICML 2008). O(n log n), exact up to rounding.
    mag = np.abs(flat)
    if mag.sum() <= radius * (1.0 + _BOUNDARY_SLACK):
        return flat
    if radius == 0.0:
        return np.zeros_like(flat)
    u = np.sort(mag)[::-1]
    cssv = np.cumsum(u)
    k = np.arange(1, flat.size + 1)
    rho = np.nonzero(u * k > (cssv - radius))[0][-1]
    theta = (cssv[rho] - radius) / (rho + 1.0)
    return np.sign(flat) * np.maximum(mag - theta, 0.0)


def project_onto_ball(delta: np.ndarray, ball: LpBall) -> np.ndarray:
    """Euclidean projection of delta onto the given Lp ball.

    Points already inside the ball are returned unchanged (bitwise), so the
    projection is exactly idempotent. L-infinity projects by elementwise
    clamping, L2 by radial rescaling, L1 by sort-and-threshold.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if not np.all(np.isfinite(delta)):
        raise ValueError("non-finite perturbation")
    if ball.p == 0:
        raise ValueError("L0 projection is not defined here; JSMA handles its own budget")
    if ball.p == math.inf:
        return np.clip(delta, -ball.epsilon, ball.epsilon)
    if ball.p == 2:
        nrm = lp_norm(delta, 2)
        if nrm <= ball.epsilon * (1.0 + _BOUNDARY_SLACK):
            return delta
        return delta * (ball.epsilon / nrm)
    if ball.p == 1:
        shape = delta.shape
        return _project_l1(delta.ravel().copy(), ball.epsilon).reshape(shape)
    raise ValueError(f"unsupported norm order {ball.p}")


# ---------------------------------------------------------------------------
# file I/O: 8-bit PNG and binary PPM (P6)

def to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_image(path, x: np.ndarray) -> None:
    """Write an image as 8-bit PNG or binary PPM, chosen by extension."""
    path = str(path)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    u8 = to_uint8(x)
    if path.endswith(".ppm"):
        if u8.shape[2] == 1:
            u8 = np.repeat(u8, 3, axis=2)
        h, w = u8.shape[:2]
        with open(path, "wb") as f:
            f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            f.write(u8.tobytes())
    elif path.endswith(".png"):
        from PIL import Image as PILImage

        arr = u8[:, :, 0] if u8.shape[2] == 1 else u8
        PILImage.fromarray(arr).save(path, format="PNG")
    else:
        raise ValueError(f"unsupported image extension: {path}")


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG or binary PPM as a float64 image in [0, 1]."""
    path = str(path)
    if path.endswith(".ppm"):
        with open(path, "rb") as f:
            data = f.read()
        fields = []
        pos = 0
        while len(fields) < 4:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        pos += 1  # single whitespace after maxval
        magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
        if magic != b"P6" or maxval != 255:
            raise ValueError(f"unsupported PPM variant: {magic!r} maxval={maxval}")
        u8 = np.frombuffer(data, dtype=np.uint8, count=h * w * 3, offset=pos)
        return u8.reshape(h, w, 3).astype(np.float64) / 255.0
    if path.endswith(".png"):
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            arr = np.asarray(im.convert("RGB") if im.mode not in ("L", "RGB") else im)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return arr.astype(np.float64) / 255.0
    raise ValueError(f"unsupported image extension: {path}")


def save_pgm(path, values: np.ndarray) -> None:
    """Write a 2-D array scaled to its own [min, max] as an 8-bit binary PGM."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("PGM output expects a 2-D array")
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi <= lo else (v - lo) / (hi - lo)
    u8 = np.clip(np.round(scaled * 255.0), 0, 255).astype(np.uint8)
    h, w = u8.shape
    with open(str(path), "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(u8.tobytes())
