"""Color-channel mixing transform, usable as an attack or a defense.

Each output channel is a scaled average of weighted input channels plus a
bias: R' = s * (a_r R + a_g G + a_b B) / 3 + b (and likewise for G', B'
with their own weight triples), clamped back to [0, 1]. The attack variant
draws the nine weights uniformly from [0, 1] under a fixed seed; scale and
bias default to s=2 and b=30/255.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..image import clip_to_domain
from ..rng import Rng

DEFAULT_SEED = 0
DEFAULT_SCALE = 2.0
DEFAULT_BIAS = 30.0 / 255.0


@dataclass(frozen=True)
class CcpParams:
    alpha: tuple  # weights for R'
    beta: tuple   # weights for G'
    gamma: tuple  # weights for B'
    s: float
    b: float

    def __post_init__(self):
        for w in (self.alpha, self.beta, self.gamma):
            if len(w) != 3 or any(not 0.0 <= v <= 1.0 for v in w):
                raise ValueError("channel weights must be 3-vectors in [0, 1]")

    @staticmethod
    def random(seed: int = DEFAULT_SEED, s: float = DEFAULT_SCALE,
               b: float = DEFAULT_BIAS) -> "CcpParams":
        w = Rng(seed, stream=31).uniform(0.0, 1.0, size=(3, 3))
        return CcpParams(tuple(w[0]), tuple(w[1]), tuple(w[2]), s, b)

    @staticmethod
    def identity() -> "CcpParams":
        """Parameters under which the transform is the identity map."""
        return CcpParams((1, 0, 0), (0, 1, 0), (0, 0, 1), s=3.0, b=0.0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma], dtype=np.float64)


def ccp_transform(x: np.ndarray, params: CcpParams) -> np.ndarray:
    """Mix color channels per the weight matrix, scale, bias, then clamp."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError("channel mixing requires a 3-channel image")
    mixed = params.s * (x @ params.matrix.T) / 3.0 + params.b
    return clip_to_domain(mixed)
