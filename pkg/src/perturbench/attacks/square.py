"""Square attack (Andriushchenko et al. 2020), L-infinity, score-based.

Random search over axis-aligned square patches set to random +-eps corner
values; a proposal is accepted iff the margin loss decreases. Consumes only
logits (one forward per query), never gradients.
"""

from __future__ import annotations

import math

import numpy as np

from ..image import LpBall, clip_to_domain, lp_norm
from ..rng import Rng
from .spec import AttackResult

# p halves at these milestones on a 10000-iteration scale; actual milestones
# scale with the configured iteration budget
_P_MILESTONES = (10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000)


def _p_at(iteration: int, max_iter: int, p_init: float) -> float:
    scale = max_iter / 10000.0
    passed = sum(1 for m in _P_MILESTONES if iteration >= m * scale)
    return p_init / (2.0 ** passed)


def _margin(logits: np.ndarray, y: int) -> float:
    z = np.asarray(logits, dtype=np.float64)
    other = np.max(np.delete(z, y))
    return float(z[y] - other)


def square_attack(model, x: np.ndarray, y: int, ball: LpBall, p_init: float = 0.05,
                  max_iter: int = 300, seed: int = 0) -> AttackResult:
    if ball.p != math.inf:
        raise ValueError("square attack is defined for the L-infinity ball")
    x = np.asarray(x, dtype=np.float64)
    y = int(y)
    eps = ball.epsilon
    h, w, c = x.shape
    rng = Rng(seed, stream=41)
    queries = 0

    def margin_of(img: np.ndarray) -> float:
        nonlocal queries
        queries += 1
        return _margin(model.forward(img), y)

    # vertical-stripe initialization: one +-eps sign per (column, channel)
    delta = np.broadcast_to(eps * rng.sign((1, w, c)), (h, w, c)).copy()
    x_best = clip_to_domain(x + delta)
    m_best = margin_of(x_best)

    it = 0
    while it < max_iter and m_best >= 0:
        p = _p_at(it, max_iter, p_init)
        side = int(round(math.sqrt(p * h * w)))
        side = min(max(side, 1), min(h, w))
        r = int(rng.integers(0, h - side + 1))
        col = int(rng.integers(0, w - side + 1))
        cand = delta.copy()
        cand[r : r + side, col : col + side, :] = eps * rng.sign((1, 1, c))
        x_cand = clip_to_domain(x + cand)
        m_cand = margin_of(x_cand)
        if m_cand < m_best:
            delta, x_best, m_best = cand, x_cand, m_cand
        it += 1

    return AttackResult(adversarial=x_best, success=m_best < 0, queries_used=queries,
                        iterations_used=it, final_lp=lp_norm(x_best - x, math.inf))
