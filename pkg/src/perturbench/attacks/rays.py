"""Ray search attack (Chen & Gu 2020): hard-label, L-infinity.

Maintains a sign direction d in {-1,+1}^n refined at block granularity
(1 block per channel, doubling each stage) and binary-searches the decision
boundary radius along d using only top-1 labels. A sign flip is kept iff it
shrinks the radius. Success means the best radius fits in the epsilon ball
within the query budget.
"""

from __future__ import annotations

import math

import numpy as np

from ..image import clip_to_domain, lp_norm
from .spec import AttackResult

_RADIUS_TOL = 1e-3


class _QueryBudget(Exception):
    pass


def rays(model, x: np.ndarray, y: int, epsilon: float, budget: int = 2000,
         seed: int = 0) -> AttackResult:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = int(y)
    n = x.size
    queries = 0
    best = {"r": math.inf, "adv": None}

    def is_adversarial(img: np.ndarray) -> bool:
        nonlocal queries
        if queries >= budget:
            raise _QueryBudget()
        queries += 1
        return int(np.argmax(model.forward(img))) != y

    def point_at(r: float, d: np.ndarray) -> np.ndarray:
        return clip_to_domain(x + r * d.reshape(x.shape))

    def try_direction(d: np.ndarray) -> float:
        """Boundary radius along d if it beats the current best, else inf."""
        probe = min(best["r"], 1.0)
        img = point_at(probe, d)
        if not is_adversarial(img):
            return math.inf
        lo, hi, hi_img = 0.0, probe, img
        while hi - lo > _RADIUS_TOL:
            mid = (lo + hi) / 2.0
            img = point_at(mid, d)
            if is_adversarial(img):
                hi, hi_img = mid, img
            else:
                lo = mid
        best["r"], best["adv"] = hi, hi_img
        return hi

    try:
        if is_adversarial(x):
            return AttackResult(adversarial=x.copy(), success=True, queries_used=queries,
                                final_lp=0.0)
        d = np.ones(n, dtype=np.float64)
        try_direction(d)
        # hierarchical halving: blocks per channel double each stage
        channels = x.shape[2] if x.ndim == 3 else 1
        per_channel = n // channels
        blocks_per_channel = 1
        while blocks_per_channel <= per_channel:
            bounds = np.linspace(0, per_channel, blocks_per_channel + 1).astype(int)
            for ch in range(channels):
                base = ch * per_channel
                for b in range(blocks_per_channel):
                    lo_i, hi_i = base + bounds[b], base + bounds[b + 1]
                    if lo_i == hi_i:
                        continue
                    cand = d.copy()
                    cand[lo_i:hi_i] *= -1.0
                    if try_direction(cand) < math.inf:
                        d = cand
            blocks_per_channel *= 2
    except _QueryBudget:
        pass

    if best["adv"] is not None and best["r"] <= epsilon:
        adv = best["adv"]
        return AttackResult(adversarial=adv, success=True, queries_used=queries,
                            final_lp=lp_norm(adv - x, math.inf))
    # best effort: the nearest point inside the ball along the best direction
    adv = point_at(min(best["r"], epsilon), d) if best["adv"] is not None else x.copy()
    pred_differs = False  # not re-queried; failure is recorded as-is
    return AttackResult(adversarial=adv, success=pred_differs, queries_used=queries,
                        final_lp=lp_norm(adv - x, math.inf))
