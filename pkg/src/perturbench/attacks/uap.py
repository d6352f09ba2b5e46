"""Universal adversarial perturbation (Moosavi-Dezfooli et al. 2017) with an
iterative-FGSM inner attacker.

One shared delta is folded together from per-sample BIM perturbations and
projected onto the L-infinity ball after every fold. A fold is kept only if
it does not lower the fooling rate over the crafting set, so the returned
delta never fools fewer samples than the zero perturbation.
"""

from __future__ import annotations

import math

import numpy as np

from ..image import LpBall, clip_to_domain, project_onto_ball
from .gradient import bim

MAX_PASSES = 5
TARGET_FOOLING_RATE = 0.8


def fooling_rate(model, xs: np.ndarray, ys: np.ndarray, delta: np.ndarray) -> float:
    preds = model.predict_batch(np.clip(xs + delta, 0.0, 1.0))
    return float(np.mean(preds != ys))


def uap(model, xs: np.ndarray, ys: np.ndarray, ball: LpBall,
        eps_step: float, inner_steps: int) -> np.ndarray:
    """Craft a universal delta with ||delta||_inf <= ball.epsilon."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if len(xs) == 0:
        raise ValueError("empty crafting set")
    if ball.p != math.inf:
        raise ValueError("universal perturbations use an L-infinity budget")
    delta = np.zeros_like(xs[0])
    rate = fooling_rate(model, xs, ys, delta)
    for _ in range(MAX_PASSES):
        if rate >= TARGET_FOOLING_RATE:
            break
        for x, y in zip(xs, ys):
            perturbed = clip_to_domain(x + delta)
            if int(np.argmax(model.forward(perturbed))) != int(y):
                continue  # already fooled
            x_bim = bim(model, perturbed, int(y), ball.epsilon, eps_step, inner_steps)
            candidate = project_onto_ball(delta + (x_bim - perturbed), ball)
            cand_rate = fooling_rate(model, xs, ys, candidate)
            if cand_rate >= rate:
                delta, rate = candidate, cand_rate
    return delta
