"""Single-step and iterated gradient attacks (FGSM, PGD, BIM).

All variants are untargeted: they ascend the cross-entropy of the true
label. PGD tracks the perturbation delta explicitly and projects it onto
the budget ball each step, so the one-step L-infinity case reproduces FGSM
bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from ..image import LpBall, clip_to_domain, lp_norm, project_onto_ball
from .spec import AttackResult


def _step_direction(g: np.ndarray, p) -> np.ndarray:
    """Norm-appropriate ascent direction; zero gradient gives a zero step."""
    if p == math.inf:
        return np.sign(g)
    nrm = lp_norm(g, p)
    return g / nrm if nrm > 0 else np.zeros_like(g)


def fgsm(model, x: np.ndarray, y: int, epsilon: float) -> AttackResult:
    """Fast gradient sign method (Goodfellow et al. 2015):
    x' = clip(x + eps * sign(dL/dx))."""
    x = np.asarray(x, dtype=np.float64)
    g = model.input_gradient(x, y)
    x_adv = clip_to_domain(x + epsilon * np.sign(g))
    return AttackResult.evaluate(model, x, x_adv, y,
                                 LpBall(math.inf, epsilon), iterations=1)


def pgd_iterate(grad_fn, x: np.ndarray, ball: LpBall, steps: int,
                eps_step: float) -> np.ndarray:
    """Core projected-ascent loop shared by PGD and its adaptive variants.

    grad_fn(x_adv) returns the ascent gradient at the current iterate. The
    iterate starts at x (no random restart) and each step projects the
    running delta onto the ball before the domain clamp.
    """
    x = np.asarray(x, dtype=np.float64)
    delta = np.zeros_like(x)
    x_adv = clip_to_domain(x)
    for _ in range(steps):
        g = grad_fn(x_adv)
        delta = project_onto_ball(delta + eps_step * _step_direction(g, ball.p), ball)
        x_adv = clip_to_domain(x + delta)
    return x_adv


def pgd(model, x: np.ndarray, y: int, ball: LpBall, steps: int,
        eps_step: float, seed: int = 0) -> AttackResult:
    """Projected gradient descent (Madry et al. 2018) under an L1, L2 or
    L-infinity budget. Deterministic: no random restart, so `seed` is unused."""
    if ball.p not in (1, 2, math.inf):
        raise ValueError(f"unsupported PGD norm {ball.p}")
    x = np.asarray(x, dtype=np.float64)
    x_adv = pgd_iterate(lambda z: model.input_gradient(z, y), x, ball, steps, eps_step)
    return AttackResult.evaluate(model, x, x_adv, y, ball, iterations=steps)


def bim(model, x: np.ndarray, y: int, epsilon: float, eps_step: float,
        steps: int) -> np.ndarray:
    """Basic iterative method: iterated FGSM with a per-step L-infinity clip.
    Returns the adversarial image (used as the inner attacker of UAP)."""
    ball = LpBall(math.inf, epsilon)
    return pgd_iterate(lambda z: model.input_gradient(z, y),
                       np.asarray(x, dtype=np.float64), ball, steps, eps_step)
