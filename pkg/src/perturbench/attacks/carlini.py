"""Carlini-Wagner attacks (Carlini & Wagner 2017), L2 and L-infinity.

Both use the margin objective f(x') = max(Z_y - max_{j!=y} Z_j, -kappa)
with kappa the confidence. The L2 variant optimizes in the tanh-reparameterized
domain with the trade-off constant c tuned by binary search; the L-infinity
variant penalizes coordinates exceeding a decaying threshold tau and ends
with a hard clamp to the epsilon ball.
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import tensor
from ..image import LpBall, clip_to_domain, lp_norm
from .spec import AttackResult, AttackSpec

_ATANH_CLIP = 1e-6


def margin_and_gradient(model, x: np.ndarray, y: int, kappa: float = 0.0):
    """Margin Z_y - max_{j!=y} Z_j and its gradient w.r.t. x (zero where the
    hinge max(margin, -kappa) is inactive)."""
    xt = tensor(np.asarray(x, dtype=np.float64)[None], requires_grad=True)
    logits, _ = model.forward_graph(xt)
    z = logits.data[0]
    order = np.argsort(z)
    j = int(order[-1]) if int(order[-1]) != y else int(order[-2])
    margin = float(z[y] - z[j])
    if margin <= -kappa:
        return margin, np.zeros(x.shape, dtype=np.float64)
    seed = np.zeros_like(logits.data)
    seed[0, y] = 1.0
    seed[0, j] = -1.0
    logits.backward(seed)
    return margin, xt.grad[0]


def cw_l2(model, x: np.ndarray, y: int, spec: AttackSpec) -> AttackResult:
    """Minimize ||delta||_2^2 + c * f(x + delta) over the tanh domain.

    c starts at spec.initial_const and is tuned by binary search
    (multiplied by 10 until the first success, bisected afterwards); the
    best successful perturbation of minimal L2 across all searches wins.
    """
    x = np.asarray(x, dtype=np.float64)
    y = int(y)
    if int(np.argmax(model.forward(x))) != y:
        return AttackResult(adversarial=x.copy(), success=True, final_lp=0.0)

    w0 = np.arctanh(2.0 * np.clip(x, _ATANH_CLIP, 1.0 - _ATANH_CLIP) - 1.0)
    c = spec.initial_const
    lower, upper = 0.0, math.inf
    best_adv = None
    best_l2 = math.inf
    iters_used = 0
    for _ in range(spec.binary_search_steps):
        w = w0.copy()
        found = False
        for _ in range(spec.iterations):
            th = np.tanh(w)
            x_adv = 0.5 * (th + 1.0)
            margin, mgrad = margin_and_gradient(model, x_adv, y, spec.confidence)
            iters_used += 1
            if margin < 0:
                l2 = lp_norm(x_adv - x, 2)
                if l2 < best_l2:
                    best_l2, best_adv = l2, x_adv.copy()
                found = True
            d_obj = 2.0 * (x_adv - x) + c * mgrad
            w -= spec.learning_rate * d_obj * 0.5 * (1.0 - th * th)
        if found:
            upper = c
            c = (lower + upper) / 2.0
        else:
            lower = c
            c = c * 10.0 if math.isinf(upper) else (lower + upper) / 2.0

    if best_adv is None:
        x_adv = 0.5 * (np.tanh(w) + 1.0)
        return AttackResult.evaluate(model, x, x_adv, y, None, iterations=iters_used)
    return AttackResult(adversarial=best_adv, success=True,
                        iterations_used=iters_used, final_lp=best_l2)


def cw_linf(model, x: np.ndarray, y: int, spec: AttackSpec) -> AttackResult:
    """Gradient descent on hinge + sum(max(|delta_i| - tau, 0)), tau decaying
    whenever the iterate succeeds with all coordinates inside tau; the final
    perturbation is clamped to the epsilon ball."""
    x = np.asarray(x, dtype=np.float64)
    y = int(y)
    ball = spec.ball()
    eps = ball.epsilon
    delta = np.zeros_like(x)
    tau = eps
    best_adv = None
    best_linf = math.inf
    for it in range(spec.iterations):
        x_adv = clip_to_domain(x + delta)
        margin, mgrad = margin_and_gradient(model, x_adv, y, spec.confidence)
        if margin < 0:
            linf = lp_norm(x_adv - x, math.inf)
            if linf < best_linf:
                best_linf, best_adv = linf, x_adv.copy()
            if linf < tau:
                tau = max(0.9 * tau, linf)
        grad = mgrad + np.sign(delta) * (np.abs(delta) > tau)
        delta -= spec.learning_rate * grad
        np.clip(delta, -eps, eps, out=delta)
        np.clip(delta, -x, 1.0 - x, out=delta)
    if best_adv is not None:
        return AttackResult(adversarial=best_adv, success=True,
                            iterations_used=spec.iterations, final_lp=best_linf)
    x_adv = clip_to_domain(x + delta)
    return AttackResult.evaluate(model, x, x_adv, y, ball, iterations=spec.iterations)
