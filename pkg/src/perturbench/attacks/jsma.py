"""Jacobian saliency map attack (Papernot et al. 2016), untargeted variant.

Greedy: per iteration, score every feature pair by the product rule and
bump the best pair by +theta, pushing the input away from its true class
(features whose true-class gradient is negative and whose other-class
gradient sum is positive). Stops at misclassification or when the distinct
modified-feature count would exceed gamma * (feature count).
"""

from __future__ import annotations

import numpy as np

from ..image import clip_to_domain, lp_norm
from .spec import AttackResult

_SATURATED = 1.0 - 1e-12


def _logit_jacobian(model, x: np.ndarray) -> np.ndarray:
    """(num_classes, n_features) Jacobian of the logits w.r.t. the input."""
    rows = [model.logit_gradient(x, k).ravel() for k in range(model.num_classes)]
    return np.stack(rows)


def saliency_pair(model, x: np.ndarray, y: int, domain: np.ndarray):
    """Best feature pair under the product rule, or None.

    alpha sums the true-class gradient over the pair, beta the summed
    other-class gradients; valid pairs have alpha < 0 and beta > 0 and are
    ranked by |alpha| * beta. Ties resolve to the lowest linear index pair.
    """
    jac = _logit_jacobian(model, x)
    alpha = jac[y]
    beta = jac.sum(axis=0) - alpha
    idx = np.nonzero(domain)[0]
    if len(idx) < 2:
        return None
    a = alpha[idx]
    b = beta[idx]
    pair_a = a[:, None] + a[None, :]
    pair_b = b[:, None] + b[None, :]
    score = -pair_a * pair_b
    valid = (pair_a < 0) & (pair_b > 0)
    valid &= np.triu(np.ones_like(valid, dtype=bool), k=1)
    if not valid.any():
        return None
    score[~valid] = -np.inf
    flat = int(np.argmax(score))  # first max = lowest (i, j) in row-major order
    i, j = divmod(flat, len(idx))
    return int(idx[i]), int(idx[j])


def jsma(model, x: np.ndarray, y: int, theta: float = 0.1,
         gamma: float = 1.0) -> AttackResult:
    if theta <= 0:
        raise ValueError("theta must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = int(y)
    n = x.size
    budget = int(np.floor(gamma * n))
    x_adv = x.copy()
    modified: set[int] = set()
    iterations = 0
    success = int(np.argmax(model.forward(x_adv))) != y
    while not success:
        flat = x_adv.ravel()
        domain = flat < _SATURATED
        pair = saliency_pair(model, x_adv, y, domain)
        if pair is None:
            break
        newly = {p for p in pair if p not in modified}
        if len(modified) + len(newly) > budget:
            break
        for p in pair:
            flat[p] = min(1.0, flat[p] + theta)
        modified |= newly
        x_adv = clip_to_domain(flat.reshape(x.shape))
        iterations += 1
        success = int(np.argmax(model.forward(x_adv))) != y
    return AttackResult(adversarial=x_adv, success=success,
                        iterations_used=iterations,
                        final_lp=lp_norm(x_adv - x, 0))
