"""Expectation-over-transformation adaptive attack.

PGD on the Monte-Carlo average of the loss gradient over a distribution of
preprocessing transforms. Gradients pass through each transform either by
its exact adjoint (crop/rescale, which is linear) or by the straight-through
identity (median, NLM, TV, JPEG, channel mixing), the usual BPDA treatment
for non-differentiable preprocessing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks.gradient import pgd_iterate
from .attacks.spec import AttackResult
from .autodiff import tensor
from .defenses import Defense, crop_rescale_adjoint
from .image import LpBall
from .models.functional import cross_entropy
from .rng import Rng

#: transforms whose gradient is approximated by the identity
STRAIGHT_THROUGH = ("ss", "nlm", "tvm", "jpeg", "ccp", "identity")


@dataclass(frozen=True)
class TransformDistribution:
    members: tuple  # of Defense
    mc_samples: int = 8

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("transform distribution must be nonempty")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be at least 1")

    @staticmethod
    def of(kinds, mc_samples: int = 8) -> "TransformDistribution":
        members = tuple(k if isinstance(k, Defense) else Defense(k) for k in kinds)
        return TransformDistribution(members, mc_samples)


def transform_gradient(kind: str, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pull the upstream gradient back through one transform."""
    if kind == "cr":
        h, w = x.shape[:2]
        return crop_rescale_adjoint(upstream, h, w)
    if kind in STRAIGHT_THROUGH:
        return upstream
    raise ValueError(f"unknown transform kind {kind!r}")


def eot_gradient(model, x_adv: np.ndarray, y: int, dist: TransformDistribution,
                 rng: Rng) -> np.ndarray:
    """Monte-Carlo estimate of d E_t[loss(f(t(x)), y)] / dx.

    All sampled transforms go through the model as one batch; summing the
    per-sample cross-entropies keeps the batched gradients identical to
    sample-at-a-time evaluation.
    """
    members = dist.members
    if len(members) == 1:
        # degenerate distribution: sampling is pointless, and skipping the
        # average keeps the identity case bitwise equal to plain PGD
        t = members[0]
        g = model.input_gradient(t.apply(x_adv), y)
        return transform_gradient(t.kind, x_adv, g)
    picks = rng.integers(0, len(members), size=dist.mc_samples)
    batch = np.stack([members[int(i)].apply(x_adv) for i in picks])
    xt = tensor(batch, requires_grad=True)
    logits, _ = model.forward_graph(xt)
    cross_entropy(logits, np.full(len(picks), int(y)), reduction="sum").backward()
    total = np.zeros_like(x_adv)
    for sample_idx, i in enumerate(picks):
        total += transform_gradient(members[int(i)].kind, x_adv, xt.grad[sample_idx])
    return total / dist.mc_samples


def eot_pgd(model, x: np.ndarray, y: int, ball: LpBall, steps: int,
            eps_step: float, dist: TransformDistribution, seed: int = 0) -> AttackResult:
    """PGD against the expected transformed loss; with dist = {identity} this
    reproduces plain pgd() bit for bit."""
    x = np.asarray(x, dtype=np.float64)
    rng = Rng(seed, stream=51)
    x_adv = pgd_iterate(lambda z: eot_gradient(model, z, y, dist, rng),
                        x, ball, steps, eps_step)
    return AttackResult.evaluate(model, x, x_adv, y, ball, iterations=steps)
