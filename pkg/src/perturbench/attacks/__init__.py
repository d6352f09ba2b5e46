"""Attack suite: gradient attacks (FGSM, PGD-L1/L2/Linf, CW-L2/Linf, JSMA,
UAP) and query attacks (square attack, ray search), plus the color-channel
mixing transform."""

from __future__ import annotations

import numpy as np

from .carlini import cw_l2, cw_linf
from .ccp import CcpParams, ccp_transform
from .gradient import bim, fgsm, pgd, pgd_iterate
from .jsma import jsma
from .rays import rays
from .spec import ATTACK_KINDS, AttackResult, AttackSpec
from .square import square_attack
from .uap import uap

__all__ = [
    "ATTACK_KINDS", "AttackResult", "AttackSpec", "CcpParams",
    "bim", "ccp_transform", "cw_l2", "cw_linf", "fgsm", "jsma", "pgd",
    "pgd_iterate", "rays", "run_attack", "square_attack", "uap",
]


def run_attack(model, x: np.ndarray, y: int, spec: AttackSpec,
               seed: int | None = None, uap_delta: np.ndarray | None = None) -> AttackResult:
    """Dispatch a single-image attack described by `spec`.

    `seed` overrides spec.seed (the harness derives one per image). UAP is a
    dataset-level attack: the harness crafts its shared delta once and passes
    it in via `uap_delta`.
    """
    seed = spec.seed if seed is None else seed
    if spec.kind == "fgsm":
        return fgsm(model, x, y, spec.epsilon)
    if spec.kind == "pgd":
        return pgd(model, x, y, spec.ball(), spec.iterations, spec.step_size, seed)
    if spec.kind == "cw_l2":
        return cw_l2(model, x, y, spec)
    if spec.kind == "cw_linf":
        return cw_linf(model, x, y, spec)
    if spec.kind == "jsma":
        return jsma(model, x, y, spec.theta, spec.gamma)
    if spec.kind == "square":
        return square_attack(model, x, y, spec.ball(), spec.p_init,
                             spec.iterations, seed)
    if spec.kind == "rays":
        return rays(model, x, y, spec.epsilon, spec.query_budget, seed)
    if spec.kind == "ccp":
        params = CcpParams.random(spec.seed, spec.s, spec.b)
        x_adv = ccp_transform(x, params)
        return AttackResult.evaluate(model, x, x_adv, y, None)
    if spec.kind == "uap":
        if uap_delta is None:
            raise ValueError("uap requires a precrafted delta (see harness.craft_uap)")
        x_adv = np.clip(np.asarray(x, dtype=np.float64) + uap_delta, 0.0, 1.0)
        return AttackResult.evaluate(model, x, x_adv, y, spec.ball())
    raise ValueError(f"unknown attack kind {spec.kind!r}")
