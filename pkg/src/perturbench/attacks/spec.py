"""Attack parameterization and outcome types.

AttackSpec field names follow the conventional attack-parameter vocabulary
(epsilon, eps_step, max_iterations, confidence, learning_rate,
initial_const, binary_search_steps, theta, gamma, p_init, query_budget,
seed, s, b) so harness JSON configs read exactly like the attack tables
they mirror.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from ..image import LpBall, lp_norm

ATTACK_KINDS = ("fgsm", "pgd", "cw_l2", "cw_linf", "jsma", "uap", "square", "rays", "ccp")

_NORMS = {"l1": 1, "l2": 2, "linf": math.inf}

# which optional fields each kind accepts in JSON configs
_FIELDS_BY_KIND = {
    "fgsm": {"epsilon"},
    "pgd": {"norm", "epsilon", "eps_step", "max_iterations"},
    "cw_l2": {"max_iterations", "learning_rate", "initial_const",
              "binary_search_steps", "confidence"},
    "cw_linf": {"epsilon", "confidence", "max_iterations", "learning_rate"},
    "jsma": {"theta", "gamma"},
    "uap": {"epsilon", "eps_step", "max_iterations"},
    "square": {"epsilon", "p_init", "max_iterations", "seed"},
    "rays": {"epsilon", "query_budget", "seed"},
    "ccp": {"seed", "s", "b"},
}


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    norm: str | None = None          # pgd only: l1 | l2 | linf
    epsilon: float | None = None
    eps_step: float | None = None    # defaults to epsilon / 10
    max_iterations: int | None = None
    confidence: float = 0.0
    learning_rate: float = 5e-3
    initial_const: float = 2.0 / 255.0
    binary_search_steps: int = 10
    theta: float = 0.1
    gamma: float = 1.0
    p_init: float = 0.05
    query_budget: int = 2000
    seed: int = 0
    s: float = 2.0
    b: float = 30.0 / 255.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind == "pgd":
            if self.norm not in _NORMS:
                raise ValueError("pgd requires norm one of l1|l2|linf")
            if self.epsilon is None:
                raise ValueError("pgd requires epsilon")
        if self.kind in ("fgsm", "uap", "square", "rays") and self.epsilon is None:
            raise ValueError(f"{self.kind} requires epsilon")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")

    @property
    def iterations(self) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return {"pgd": 10, "cw_l2": 10, "cw_linf": 50, "uap": 10,
                "square": 300}.get(self.kind, 10)

    @property
    def step_size(self) -> float:
        if self.eps_step is not None:
            return self.eps_step
        if self.epsilon is None:
            raise ValueError(f"{self.kind} has no step size")
        return self.epsilon / 10.0

    def ball(self) -> LpBall | None:
        """The perturbation budget, where the attack has one."""
        if self.kind == "pgd":
            return LpBall(_NORMS[self.norm], self.epsilon)
        if self.kind in ("fgsm", "uap", "square", "rays"):
            return LpBall(math.inf, self.epsilon)
        if self.kind == "cw_linf":
            return LpBall(math.inf, self.epsilon if self.epsilon is not None else 8.0 / 255.0)
        return None  # cw_l2, ccp unconstrained; jsma budget depends on image size

    @property
    def label(self) -> str:
        """Column label for reports, e.g. 'pgd_linf'."""
        return f"{self.kind}_{self.norm}" if self.kind == "pgd" else self.kind

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        defaults = {f.name: f.default for f in fields(AttackSpec)}
        for name in sorted(_FIELDS_BY_KIND[self.kind]):
            val = getattr(self, name)
            if val is not None and val != defaults[name]:
                out[name] = val
            elif name in ("norm", "epsilon") and val is not None:
                out[name] = val
        return out

    @staticmethod
    def from_json(obj: dict) -> "AttackSpec":
        obj = dict(obj)
        kind = obj.pop("kind", None)
        if kind is None:
            raise ValueError("attack entry missing 'kind'")
        if kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {kind!r}")
        unknown = set(obj) - _FIELDS_BY_KIND[kind]
        if unknown:
            raise ValueError(f"unknown {kind} parameters: {sorted(unknown)}")
        return AttackSpec(kind=kind, **obj)


@dataclass
class AttackResult:
    adversarial: np.ndarray
    success: bool
    queries_used: int = 0
    iterations_used: int = 0
    final_lp: float = 0.0

    @staticmethod
    def evaluate(model, x: np.ndarray, x_adv: np.ndarray, y: int,
                 ball: LpBall | None, queries: int = 0, iterations: int = 0) -> "AttackResult":
        pred = int(np.argmax(model.forward(x_adv)))
        final = lp_norm(x_adv - x, ball.p) if ball is not None else lp_norm(x_adv - x, 2)
        return AttackResult(adversarial=x_adv, success=pred != int(y),
                            queries_used=queries, iterations_used=iterations,
                            final_lp=final)
