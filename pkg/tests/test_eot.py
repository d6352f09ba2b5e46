import math

import numpy as np
import pytest

from perturbench.attacks import pgd
from perturbench.defenses import Defense, crop_rescale
from perturbench.eot import TransformDistribution, eot_pgd, transform_gradient
from perturbench.image import LpBall, lp_norm
from perturbench.models import TinyCnn
from perturbench.rng import Rng


class TestTransformGradient:
    def test_identity_passes_through_bitwise(self, rng):
        x = rng.uniform(0, 1, (8, 8, 3))
        up = rng.normal(0, 1, (8, 8, 3))
        assert transform_gradient("identity", x, up) is up

    @pytest.mark.parametrize("kind", ["ss", "nlm", "tvm", "jpeg", "ccp"])
    def test_straight_through_kinds_bitwise(self, kind, rng):
        x = rng.uniform(0, 1, (8, 8, 3))
        up = rng.normal(0, 1, (8, 8, 3))
        assert transform_gradient(kind, x, up) is up

    def test_crop_rescale_adjoint_matches_finite_differences(self, rng):
        # <u, f(x+h e_i)> - <u, f(x-h e_i)> / 2h == (J^T u)_i for linear f
        x = rng.uniform(0.2, 0.8, (8, 8, 3))
        up = rng.normal(0, 1, (8, 8, 3))
        adj = transform_gradient("cr", x, up)
        h = 1e-4
        rng2 = Rng(3)
        worst = 0.0
        for _ in range(30):
            i = tuple(int(v) for v in (rng2.integers(0, 8), rng2.integers(0, 8),
                                       rng2.integers(0, 3)))
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            fd = float(np.sum(up * (crop_rescale(xp) - crop_rescale(xm))) / (2 * h))
            if abs(adj[i]) > 1e-9:
                worst = max(worst, abs(adj[i] - fd) / abs(adj[i]))
        assert worst <= 1e-3

    def test_unknown_kind_rejected(self, rng):
        with pytest.raises(ValueError):
            transform_gradient("blur", np.zeros((4, 4, 3)), np.zeros((4, 4, 3)))


class TestEotPgd:
    def test_identity_distribution_bitwise_equals_pgd(self, rng):
        m = TinyCnn(seed=5)
        x = rng.uniform(0, 1, (32, 32, 3))
        y = int(np.argmax(m.forward(x)))
        ball = LpBall(math.inf, 4 / 255)
        a = pgd(m, x, y, ball, steps=6, eps_step=4 / 255 / 10)
        for mc in (1, 8):
            dist = TransformDistribution.of(["identity"], mc_samples=mc)
            b = eot_pgd(m, x, y, ball, 6, 4 / 255 / 10, dist, seed=9)
            assert np.array_equal(a.adversarial, b.adversarial)

    def test_ball_feasibility(self, rng):
        m = TinyCnn(seed=5)
        x = rng.uniform(0, 1, (32, 32, 3))
        y = int(np.argmax(m.forward(x)))
        dist = TransformDistribution.of(["ss", "cr"], mc_samples=2)
        r = eot_pgd(m, x, y, LpBall(math.inf, 4 / 255), 4, 4 / 255 / 4, dist, seed=2)
        assert lp_norm(r.adversarial - x, math.inf) <= 4 / 255 * (1 + 1e-6)
        assert r.adversarial.min() >= 0 and r.adversarial.max() <= 1

    def test_seeded_reproducibility(self, rng):
        m = TinyCnn(seed=5)
        x = rng.uniform(0, 1, (32, 32, 3))
        y = int(np.argmax(m.forward(x)))
        dist = TransformDistribution.of(["ss", "jpeg", "cr"], mc_samples=4)
        a = eot_pgd(m, x, y, LpBall(math.inf, 0.02), 4, 0.005, dist, seed=11)
        b = eot_pgd(m, x, y, LpBall(math.inf, 0.02), 4, 0.005, dist, seed=11)
        assert np.array_equal(a.adversarial, b.adversarial)

    def test_empty_distribution_rejected(self):
        with pytest.raises(ValueError):
            TransformDistribution(())

    def test_member_defense_objects_accepted(self, rng):
        dist = TransformDistribution.of([Defense("jpeg", {"quality": 80}), "ss"])
        assert dist.members[0].params == {"quality": 80}
