"""Cross-checks between the compiled kernels and their pure-NumPy twins."""

import numpy as np
import pytest

from perturbench import _kernels_np as knp
from perturbench.backend import get_backend
from perturbench.rng import Rng

compiled = pytest.importorskip("perturbench._kernels",
                               reason="compiled kernel extension not built")


@pytest.fixture
def plane():
    return Rng(77).uniform(0, 1, (32, 32))


def test_backend_reports_compiled():
    assert get_backend() in ("compiled", "python")


def test_median_agrees(plane):
    a = compiled.median_filter_2d(plane, 3)
    b = knp.median_filter_2d(plane, 3)
    np.testing.assert_array_equal(a, b)


def test_nlm_agrees(plane):
    a = compiled.nlm_2d(plane, 7, 23, 0.07, 0.05)
    b = knp.nlm_2d(plane, 7, 23, 0.07, 0.05)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_tv_agrees(plane):
    ua, oa = compiled.tv_chambolle_2d(plane, 0.1, 2e-4, 200)
    ub, ob = knp.tv_chambolle_2d(plane, 0.1, 2e-4, 200)
    assert len(oa) == len(ob)
    np.testing.assert_allclose(ua, ub, atol=1e-9)
    np.testing.assert_allclose(oa, ob, rtol=1e-9)


def test_tv_objective_monotone_both_backends(plane):
    for impl in (compiled, knp):
        _, obj = impl.tv_chambolle_2d(plane, 0.1, 2e-4, 200)
        assert np.all(np.diff(obj) <= 1e-10)
