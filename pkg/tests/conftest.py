import numpy as np
import pytest

from perturbench.dataset import generate_toy_dataset
from perturbench.rng import Rng


@pytest.fixture
def rng():
    return Rng(12345)


@pytest.fixture
def random_image(rng):
    return rng.uniform(0.0, 1.0, size=(32, 32, 3))


@pytest.fixture(scope="session")
def toy_dataset():
    return generate_toy_dataset(0, 2000, 1000)


@pytest.fixture(scope="session")
def trained_models(toy_dataset):
    """Both toy models trained to the accuracy gate, shared across the
    acceptance tests. Training wall time is recorded for the runtime gate."""
    import time

    from perturbench.harness import DEFAULT_TRAIN
    from perturbench.models import TinyCnn, TinyViT, train

    ds = toy_dataset
    out = {}
    t0 = time.perf_counter()
    for kind, cls in (("tiny_cnn", TinyCnn), ("tiny_vit", TinyViT)):
        model = cls(seed=0)
        hist = train(model, ds.train_x, ds.train_y, DEFAULT_TRAIN[kind],
                     ds.test_x, ds.test_y)
        out[kind] = (model, hist)
    elapsed = time.perf_counter() - t0
    return {"models": {k: v[0] for k, v in out.items()},
            "histories": {k: v[1] for k, v in out.items()},
            "train_seconds": elapsed}
