"""Seeded minibatch SGD and gradient verification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import tensor
from ..rng import Rng
from .functional import cross_entropy
from .networks import Classifier


@dataclass
class TrainConfig:
    epochs: int = 12
    batch_size: int = 64
    learning_rate: float = 0.05
    seed: int = 0
    momentum: float = 0.9
    noise_std: float = 0.0      # Gaussian input jitter per batch (augmentation)
    optimizer: str = "sgd"      # sgd | adam

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate < 0:
            raise ValueError("epochs, batch_size must be positive; learning_rate nonnegative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be sgd or adam")


def accuracy(model: Classifier, xs: np.ndarray, ys: np.ndarray, batch: int = 256) -> float:
    hits = 0
    for i in range(0, len(xs), batch):
        hits += int(np.sum(model.predict_batch(xs[i : i + batch]) == ys[i : i + batch]))
    return hits / len(xs)


def train(model: Classifier, train_x, train_y, cfg: TrainConfig,
          test_x=None, test_y=None, verbose: bool = False):
    """Minibatch SGD with momentum. Returns a per-epoch accuracy history.

    Fully deterministic for a fixed (model seed, cfg.seed): shuffling and
    noise augmentation draw from a dedicated Philox stream.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(train_x) == 0:
        raise ValueError("empty training set")
    rng = Rng(cfg.seed, stream=7)
    velocity = {name: np.zeros_like(t.data) for name, t in model.params.items()}
    second = {name: np.zeros_like(t.data) for name, t in model.params.items()}
    step_count = 0
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_x))
        for start in range(0, len(train_x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = train_x[idx]
            if cfg.noise_std > 0:
                xb = np.clip(xb + rng.normal(0.0, cfg.noise_std, size=xb.shape), 0.0, 1.0)
            logits, _ = model.forward_graph(tensor(xb))
            loss = cross_entropy(logits, train_y[idx])
            loss.backward()
            step_count += 1
            for name, t in model.params.items():
                if cfg.optimizer == "adam":
                    b1, b2, eps = 0.9, 0.999, 1e-8
                    m = velocity[name]
                    v = second[name]
                    m *= b1
                    m += (1 - b1) * t.grad
                    v *= b2
                    v += (1 - b2) * t.grad * t.grad
                    mhat = m / (1 - b1 ** step_count)
                    vhat = v / (1 - b2 ** step_count)
                    t.data = t.data - cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
                else:
                    v = velocity[name]
                    v *= cfg.momentum
                    v += t.grad
                    t.data = t.data - cfg.learning_rate * v
                t.grad = None
        entry = {"epoch": epoch, "train_acc": accuracy(model, train_x, train_y)}
        if test_x is not None:
            entry["test_acc"] = accuracy(model, test_x, test_y)
        history.append(entry)
        if verbose:
            print(f"epoch {epoch}: " + " ".join(f"{k}={v:.4f}" for k, v in entry.items() if k != "epoch"))
    return history


def grad_check(model: Classifier, trials: int = 50, coords_per_trial: int = 20,
               h: float = 1e-3, seed: int = 1234) -> float:
    """Max relative error of input_gradient vs central finite differences.

    Probes `trials` random (x, y) pairs and, for each, a random subset of
    input coordinates. Only coordinates where the analytic gradient exceeds
    1e-6 in magnitude enter the relative-error statistic.
    """
    rng = Rng(seed, stream=11)
    shape = tuple(model.input_shape)
    n_coords = int(np.prod(shape))
    worst = 0.0
    for _ in range(trials):
        x = rng.uniform(0.0, 1.0, size=shape)
        y = int(rng.integers(0, model.num_classes))
        g = model.input_gradient(x, y)
        flat_g = g.ravel()
        coords = rng.choice(n_coords, size=min(coords_per_trial, n_coords), replace=False)
        for c in coords:
            if abs(flat_g[c]) <= 1e-6:
                continue
            xp = x.copy().ravel()
            xm = x.copy().ravel()
            xp[c] += h
            xm[c] -= h
            lp = _ce_value(model, xp.reshape(shape), y)
            lm = _ce_value(model, xm.reshape(shape), y)
            fd = (lp - lm) / (2.0 * h)
            worst = max(worst, abs(flat_g[c] - fd) / max(abs(flat_g[c]), 1e-12))
    return worst


def _ce_value(model: Classifier, x: np.ndarray, y: int) -> float:
    logits = model.forward(x)
    m = logits.max()
    return float(np.log(np.sum(np.exp(logits - m))) + m - logits[y])
