"""Experiment orchestration: attack x defense x model grids, transferability
matrices, EOT comparisons, and report emission.

Everything is driven by one JSON config and a master seed; per-image attack
seeds are derived as hash(master_seed, image_index), so serial and parallel
runs produce identical bytes. Results land in a run directory as report.csv,
report.json and mean-spectrum heatmaps.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import dct_spectrum
from .attacks import AttackSpec, run_attack, uap
from .dataset import ToyDataset, generate_toy_dataset
from .defenses import Defense
from .eot import TransformDistribution, eot_pgd
from .image import LpBall, save_pgm
from .metrics import asr, quality_report, top1_error
from .models import TrainConfig, accuracy, build_model, load_checkpoint, save_checkpoint, train
from .rng import derive_seed

#: default per-kind training recipes (empirically tuned on the toy dataset)
DEFAULT_TRAIN = {
    "tiny_cnn": TrainConfig(epochs=10, batch_size=64, learning_rate=0.1),
    "tiny_vit": TrainConfig(epochs=12, batch_size=64, learning_rate=2e-3, optimizer="adam"),
    "linear_softmax": TrainConfig(epochs=10, batch_size=64, learning_rate=0.05),
}

_CONFIG_KEYS = {
    "models", "attacks", "defenses", "eot", "sample_count", "master_seed",
    "n_train", "n_test", "train", "sample_count_overrides", "checkpoint_dir",
    "analyze_samples", "uap_craft_count", "transfer_attack",
}

_TRAIN_KEYS = {"epochs", "batch_size", "learning_rate", "seed", "momentum",
               "noise_std", "optimizer"}


@dataclass
class ExperimentConfig:
    models: list
    attacks: list          # of AttackSpec
    defenses: list         # of Defense
    eot: dict | None = None
    sample_count: int = 200
    master_seed: int = 0
    n_train: int = 2000
    n_test: int = 1000
    train_overrides: dict = field(default_factory=dict)
    sample_count_overrides: dict = field(default_factory=dict)
    checkpoint_dir: str | None = None
    analyze_samples: int = 4
    uap_craft_count: int = 32
    transfer_attack: AttackSpec | None = None

    def __post_init__(self):
        if not self.models or not self.attacks:
            raise ValueError("config needs nonempty model and attack lists")
        for label, count in [("sample_count", self.sample_count)]:
            if count <= 0:
                raise ValueError(f"{label} must be positive")

    @staticmethod
    def from_json(obj: dict) -> "ExperimentConfig":
        unknown = set(obj) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        eot_cfg = obj.get("eot")
        if eot_cfg is not None:
            bad = set(eot_cfg) - {"members", "mc_samples", "epsilon", "steps", "eps_step"}
            if bad:
                raise ValueError(f"unknown eot keys: {sorted(bad)}")
        train_overrides = {}
        for name, tr in (obj.get("train") or {}).items():
            bad = set(tr) - _TRAIN_KEYS
            if bad:
                raise ValueError(f"unknown train keys for {name}: {sorted(bad)}")
            train_overrides[name] = tr
        transfer = obj.get("transfer_attack")
        return ExperimentConfig(
            models=list(obj["models"]),
            attacks=[AttackSpec.from_json(a) for a in obj["attacks"]],
            defenses=[Defense.from_json(d) for d in obj.get("defenses", [])],
            eot=eot_cfg,
            sample_count=obj.get("sample_count", 200),
            master_seed=obj.get("master_seed", 0),
            n_train=obj.get("n_train", 2000),
            n_test=obj.get("n_test", 1000),
            train_overrides=train_overrides,
            sample_count_overrides=dict(obj.get("sample_count_overrides", {})),
            checkpoint_dir=obj.get("checkpoint_dir"),
            analyze_samples=obj.get("analyze_samples", 4),
            uap_craft_count=obj.get("uap_craft_count", 32),
            transfer_attack=AttackSpec.from_json(transfer) if transfer else None,
        )

    @staticmethod
    def load(path) -> "ExperimentConfig":
        with open(str(path)) as f:
            return ExperimentConfig.from_json(json.load(f))


def _thread_count() -> int:
    return max(1, int(os.environ.get("PERTURBENCH_THREADS", "1")))


def _map_ordered(fn, items):
    """Apply fn over items, optionally threaded, preserving order."""
    workers = _thread_count()
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def train_models(cfg: ExperimentConfig, dataset: ToyDataset, verbose: bool = False):
    """Train (or load from checkpoint_dir) every configured model.

    Returns (models dict, histories dict). Training seeds derive from the
    master seed, so a config fully determines the weights.
    """
    models, histories = {}, {}
    for kind in cfg.models:
        ckpt = None
        if cfg.checkpoint_dir:
            ckpt = os.path.join(cfg.checkpoint_dir, f"{kind}.ckpt")
            if os.path.exists(ckpt):
                models[kind] = load_checkpoint(ckpt)
                histories[kind] = []
                continue
        base = DEFAULT_TRAIN.get(kind, TrainConfig())
        overrides = cfg.train_overrides.get(kind, {})
        tc = TrainConfig(**{**base.__dict__, **overrides,
                            "seed": overrides.get("seed", cfg.master_seed)})
        model = build_model(kind, seed=derive_seed(cfg.master_seed, hash(kind) & 0xFFFF))
        histories[kind] = train(model, dataset.train_x, dataset.train_y, tc,
                                dataset.test_x, dataset.test_y, verbose=verbose)
        models[kind] = model
        if ckpt:
            os.makedirs(cfg.checkpoint_dir, exist_ok=True)
            save_checkpoint(model, ckpt)
    return models, histories


def select_clean_correct(models: dict, dataset: ToyDataset, n: int):
    """First n test images (dataset order) every model classifies correctly."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    keep = np.ones(len(dataset.test_x), dtype=bool)
    for model in models.values():
        preds = model.predict_batch(dataset.test_x)
        keep &= preds == dataset.test_y
    idx = np.nonzero(keep)[0]
    if len(idx) < n:
        raise ValueError(f"only {len(idx)} clean-correct samples available, need {n}")
    idx = idx[:n]
    return dataset.test_x[idx], dataset.test_y[idx], idx


def craft_uap(model, spec: AttackSpec, xs, ys, craft_count: int) -> np.ndarray:
    take = min(craft_count, len(xs))
    return uap(model, xs[:take], ys[:take], spec.ball(), spec.step_size, spec.iterations)


def attack_images(model, spec: AttackSpec, xs, ys, master_seed: int,
                  uap_delta: np.ndarray | None = None):
    """Run one attack over a sample set; per-image seeds derive from
    (master_seed, image index)."""
    def one(i):
        return run_attack(model, xs[i], int(ys[i]), spec,
                          seed=derive_seed(master_seed, i), uap_delta=uap_delta)
    return _map_ordered(one, range(len(xs)))


@dataclass
class GridCell:
    model: str
    attack: str
    epsilon: float | None
    asr: float
    quality: dict          # mean QualityReport fields
    spread_radius: float
    top1_err: dict         # defense name -> top-1 error
    undefended_top1: float
    runtime_s: float
    sample_count: int


@dataclass
class EvalReport:
    cells: list
    defense_names: list
    clean_accuracy: dict
    master_seed: int

    CSV_BASE = ("model", "attack", "epsilon", "asr", "psnr_db", "ssim",
                "l0_frac", "l1", "l2", "linf", "spread_radius")

    def to_csv(self, path) -> None:
        cols = list(self.CSV_BASE) + [f"top1_err_{d}" for d in self.defense_names]
        lines = [",".join(cols)]
        for c in self.cells:
            row = [c.model, c.attack, _fmt(c.epsilon), _fmt(c.asr)]
            row += [_fmt(c.quality[k]) for k in ("psnr_db", "ssim", "l0_frac", "l1", "l2", "linf")]
            row.append(_fmt(c.spread_radius))
            row += [_fmt(c.top1_err[d]) for d in self.defense_names]
            lines.append(",".join(row))
        with open(str(path), "w") as f:
            f.write("\n".join(lines) + "\n")

    def to_json_obj(self) -> dict:
        def safe(v):
            # strict JSON has no Infinity; mirror the CSV's "inf" token
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v

        return {
            "master_seed": self.master_seed,
            "clean_accuracy": self.clean_accuracy,
            "defenses": list(self.defense_names),
            "cells": [{
                "model": c.model, "attack": c.attack, "epsilon": c.epsilon,
                "asr": c.asr, "quality": {k: safe(v) for k, v in c.quality.items()},
                "spread_radius": c.spread_radius,
                "top1_err": c.top1_err, "undefended_top1": c.undefended_top1,
                "runtime_s": round(c.runtime_s, 3), "sample_count": c.sample_count,
            } for c in self.cells],
        }

    def to_json(self, path) -> None:
        with open(str(path), "w") as f:
            json.dump(self.to_json_obj(), f, indent=2, sort_keys=True)
            f.write("\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return "%.12g" % v
    return str(v)


def _mean_quality(reports) -> dict:
    out = {}
    for key in ("psnr_db", "ssim", "l0_frac", "l1", "l2", "linf"):
        vals = [getattr(r, key) for r in reports]
        out[key] = math.inf if any(math.isinf(v) for v in vals) else float(np.mean(vals))
    return out


def run_grid(cfg: ExperimentConfig, out_dir, verbose: bool = False) -> EvalReport:
    """The full pipeline: dataset, training, attacks, defenses, reports."""
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    heat_dir = os.path.join(out_dir, "heatmaps")
    os.makedirs(heat_dir, exist_ok=True)

    dataset = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
    models, _ = train_models(cfg, dataset, verbose=verbose)
    xs, ys, _ = select_clean_correct(models, dataset, cfg.sample_count)

    cells = []
    defense_names = [d.kind for d in cfg.defenses]
    for kind, model in models.items():
        for spec in cfg.attacks:
            t0 = time.perf_counter()
            count = int(cfg.sample_count_overrides.get(spec.label,
                        cfg.sample_count_overrides.get(spec.kind, len(xs))))
            sx, sy = xs[:count], ys[:count]
            delta = None
            if spec.kind == "uap":
                delta = craft_uap(model, spec, sx, sy, cfg.uap_craft_count)
            results = attack_images(model, spec, sx, sy, cfg.master_seed, uap_delta=delta)
            advs = np.stack([r.adversarial for r in results])
            qualities = [quality_report(x, a) for x, a in zip(sx, advs)]
            spectra = [dct_spectrum(a - x) for x, a in zip(sx, advs)]
            mean_heat = np.mean([s.coefficients for s in spectra], axis=0)
            save_pgm(os.path.join(heat_dir, f"{kind}_{spec.label}.pgm"),
                     np.log1p(mean_heat))
            top1 = {d.kind: top1_error(model, advs, sy, d) for d in cfg.defenses}
            cell = GridCell(
                model=kind, attack=spec.label, epsilon=spec.epsilon,
                asr=asr(results),
                quality=_mean_quality(qualities),
                spread_radius=float(np.mean([s.spread_radius for s in spectra])),
                top1_err=top1,
                undefended_top1=top1_error(model, advs, sy),
                runtime_s=time.perf_counter() - t0,
                sample_count=count,
            )
            cells.append(cell)
            if verbose:
                print(f"{kind} {spec.label}: asr={cell.asr:.3f} "
                      f"({cell.runtime_s:.1f}s)")

    report = EvalReport(
        cells=cells, defense_names=defense_names,
        clean_accuracy={k: accuracy(m, dataset.test_x, dataset.test_y)
                        for k, m in models.items()},
        master_seed=cfg.master_seed)
    report.to_csv(os.path.join(out_dir, "report.csv"))
    report.to_json(os.path.join(out_dir, "report.json"))
    return report


@dataclass
class TransferMatrix:
    sources: list
    targets: list
    grid: np.ndarray  # (n_sources, n_targets) ASR fractions

    def to_csv(self, path) -> None:
        lines = ["source\\target," + ",".join(self.targets)]
        for i, src in enumerate(self.sources):
            lines.append(src + "," + ",".join(_fmt(float(v)) for v in self.grid[i]))
        with open(str(path), "w") as f:
            f.write("\n".join(lines) + "\n")


def transfer_matrix(models: dict, spec: AttackSpec, xs, ys,
                    master_seed: int = 0) -> TransferMatrix:
    """AEs crafted on each source model, evaluated on every target.

    Entry (i, j) is the fraction of source-i AEs that target j misclassifies;
    the diagonal is exactly the white-box ASR.
    """
    names = list(models)
    if not names:
        raise ValueError("transfer matrix needs at least one model")
    grid = np.zeros((len(names), len(names)))
    for i, src in enumerate(names):
        results = attack_images(models[src], spec, xs, ys, master_seed)
        advs = np.stack([r.adversarial for r in results])
        for j, tgt in enumerate(names):
            if i == j:
                grid[i, j] = asr(results)
            else:
                preds = models[tgt].predict_batch(advs)
                grid[i, j] = float(np.mean(preds != ys))
    return TransferMatrix(sources=names, targets=list(names), grid=grid)


def eot_experiment(cfg: ExperimentConfig, out_dir, models=None, samples=None,
                   verbose: bool = False) -> dict:
    """Defended top-1 error of plain PGD AEs vs EOT AEs, per model and defense."""
    if cfg.eot is None:
        raise ValueError("config has no 'eot' section")
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    eps = float(cfg.eot.get("epsilon", 4.0 / 255.0))
    steps = int(cfg.eot.get("steps", 10))
    # a slightly larger step than plain PGD's eps/10 compensates for the
    # Monte-Carlo damping of the averaged gradient direction
    eps_step = float(cfg.eot.get("eps_step", eps / 5.0))
    mc = int(cfg.eot.get("mc_samples", 8))
    members = [Defense.from_json(m) for m in cfg.eot.get("members",
               ["ss", "nlm", "tvm", "jpeg", "cr"])]
    dist = TransformDistribution(tuple(members), mc)
    ball = LpBall(math.inf, eps)

    if models is None or samples is None:
        dataset = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
        models, _ = train_models(cfg, dataset, verbose=verbose)
        samples = select_clean_correct(models, dataset, cfg.sample_count)[:2]
    xs, ys = samples

    rows = []
    for kind, model in models.items():
        def plain(i):
            return run_attack(model, xs[i], int(ys[i]),
                              AttackSpec("pgd", norm="linf", epsilon=eps,
                                         max_iterations=steps),
                              seed=derive_seed(cfg.master_seed, i))
        def adaptive(i):
            return eot_pgd(model, xs[i], int(ys[i]), ball, steps, eps_step,
                           dist, seed=derive_seed(cfg.master_seed, i))
        plain_advs = np.stack([r.adversarial for r in _map_ordered(plain, range(len(xs)))])
        eot_advs = np.stack([r.adversarial for r in _map_ordered(adaptive, range(len(xs)))])
        for d in members:
            rows.append({
                "model": kind, "defense": d.kind,
                "top1_plain": top1_error(model, plain_advs, ys, d),
                "top1_eot": top1_error(model, eot_advs, ys, d),
            })
        rows.append({"model": kind, "defense": "none",
                     "top1_plain": top1_error(model, plain_advs, ys),
                     "top1_eot": top1_error(model, eot_advs, ys)})
        if verbose:
            for r in rows[-len(members) - 1:]:
                print(f"{kind} {r['defense']}: plain={r['top1_plain']:.3f} "
                      f"eot={r['top1_eot']:.3f}")

    lines = ["model,defense,top1_plain,top1_eot"]
    for r in rows:
        lines.append(f"{r['model']},{r['defense']},{_fmt(r['top1_plain'])},{_fmt(r['top1_eot'])}")
    with open(os.path.join(out_dir, "eot_report.csv"), "w") as f:
        f.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "eot_report.json"), "w") as f:
        json.dump({"epsilon": eps, "steps": steps, "eps_step": eps_step,
                   "mc_samples": mc, "rows": rows}, f, indent=2, sort_keys=True)
        f.write("\n")
    return {"rows": rows, "epsilon": eps, "steps": steps, "eps_step": eps_step,
            "mc_samples": mc}
