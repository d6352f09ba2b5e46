"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The heavyweight criteria
share one pair of trained models (session fixture), mirroring how a single
bench run would exercise them.
"""

import json
import math
import time

import numpy as np
import pytest

from perturbench.attacks import AttackSpec, cw_l2, fgsm, pgd, run_attack
from perturbench.cli import main as cli_main
from perturbench.defenses import DEFENSE_NAMES, Defense, apply_defense, tv_objectives
from perturbench.eot import TransformDistribution, eot_pgd
from perturbench.harness import (
    DEFAULT_TRAIN,
    ExperimentConfig,
    attack_images,
    select_clean_correct,
    transfer_matrix,
)
from perturbench.image import LpBall, lp_norm, project_onto_ball
from perturbench.metrics import asr, psnr, ssim, top1_error
from perturbench.models import LinearSoftmax, grad_check, save_checkpoint
from perturbench.analysis import dct_spectrum
from perturbench.rng import Rng, derive_seed

from test_attacks import boundary_instance
from test_image_core import bisection_l1_projection
from test_metrics import psnr_oracle, ssim_oracle


def _report(number: int, name: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    print(f"[ACCEPTANCE {number:02d}] {status} {name}" + (f" ({detail})" if detail else ""))
    assert passed, f"criterion {number} ({name}): {detail}"


@pytest.fixture(scope="session")
def clean_correct(trained_models, toy_dataset):
    models = trained_models["models"]
    xs, ys, _ = select_clean_correct(models, toy_dataset, 200)
    return xs, ys


def test_criterion_01_gradient_fidelity(trained_models):
    t0 = time.perf_counter()
    lin_err = grad_check(LinearSoftmax(seed=3), trials=50, coords_per_trial=10)
    errs = {"linear": lin_err}
    for kind, model in trained_models["models"].items():
        errs[kind] = grad_check(model, trials=50, coords_per_trial=10)
    elapsed = time.perf_counter() - t0
    ok = (errs["linear"] <= 1e-6 and errs["tiny_cnn"] <= 1e-3
          and errs["tiny_vit"] <= 1e-3 and elapsed < 120)
    _report(1, "gradient fidelity", ok,
            f"linear={errs['linear']:.2e} cnn={errs['tiny_cnn']:.2e} "
            f"vit={errs['tiny_vit']:.2e} in {elapsed:.0f}s")


def test_criterion_02_projection_suite():
    rng = Rng(42)
    ok = True
    detail = []
    for p in (1, 2, math.inf):
        ball = LpBall(p, 0.5)
        for _ in range(10 ** 4):
            d = rng.normal(0, 1, size=8)
            proj = project_onto_ball(d, ball)
            if lp_norm(proj, p) > 0.5 * (1 + 1e-6):
                ok = False
                detail.append(f"feasibility violated for p={p}")
                break
            if not np.array_equal(project_onto_ball(proj, ball), proj):
                ok = False
                detail.append(f"idempotence violated for p={p}")
                break
            if lp_norm(d, p) <= 0.5 and not np.array_equal(proj, d):
                ok = False
                detail.append(f"interior fixity violated for p={p}")
                break
    for dim in range(1, 6):
        for _ in range(100):
            v = rng.normal(0, 2, size=dim)
            eps = float(rng.uniform(0.1, 2.0))
            ours = project_onto_ball(v, LpBall(1, eps))
            if np.abs(ours - bisection_l1_projection(v, eps)).max() > 1e-6:
                ok = False
                detail.append(f"L1 oracle mismatch at dim {dim}")
    _report(2, "projection suite", ok, "; ".join(detail) or "3x10^4 vectors + oracle")


def test_criterion_03_attack_feasibility(trained_models, clean_correct):
    xs, ys = clean_correct
    specs = [
        (AttackSpec("fgsm", epsilon=8 / 255), 12),
        (AttackSpec("pgd", norm="linf", epsilon=8 / 255), 12),
        (AttackSpec("pgd", norm="l2", epsilon=1.0), 12),
        (AttackSpec("pgd", norm="l1", epsilon=10.0), 12),
        (AttackSpec("cw_linf", epsilon=8 / 255), 6),
        (AttackSpec("square", epsilon=8 / 255, max_iterations=100), 8),
        (AttackSpec("rays", epsilon=8 / 255, query_budget=300), 6),
        (AttackSpec("uap", epsilon=8 / 255), 8),
        (AttackSpec("jsma", gamma=0.05), 4),
        (AttackSpec("cw_l2"), 6),        # unconstrained: domain check only
        (AttackSpec("ccp"), 8),
    ]
    violations = []
    for kind, model in trained_models["models"].items():
        for spec, count in specs:
            sx, sy = xs[:count], ys[:count]
            delta = None
            if spec.kind == "uap":
                from perturbench.harness import craft_uap
                delta = craft_uap(model, spec, sx, sy, count)
            for i in range(count):
                r = run_attack(model, sx[i], int(sy[i]), spec,
                               seed=derive_seed(7, i), uap_delta=delta)
                adv = r.adversarial
                if adv.min() < 0 or adv.max() > 1:
                    violations.append(f"{kind}/{spec.label}: domain")
                ball = spec.ball()
                if ball is not None and lp_norm(adv - sx[i], ball.p) > ball.epsilon * (1 + 1e-6):
                    violations.append(f"{kind}/{spec.label}: ball")
                if spec.kind == "jsma" and lp_norm(adv - sx[i], 0) > spec.gamma * sx[i].size:
                    violations.append(f"{kind}/jsma: L0 budget")
    _report(3, "attack feasibility", not violations, "; ".join(violations[:4]) or
            f"{len(specs)} attacks x 2 models")


def test_criterion_04_pgd_fgsm_coherence():
    rng = Rng(17)
    mismatches = 0
    for trial in range(100):
        model = LinearSoftmax(seed=trial)
        x = rng.uniform(0, 1, model.input_shape)
        y = int(rng.integers(0, model.num_classes))
        eps = float(rng.uniform(0.005, 0.1))
        a = fgsm(model, x, y, eps).adversarial
        b = pgd(model, x, y, LpBall(math.inf, eps), steps=1, eps_step=eps).adversarial
        if not np.array_equal(a, b):
            mismatches += 1
    _report(4, "PGD single-step == FGSM bitwise", mismatches == 0,
            f"{mismatches}/100 mismatches")


def test_criterion_05_whitebox_potency(trained_models, clean_correct):
    xs, ys = clean_correct
    t0 = time.perf_counter()
    rates = {}
    for kind, model in trained_models["models"].items():
        results = attack_images(model, AttackSpec("pgd", norm="linf", epsilon=8 / 255),
                                xs, ys, master_seed=0)
        rates[kind] = asr(results)
    attack_time = time.perf_counter() - t0
    total = trained_models["train_seconds"] + attack_time
    accs = {k: h[-1]["test_acc"] for k, h in trained_models["histories"].items()}
    ok = (all(r >= 0.90 for r in rates.values())
          and all(a >= 0.90 for a in accs.values()) and total < 600)
    _report(5, "white-box potency", ok,
            f"asr={ {k: round(v, 3) for k, v in rates.items()} } "
            f"acc={ {k: round(v, 3) for k, v in accs.items()} } total={total:.0f}s")


def test_criterion_06_cw_l2_optimality():
    errs = []
    for seed in range(20):
        model, x, y, dist = boundary_instance(seed)
        r = cw_l2(model, x, y, AttackSpec("cw_l2"))
        errs.append(abs(r.final_lp - dist) / dist if r.success else math.inf)
    _report(6, "CW-L2 optimality on linear models", max(errs) <= 0.10,
            f"max rel err {max(errs):.4f}")


def test_criterion_07_blackbox_purity(trained_models, clean_correct):
    from test_attacks import _CountingModel
    xs, ys = clean_correct
    ok = True
    detail = []
    for kind, model in trained_models["models"].items():
        for spec in (AttackSpec("square", epsilon=8 / 255, max_iterations=100),
                     AttackSpec("rays", epsilon=8 / 255, query_budget=300)):
            double = _CountingModel(model)
            budget = spec.query_budget if spec.kind == "rays" else spec.iterations + 1
            for i in range(20):
                double.forward_calls = 0
                r = run_attack(double, xs[i], int(ys[i]), spec, seed=derive_seed(3, i))
                if r.queries_used > budget or double.forward_calls > budget:
                    ok = False
                    detail.append(f"{kind}/{spec.kind}: queries {r.queries_used}>{budget}")
            if double.gradient_calls != 0:
                ok = False
                detail.append(f"{kind}/{spec.kind}: {double.gradient_calls} gradient calls")
    _report(7, "black-box purity", ok, "; ".join(detail[:3]) or "0 gradient calls")


def test_criterion_08_metric_oracles():
    rng = Rng(23)
    ok = True
    detail = []
    for _ in range(20):
        x = rng.uniform(0, 1, (16, 16, 3))
        y = rng.uniform(0, 1, (16, 16, 3))
        if abs(psnr(x, y) - psnr_oracle(x, y)) > 1e-6:
            ok, detail = False, ["psnr oracle mismatch"]
        if abs(ssim(x, y) - ssim_oracle(x, y)) > 1e-6:
            ok, detail = False, ["ssim oracle mismatch"]
    x = rng.uniform(0, 1, (16, 16, 3))
    if abs(ssim(x, x.copy()) - 1.0) > 1e-9:
        ok = False
        detail.append("ssim(x,x) != 1")
    for _ in range(20):
        d = rng.normal(0, 0.1, (16, 16, 3))
        s = dct_spectrum(d)
        if abs(s.total_energy - lp_norm(d, 2) ** 2) > 1e-6 * max(s.total_energy, 1e-12):
            ok = False
            detail.append("parseval")
        s2 = dct_spectrum(3.0 * d)
        if abs(s2.spread_radius - s.spread_radius) > 1e-9:
            ok = False
            detail.append("spread scale-variance")
    _report(8, "metric oracles", ok, "; ".join(detail) or "psnr/ssim/dct verified")


def test_criterion_09_defense_sanity(random_image=None):
    rng = Rng(29)
    x = rng.uniform(0, 1, (32, 32, 3))
    const = np.full((32, 32, 3), 0.4)
    ok = True
    detail = []
    for kind in ("ss", "nlm", "tvm", "jpeg", "cr", "ccp"):
        out = apply_defense(kind, x)
        if out.shape != x.shape or out.min() < 0 or out.max() > 1:
            ok = False
            detail.append(f"{kind}: shape/range")
    for kind in ("ss", "nlm", "tvm"):
        if np.abs(apply_defense(kind, const) - const).max() > 1e-6:
            ok = False
            detail.append(f"{kind}: constant not fixed")
    x2 = rng.uniform(0, 1, (32, 32, 3))
    if psnr(x2, apply_defense("jpeg", x2, quality=100)) < 40:
        ok = False
        detail.append("jpeg q100 psnr")
    obj = tv_objectives(rng.uniform(0, 1, (24, 24)))
    if not np.all(np.diff(obj) <= 1e-10):
        ok = False
        detail.append("chambolle objective increased")
    _report(9, "defense sanity", ok, "; ".join(detail) or "6 defenses verified")


def test_criterion_10_defense_efficacy(trained_models, clean_correct):
    xs, ys = clean_correct
    defenses = [Defense(k) for k in ("ss", "nlm", "tvm", "jpeg", "cr", "ccp")]
    ok = True
    detail = []
    for kind, model in trained_models["models"].items():
        results = attack_images(model, AttackSpec("pgd", norm="linf", epsilon=4 / 255),
                                xs, ys, master_seed=0)
        advs = np.stack([r.adversarial for r in results])
        undefended = top1_error(model, advs, ys)
        wins = sum(1 for d in defenses
                   if undefended - top1_error(model, advs, ys, d) >= 0.10)
        detail.append(f"{kind}: undefended={undefended:.3f} wins={wins}/6")
        if wins < 4:
            ok = False
    _report(10, "defense efficacy (directional)", ok, "; ".join(detail))


def test_criterion_11_eot_degeneracy_and_potency(trained_models, clean_correct):
    xs, ys = clean_correct
    ball = LpBall(math.inf, 4 / 255)
    model = trained_models["models"]["tiny_cnn"]
    # degeneracy: identity distribution reproduces plain PGD bitwise
    ident = TransformDistribution.of(["identity"], mc_samples=1)
    degenerate_ok = True
    for i in range(10):
        a = pgd(model, xs[i], int(ys[i]), ball, 10, 4 / 255 / 10)
        b = eot_pgd(model, xs[i], int(ys[i]), ball, 10, 4 / 255 / 10, ident,
                    seed=derive_seed(1, i))
        if not np.array_equal(a.adversarial, b.adversarial):
            degenerate_ok = False
    # potency: mean defended top-1 error of EOT AEs exceeds plain PGD AEs
    members = TransformDistribution.of(["ss", "nlm", "tvm", "jpeg", "cr"], mc_samples=8)
    defenses = [Defense(k) for k in ("ss", "nlm", "tvm", "jpeg", "cr")]
    potency_ok = True
    detail = []
    for kind, m in trained_models["models"].items():
        plain = attack_images(m, AttackSpec("pgd", norm="linf", epsilon=4 / 255),
                              xs, ys, master_seed=0)
        plain_advs = np.stack([r.adversarial for r in plain])
        eot_advs = np.stack([
            eot_pgd(m, xs[i], int(ys[i]), ball, 10, 4 / 255 / 5, members,
                    seed=derive_seed(0, i)).adversarial
            for i in range(len(xs))])
        mean_plain = float(np.mean([top1_error(m, plain_advs, ys, d) for d in defenses]))
        mean_eot = float(np.mean([top1_error(m, eot_advs, ys, d) for d in defenses]))
        detail.append(f"{kind}: plain={mean_plain:.3f} eot={mean_eot:.3f}")
        if mean_eot <= mean_plain:
            potency_ok = False
    _report(11, "EOT degeneracy and potency", degenerate_ok and potency_ok,
            ("degenerate-ok " if degenerate_ok else "degenerate-FAIL ") + "; ".join(detail))


def test_criterion_12_transfer_structure(trained_models, clean_correct):
    xs, ys = clean_correct
    models = trained_models["models"]
    spec = AttackSpec("fgsm", epsilon=8 / 255)
    tm = transfer_matrix(models, spec, xs, ys, master_seed=0)
    diag_ok = True
    for i, kind in enumerate(tm.sources):
        results = attack_images(models[kind], spec, xs, ys, master_seed=0)
        if tm.grid[i, i] != asr(results):
            diag_ok = False
    off_ok = (tm.grid[0, 1] < tm.grid[0, 0] and tm.grid[0, 1] < tm.grid[1, 1]
              and tm.grid[1, 0] < tm.grid[0, 0] and tm.grid[1, 0] < tm.grid[1, 1])
    _report(12, "transfer structure", diag_ok and off_ok,
            f"grid={np.round(tm.grid, 3).tolist()}")


def test_criterion_13_grid_determinism(trained_models, tmp_path):
    ckpt_dir = tmp_path / "ckpts"
    ckpt_dir.mkdir()
    for kind, model in trained_models["models"].items():
        save_checkpoint(model, ckpt_dir / f"{kind}.ckpt")
    cfg = {
        "models": ["tiny_cnn", "tiny_vit"],
        "attacks": [{"kind": "fgsm", "epsilon": 8 / 255},
                    {"kind": "pgd", "norm": "linf", "epsilon": 4 / 255},
                    {"kind": "ccp"}],
        "defenses": ["ss", "nlm", "tvm", "jpeg", "cr", "ccp"],
        "sample_count": 10,
        "master_seed": 0,
        "n_train": 2000,
        "n_test": 1000,
        "checkpoint_dir": str(ckpt_dir),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    rc1 = cli_main(["grid", "--config", str(cfg_path), "--out", str(tmp_path / "r1")])
    rc2 = cli_main(["grid", "--config", str(cfg_path), "--out", str(tmp_path / "r2")])
    b1 = (tmp_path / "r1" / "report.csv").read_bytes()
    b2 = (tmp_path / "r2" / "report.csv").read_bytes()
    _report(13, "grid determinism", rc1 == 0 and rc2 == 0 and b1 == b2,
            f"{len(b1)} bytes, identical={b1 == b2}")
