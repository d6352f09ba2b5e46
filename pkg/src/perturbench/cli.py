"""Command-line interface.

Subcommands: train, attack, defend, grid, transfer, eot, analyze, report.
All experiment subcommands read one JSON config (see README for the schema)
and write into a run directory. Exit codes: 0 success, 2 usage or config
errors, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis
from .attacks import AttackSpec
from .dataset import generate_toy_dataset
from .defenses import Defense
from .harness import (
    ExperimentConfig,
    attack_images,
    craft_uap,
    eot_experiment,
    run_grid,
    select_clean_correct,
    train_models,
    transfer_matrix,
)
from .image import load_image, save_image, save_pgm
from .metrics import asr
from .models import save_checkpoint


class ConfigError(Exception):
    pass


def _load_config(path) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        return ExperimentConfig.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        raise ConfigError(f"invalid config {path}: {e}") from e


def _prepare(cfg: ExperimentConfig, verbose: bool):
    dataset = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
    models, histories = train_models(cfg, dataset, verbose=verbose)
    return dataset, models, histories


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    dataset, models, histories = _prepare(cfg, args.verbose)
    for kind, model in models.items():
        save_checkpoint(model, os.path.join(args.out, f"{kind}.ckpt"))
    with open(os.path.join(args.out, "history.json"), "w") as f:
        json.dump(histories, f, indent=2, sort_keys=True)
        f.write("\n")
    for kind, hist in histories.items():
        if hist:
            print(f"{kind}: test_acc={hist[-1].get('test_acc', float('nan')):.4f}")
    return 0


def cmd_attack(args) -> int:
    cfg = _load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    dataset, models, _ = _prepare(cfg, args.verbose)
    xs, ys, _ = select_clean_correct(models, dataset, cfg.sample_count)
    lines = ["model,attack,index,success,final_lp,queries"]
    for kind, model in models.items():
        for spec in cfg.attacks:
            delta = craft_uap(model, spec, xs, ys, cfg.uap_craft_count) \
                if spec.kind == "uap" else None
            results = attack_images(model, spec, xs, ys, cfg.master_seed, uap_delta=delta)
            img_dir = os.path.join(args.out, f"{kind}_{spec.label}")
            os.makedirs(img_dir, exist_ok=True)
            for i, r in enumerate(results):
                save_image(os.path.join(img_dir, f"{i:04d}.png"), r.adversarial)
                lines.append(f"{kind},{spec.label},{i},{int(r.success)},"
                             f"{r.final_lp:.8g},{r.queries_used}")
            print(f"{kind} {spec.label}: asr={asr(results):.3f}")
    with open(os.path.join(args.out, "attacks.csv"), "w") as f:
        f.write("\n".join(lines) + "\n")
    return 0


def cmd_defend(args) -> int:
    defense = Defense.from_json(json.loads(args.params) | {"kind": args.kind}
                                if args.params else args.kind)
    x = load_image(args.infile)
    save_image(args.out, defense.apply(x))
    return 0


def cmd_grid(args) -> int:
    cfg = _load_config(args.config)
    report = run_grid(cfg, args.out, verbose=args.verbose)
    print(f"wrote {os.path.join(args.out, 'report.csv')} "
          f"({len(report.cells)} cells)")
    return 0


def cmd_transfer(args) -> int:
    cfg = _load_config(args.config)
    if len(cfg.models) < 2:
        raise ConfigError("transfer needs at least 2 models")
    os.makedirs(args.out, exist_ok=True)
    dataset, models, _ = _prepare(cfg, args.verbose)
    xs, ys, _ = select_clean_correct(models, dataset, cfg.sample_count)
    spec = cfg.transfer_attack or cfg.attacks[0]
    tm = transfer_matrix(models, spec, xs, ys, cfg.master_seed)
    tm.to_csv(os.path.join(args.out, "transfer.csv"))
    print(f"wrote transfer.csv for {spec.label}; diagonal = "
          + ", ".join(f"{tm.grid[i, i]:.3f}" for i in range(len(tm.sources))))
    return 0


def cmd_eot(args) -> int:
    cfg = _load_config(args.config)
    if cfg.eot is None:
        raise ConfigError("config has no 'eot' section")
    result = eot_experiment(cfg, args.out, verbose=args.verbose)
    print(f"wrote eot_report.csv ({len(result['rows'])} rows)")
    return 0


def cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    dataset, models, _ = _prepare(cfg, args.verbose)
    xs, ys, _ = select_clean_correct(models, dataset, cfg.sample_count)
    n = min(cfg.analyze_samples, len(xs))
    spec = cfg.attacks[0]
    for kind, model in models.items():
        results = attack_images(model, spec, xs[:n], ys[:n], cfg.master_seed)
        for i, r in enumerate(results):
            x, adv = xs[i], r.adversarial
            tag = f"{kind}_{spec.label}_{i:02d}"
            spectrum = analysis.dct_spectrum(adv - x)
            save_pgm(os.path.join(args.out, f"{tag}_spectrum.pgm"),
                     np.log1p(spectrum.coefficients))
            save_image(os.path.join(args.out, f"{tag}_adv.png"), adv)
            cam = analysis.grad_cam(model, adv, int(ys[i]))
            save_pgm(os.path.join(args.out, f"{tag}_gradcam.pgm"), cam)
            save_pgm(os.path.join(args.out, f"{tag}_featdiff.pgm"),
                     analysis.feature_map_diff(model, x, adv, cfg.master_seed))
            if kind == "tiny_vit":
                save_pgm(os.path.join(args.out, f"{tag}_rollout.pgm"),
                         analysis.attention_rollout(model, adv))
    print(f"wrote analysis maps to {args.out}")
    return 0


def cmd_report(args) -> int:
    path = os.path.join(args.indir, "report.json")
    if not os.path.exists(path):
        raise ConfigError(f"no report.json under {args.indir}")
    with open(path) as f:
        rep = json.load(f)
    print(f"master_seed={rep['master_seed']}  clean accuracy: "
          + ", ".join(f"{k}={v:.3f}" for k, v in rep["clean_accuracy"].items()))
    header = f"{'model':>10s} {'attack':>10s} {'asr':>6s} {'psnr':>7s} {'ssim':>6s}"
    defenses = rep.get("defenses", [])
    for d in defenses:
        header += f" {'t1_' + d:>8s}"
    print(header)
    for c in rep["cells"]:
        q = c["quality"]
        line = (f"{c['model']:>10s} {c['attack']:>10s} {c['asr']:>6.3f} "
                f"{q['psnr_db']:>7.2f} {q['ssim']:>6.3f}")
        for d in defenses:
            line += f" {c['top1_err'][d]:>8.3f}"
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perturbench",
                                description="desk-scale adversarial robustness benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", required=True, help="output run directory")
        sp.add_argument("--verbose", action="store_true")

    with_config(sub.add_parser("train", help="train models, save checkpoints"))
    with_config(sub.add_parser("attack", help="generate adversarial examples"))
    with_config(sub.add_parser("grid", help="full attack x defense grid"))
    with_config(sub.add_parser("transfer", help="source x target transfer matrix"))
    with_config(sub.add_parser("eot", help="plain vs adaptive attack under defenses"))
    with_config(sub.add_parser("analyze", help="spectra and saliency maps"))

    d = sub.add_parser("defend", help="apply one defense to an image file")
    d.add_argument("--kind", required=True)
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--params", help="JSON object of defense parameters")

    r = sub.add_parser("report", help="print a run's report.json as a table")
    r.add_argument("--in", dest="indir", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 2
    handlers = {
        "train": cmd_train, "attack": cmd_attack, "defend": cmd_defend,
        "grid": cmd_grid, "transfer": cmd_transfer, "eot": cmd_eot,
        "analyze": cmd_analyze, "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure: report and signal nonzero
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
