"""Command-line interface.

Subcommands: ``datagen`` (synthesize train/val/test splits), ``train``
(fit one model and write model.json), ``eval`` (regret report for a split),
``sweep`` (full experiment grid to CSV), and ``bias-demo`` (the one-of-n
variance Monte Carlo).  Repeating any invocation with identical flags
reproduces byte-identical model.json output and identical results.csv
numeric fields (the wall-time bookkeeping column aside).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (BiasDemoConfig, SweepConfig, bias_demo, build_instance,
                    default_sweep_config, eval_expected_regret, eval_regret,
                    run_sweep, write_sweep_csv)
from .core import (RngStream, STREAM_TEST_SAMPLES, STREAM_TRAIN_SAMPLES,
                   STREAM_VAL_SAMPLES)
from .datagen import GenParams, generate_samples, load_dataset, make_gen_model, save_dataset
from .learning import TrainConfig, load_model, save_model, train
from .oracles import UncertaintyParams, instance_from_descriptor
from .targets import KNN, Empirical, RobustOpt, TopK, build_targets


def _add_datagen(sub):
    p = sub.add_parser("datagen", help="generate train/val/test splits")
    p.add_argument("--problem", choices=["grid", "tsp"], required=True)
    p.add_argument("--grid", default="5x5", help="VxH for grid problems")
    p.add_argument("--nodes", type=int, default=8, help="node count for tsp problems")
    p.add_argument("--features", type=int, default=5)
    p.add_argument("--deg", type=int, default=6)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--train", type=int, default=100)
    p.add_argument("--val", type=int, default=100)
    p.add_argument("--test", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-shared", action="store_true",
                   help="one noise factor per sample instead of per coefficient")
    p.add_argument("--out", required=True)


def _cmd_datagen(args) -> int:
    if args.problem == "grid":
        v, h = args.grid.split("x")
        problem = {"kind": "grid", "v": int(v), "h": int(h)}
    else:
        problem = {"kind": "tsp", "nodes": args.nodes}
    inst = build_instance(problem, instance_seed=args.seed)
    params = GenParams(m=args.features, deg=args.deg, noise_halfwidth=args.noise,
                       t_train=args.train, t_val=args.val, t_test=args.test,
                       seed=args.seed, noise_shared=args.noise_shared)
    gm = make_gen_model(inst, args.features, args.seed)
    out = Path(args.out)
    for split, count, stream_id in (("train", args.train, STREAM_TRAIN_SAMPLES),
                                    ("val", args.val, STREAM_VAL_SAMPLES),
                                    ("test", args.test, STREAM_TEST_SAMPLES)):
        ds = generate_samples(gm, count, params, RngStream(args.seed, stream_id), split)
        save_dataset(ds, out / split)
    print(f"wrote {out}/train,val,test ({inst.descriptor()}, n={inst.n})")
    return 0


def _add_train(sub):
    p = sub.add_parser("train", help="train one model")
    p.add_argument("--data", required=True, help="dataset directory from datagen")
    p.add_argument("--method", choices=["spo+", "pfyl", "pfl"], required=True)
    p.add_argument("--loss", choices=["emp", "ro", "topk", "knn"], default="emp")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--w", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--gamma-frac", type=float, default=0.125,
                   help="total deviation budget as a fraction of n")
    p.add_argument("--pfyl-m", type=int, default=1)
    p.add_argument("--pfyl-sigma", type=float, default=1.0)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _policy_from_flags(args, n: int):
    if args.loss == "emp":
        return Empirical()
    if args.loss == "ro":
        return RobustOpt(UncertaintyParams(rho=args.rho, gamma=args.gamma_frac * n))
    if args.loss == "topk":
        return TopK(k=args.k)
    return KNN(k=args.k, w=args.w)


def _cmd_train(args) -> int:
    data = Path(args.data)
    train_ds = load_dataset(data / "train")
    val_ds = load_dataset(data / "val")
    inst = instance_from_descriptor(train_ds.meta.instance)
    method = "mse" if args.method == "pfl" else args.method
    policy = _policy_from_flags(args, inst.n)
    cfg = TrainConfig(method=method, policy=policy, epochs=args.epochs,
                      batch_size=args.batch, lr=args.lr, seed=args.seed,
                      pfyl_samples=args.pfyl_m, pfyl_sigma=args.pfyl_sigma)
    targets = None if method == "mse" else build_targets(policy, train_ds, inst)
    model = train(cfg, train_ds, val_ds, inst, targets)
    save_model(model, cfg, args.out)
    print(f"wrote {args.out} (best epoch {model.best_epoch}, "
          f"solves: precompute={model.audit.precompute} "
          f"gradient={model.audit.gradient} eval={model.audit.evaluation})")
    return 0


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a model on one split")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], required=True)
    p.add_argument("--report", required=True)


def _cmd_eval(args) -> int:
    ds = load_dataset(Path(args.data) / args.split)
    inst = instance_from_descriptor(ds.meta.instance)
    predictor, _payload = load_model(args.model)
    pred = predictor.predict_batch(ds.features)
    report = eval_regret(pred, ds, inst, split=args.split, model_id=str(args.model))
    expected = (eval_expected_regret(pred, ds, inst)
                if ds.clean_costs is not None else None)
    payload = {
        "split": report.split,
        "model": report.model_id,
        "normalized_regret_pct": report.normalized_regret_pct,
        "expected_normalized_regret_pct": expected,
        "denominator_zero": report.denominator_zero,
        "per_sample_regret": [float(r) for r in report.per_sample],
    }
    with open(args.report, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
    print(f"{args.split}: normalized regret {report.normalized_regret_pct:.4f}%")
    return 0


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="run an experiment grid")
    p.add_argument("--config", required=True,
                   help="sweep JSON; 'default' writes and uses desk-scale defaults")
    p.add_argument("--out", required=True)


def _cmd_sweep(args) -> int:
    if args.config == "default":
        cfg_dict = default_sweep_config()
    else:
        with open(args.config) as fh:
            cfg_dict = json.load(fh)
    cfg = SweepConfig.from_dict(cfg_dict)
    rows = run_sweep(cfg)
    write_sweep_csv(rows, args.out)
    n_detail = sum(1 for r in rows if r["row_type"] == "detail")
    print(f"wrote {args.out}: {n_detail} runs, {len(rows) - n_detail} aggregates")
    return 0


def _add_bias_demo(sub):
    p = sub.add_parser("bias-demo", help="one-of-n variance Monte Carlo")
    p.add_argument("--nh", type=int, required=True)
    p.add_argument("--nl", type=int, required=True)
    p.add_argument("--sigma-h", type=float, required=True)
    p.add_argument("--sigma-l", type=float, required=True)
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional JSON output path")


def _cmd_bias_demo(args) -> int:
    result = bias_demo(BiasDemoConfig(
        n_h=args.nh, n_l=args.nl, sigma_h=args.sigma_h, sigma_l=args.sigma_l,
        trials=args.trials, seed=args.seed))
    text = json.dumps(result.to_dict(), sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dflkit",
        description="decision-focused learning with robust regret losses")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_datagen(sub)
    _add_train(sub)
    _add_eval(sub)
    _add_sweep(sub)
    _add_bias_demo(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "datagen": _cmd_datagen,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "sweep": _cmd_sweep,
        "bias-demo": _cmd_bias_demo,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
