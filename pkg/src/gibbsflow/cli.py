"""Command-line entry point: ``gibbsflow <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import datagen, harness, nn


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _config(args) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = harness.ExperimentConfig.preset(args.preset or "mlp1")
    if args.config and args.preset:
        sizes, act = harness.PRESETS[args.preset]
        cfg = replace(cfg, sizes=tuple(sizes), activation=act, name=args.preset)
    changes = {}
    if args.seeds:
        changes["seeds"] = args.seeds
    if args.estimators:
        changes["estimators"] = args.estimators
    if args.out:
        changes["output_dir"] = str(args.out)
    if getattr(args, "eval_every", None):
        changes["eval_every"] = args.eval_every
    if getattr(args, "epochs", None) is not None:
        changes["train"] = replace(cfg.train, epochs=args.epochs)
    if getattr(args, "mnist_dir", None):
        ds = cfg.dataset
        changes["dataset"] = replace(harness.DataConfig.mnist(args.mnist_dir),
                                     train_size=ds.train_size, test_size=ds.test_size,
                                     subset_seed=ds.subset_seed)
    return replace(cfg, **changes)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seeds", type=_int_list, help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--preset", choices=sorted(harness.PRESETS), type=str.lower,
                   help="architecture preset")
    p.add_argument("--estimators", type=_str_list, help="subset of gibbs,binning,kde")
    p.add_argument("--epochs", type=int, help="override the number of training epochs")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--mnist-dir", help="directory holding the four MNIST IDX files")
    p.add_argument("--workers", type=int, default=1, help="parallel seed jobs")


def cmd_gen_data(args) -> int:
    spec = datagen.SyntheticSpec(args.per_rotation, args.noise_variance, args.seed)
    paths = datagen.export_synthetic(spec, args.out or Path("synthetic"))
    for p in paths.values():
        print(p)
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    train_set, test_set = harness.load_data(cfg.dataset)
    out = Path(cfg.output_dir or "run")
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_resolved(out)
    for seed in cfg.seeds:
        mlp = cfg.build_mlp(seed)
        reports = nn.train(mlp, train_set.inputs, train_set.labels, replace(cfg.train, seed=seed))
        nn.save_weights(mlp, out / f"weights-seed{seed}.mlpw")
        msg = f"seed {seed}: loss {reports[-1].loss:.6g} train_error {reports[-1].train_error:.4f}"
        if test_set is not None:
            msg += f" test_error {nn.evaluate(mlp, test_set.inputs, test_set.labels)[1]:.4f}"
        print(msg)
    return 0


def _cap(cfg: harness.ExperimentConfig) -> float | None:
    if cfg.dataset.kind == "synthetic":
        return datagen.entropy_budget(cfg.dataset.synthetic_spec).total_bits
    return None


def cmd_flow(args, compare: bool = False) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir=f"{cfg.name}-{'compare' if compare else 'flow'}")
    run = harness.compare_estimators if compare else harness.run_flow
    trace = run(cfg, workers=args.workers)
    harness.emit_charts(trace, cfg.output_dir, entropy_cap=_cap(cfg))
    for seed, why in trace.failures.items():
        print(f"seed {seed} failed: {why}", file=sys.stderr)
    print(Path(cfg.output_dir) / "flow.csv")
    return 0


def cmd_iid(args) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir="iid")
    report = harness.run_iid(cfg, checkpoints=args.checkpoints or (), matrices=args.matrices)
    last = max(r.epoch for r in report.correlations)
    print(f"train accuracy {report.train_accuracy:.4f}")
    for layer, row in sorted(report.correlation_at(last).items()):
        print(f"layer {layer}: r_same {row.r_same:.3f} r_diff {row.r_diff:.3f}")
    return 0


def cmd_generalization(args) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir="generalization")
    result = harness.run_generalization(cfg, args.sweep, args.values)
    sys.stdout.write(result.to_csv())
    rho = "undefined" if result.spearman is None else f"{result.spearman:.3f}"
    print(f"spearman(test_accuracy, I_Xbar_f1) = {rho}")
    return 0


def cmd_plot(args) -> int:
    trace = harness.FlowTrace.read(args.trace)
    out = args.out or Path(args.trace).parent
    paths = harness.emit_charts(trace, out, entropy_cap=args.cap)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbsflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic dataset as IDX + JSON")
    p.add_argument("--out", type=Path)
    p.add_argument("--per-rotation", type=int, default=64)
    p.add_argument("--noise-variance", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train and save weight snapshots")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("flow", help="information flow over training")
    _add_common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("compare", help="flow under several estimators on shared weights")
    _add_common(p)
    p.set_defaults(func=lambda a: cmd_flow(a, compare=True))

    p = sub.add_parser("iid", help="activation correlation and weight-condition diagnostics")
    _add_common(p)
    p.add_argument("--checkpoints", type=_int_list, help="epochs for held-out correlations")
    p.add_argument("--matrices", action="store_true", help="write |r| heatmaps (PGM)")
    p.set_defaults(func=cmd_iid)

    p = sub.add_parser("generalization", help="test accuracy vs I(Xbar, F1) sweep")
    _add_common(p)
    p.add_argument("--sweep", choices=["widths", "train_sizes"], default="widths")
    p.add_argument("--values", type=_int_list, default=(32, 128, 512, 1024))
    p.set_defaults(func=cmd_generalization)

    p = sub.add_parser("plot", help="render SVG charts from a flow CSV")
    p.add_argument("trace", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--cap", type=float, help="reference line on I_X charts, in bits")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
