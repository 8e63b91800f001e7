"""Command-line entry point: ``cgcn train | eval | inspect | verify``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import oracles
from .io import (
    CONFIG_HELP,
    ArchiveError,
    DatasetFormatError,
    config_from_dict,
    load_config,
    load_model,
    load_tudataset_with_manifest,
    save_model,
)
from .trainer import TrainConfig, evaluate, split_dataset, train_layerwise

SPLITS = ("train", "val", "test", "all")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgcn",
        description="Train and inspect convexified graph convolutional networks.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "train",
        help="train a model on a TUDataset directory",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("dataset", help="TUDataset directory")
    p.add_argument("--config", help="key = value config file (see below)")
    p.add_argument("--out", required=True, help="output model archive")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--quiet", action="store_true", help="do not print per-epoch objectives")

    p = sub.add_parser("eval", help="evaluate a saved model on one split")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument(
        "--split", choices=SPLITS, default="test", help="split to score; ratios and seed come from the model's config"
    )
    p.add_argument("--seed", type=int, help="split seed (defaults to the training seed)")

    p = sub.add_parser("inspect", help="print layer shapes and nuclear norms")
    p.add_argument("model")

    p = sub.add_parser("verify", help="run the verification oracles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--summary", help="write a tab-separated summary file")
    return parser


def _splits(ds, config: TrainConfig):
    train, val, test = split_dataset(ds, config.split, config.seed)
    return {"train": train, "val": val, "test": test, "all": ds}


def _cmd_train(args) -> int:
    config = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    ds, manifest = load_tudataset_with_manifest(args.dataset)
    print(
        f"dataset {manifest.name}: {manifest.num_graphs} graphs, {manifest.num_nodes} nodes, "
        f"{manifest.num_edges} edges, {manifest.num_classes} classes, features={manifest.feature_source}"
    )
    parts = _splits(ds, config)

    def on_epoch(layer, epoch, value, lr):
        if not args.quiet:
            print(f"layer {layer} epoch {epoch + 1} objective {value:.6f} lr {lr:.2e}")

    model, _ = train_layerwise(parts["train"], config, on_epoch=on_epoch)
    digest = save_model(model, args.out)
    for name in ("train", "val", "test"):
        m = evaluate(model, parts[name])
        print(f"{name} accuracy {m.accuracy:.4f} loss {m.mean_loss:.4f} ({len(parts[name])} graphs)")
    print(f"saved {args.out} sha256 {digest}")
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    config = config_from_dict(model.config) if model.config else TrainConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    ds, _ = load_tudataset_with_manifest(args.dataset)
    part = _splits(ds, config)[args.split]
    m = evaluate(model, part)
    print(f"{args.split} accuracy {m.accuracy:.4f} loss {m.mean_loss:.4f} ({len(part)} graphs)")
    return 0


def _cmd_inspect(args) -> int:
    model = load_model(args.model)
    print(f"shift {model.shift_kind}, classes {model.num_classes}, layers {len(model.layers)}")
    ok = True
    for i, layer in enumerate(model.layers):
        norm = layer.nuclear_norm()
        within = norm <= layer.budget + 1e-6
        ok &= within
        landmarks = [fk.references.shape[0] for fk in layer.kernels]
        print(
            f"layer {i}: in {layer.input_dim} out {layer.output_dim} hops {layer.hops} "
            f"widths {layer.widths} references {landmarks} "
            f"nuclear {norm:.6f} budget {layer.budget:.6f} {'ok' if within else 'EXCEEDED'}"
        )
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    reports = oracles.run_all(args.seed)
    for r in reports:
        print(r.line())
    if args.summary:
        oracles.write_summary(reports, args.summary)
    return 0 if all(r.passed for r in reports) else 1


COMMANDS = {"train": _cmd_train, "eval": _cmd_eval, "inspect": _cmd_inspect, "verify": _cmd_verify}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, ArchiveError, DatasetFormatError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
