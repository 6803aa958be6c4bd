"""Command-line pipeline: ingest, sample, train, predict, evaluate, probe.

Every command is driven by an optional JSON config file plus command-line
overrides, validates its configuration before touching data, and is a pure
function of (config, input files, seeds): reruns reproduce outputs byte for
byte.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import activation_probe, baseline_model, dataset_builder, dgcnn_model
from .dgcnn_model import ArchitectureConfig, TrainConfig
from .graph_store import (ParseError, ingest_edge_list_with_summary, load_graph,
                          save_event_cache, snapshot, year_cutoff_day)

DEFAULT_CONFIG = {
    "input_year": 2014,
    "n_pairs": 100000,
    "seed": 0,
    "extraction_seed": 0,
    "workers": 1,
    "architecture": {
        "gcn_channels": [128, 128, 128, 128, 1],
        "sort_k": 200,
        "conv_stack": [64, 128, "maxpool", 128, 64],
        "dense_sizes": [256, 128, 1],
        "l_max": 10,
        "h": 1,
        "keep_fraction": 0.35,
        "conv_kernel": 5,
        "pool_window": 2,
        "type2_zero": False,
    },
    "train": {
        "learning_rate": 1e-5,
        "batch_size": 1,
        "epochs": 50,
        "patience": 5,
        "validation_fraction": 0.1,
        "seed": 0,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
    },
    "baseline": {
        "hidden_units": 64,
        "learning_rate": 1e-3,
        "epochs": 30,
        "seed": 0,
    },
}


class ConfigError(ValueError):
    pass


def load_config(path=None) -> dict:
    """Defaults merged with the JSON config file; unknown keys are rejected."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is None:
        return config
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    for key, value in user.items():
        if key not in config:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        if isinstance(config[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: {key!r} must be an object")
            for sub, sub_value in value.items():
                if sub not in config[key]:
                    raise ConfigError(f"{path}: unknown config key {key}.{sub}")
                config[key][sub] = sub_value
        else:
            config[key] = value
    return config


def architecture_from_config(config: dict) -> ArchitectureConfig:
    a = config["architecture"]
    try:
        arch = ArchitectureConfig(
            gcn_channels=tuple(int(c) for c in a["gcn_channels"]),
            sort_k=int(a["sort_k"]),
            conv_stack=tuple(e if e == "maxpool" else int(e) for e in a["conv_stack"]),
            dense_sizes=tuple(int(c) for c in a["dense_sizes"]),
            l_max=int(a["l_max"]),
            h=int(a["h"]),
            keep_fraction=float(a["keep_fraction"]),
            conv_kernel=int(a["conv_kernel"]),
            pool_window=int(a["pool_window"]),
            type2_zero=bool(a["type2_zero"]),
        )
        arch.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad architecture config: {exc}") from None
    return arch


def train_config_from_config(config: dict) -> TrainConfig:
    t = config["train"]
    tc = TrainConfig(learning_rate=float(t["learning_rate"]),
                     batch_size=int(t["batch_size"]), epochs=int(t["epochs"]),
                     patience=int(t["patience"]),
                     validation_fraction=float(t["validation_fraction"]),
                     seed=int(t["seed"]), beta1=float(t["beta1"]),
                     beta2=float(t["beta2"]), eps=float(t["eps"]))
    tc.validate()
    return tc


def _write_scores(scores, path):
    with open(path, "w", encoding="ascii") as fh:
        for s in scores:
            fh.write(f"{s:.12g}\n")


def _load_scores(path):
    scores = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                scores.append(float(line))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a score: {line!r}") from None
    return scores


def _load_types(path):
    types = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line not in ("0", "1", "2"):
                raise ParseError(f"{path}:{lineno}: pair type must be 0, 1 or 2")
            types.append(int(line))
    return types


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args):
    graph, summary = ingest_edge_list_with_summary(args.edges)
    save_event_cache(graph, args.out)
    sys.stdout.write(summary.format())
    return 0


def cmd_make_training_set(args):
    config = load_config(args.config)
    input_year = args.input_year if args.input_year is not None else config["input_year"]
    n_pairs = args.n_pairs if args.n_pairs is not None else config["n_pairs"]
    seed = args.seed if args.seed is not None else config["seed"]
    split = dataset_builder.make_split(input_year)
    graph = load_graph(args.graph)
    input_snap = snapshot(graph, year_cutoff_day(split.training_input_year))
    target_snap = snapshot(graph, year_cutoff_day(split.training_target_year))
    pairs = dataset_builder.sample_training_pairs(input_snap, target_snap,
                                                  n_pairs, seed)
    dataset_builder.save_labeled_pairs(pairs, args.out)
    print(f"wrote {len(pairs)} pairs to {args.out} "
          f"(input year {split.training_input_year}, "
          f"target year {split.training_target_year})")
    return 0


def cmd_train(args):
    config = load_config(args.config)
    input_year = args.input_year if args.input_year is not None else config["input_year"]
    arch = architecture_from_config(config)
    train_cfg = train_config_from_config(config)
    if args.epochs is not None:
        train_cfg = TrainConfig(**{**train_cfg.__dict__, "epochs": args.epochs})
    split = dataset_builder.make_split(input_year)
    graph = load_graph(args.graph)
    input_snap = snapshot(graph, year_cutoff_day(split.training_input_year))
    pairs = dataset_builder.load_labeled_pairs(args.pairs, input_snap)
    model = dgcnn_model.build_model(arch, seed=config["seed"])
    best, history = dgcnn_model.train(model, pairs, input_snap, train_cfg)
    dgcnn_model.save_checkpoint(best, args.checkpoint)
    if args.history:
        dgcnn_model.save_history(history, args.history)
    final = history[-1]
    print(f"trained {final.epoch} epochs, final mean loss {final.mean_loss:.6f}, "
          f"val AUC {final.val_auc:.6f}")
    return 0


def cmd_predict(args):
    config = load_config(args.config)
    input_year = args.input_year if args.input_year is not None else config["input_year"]
    seed = args.seed if args.seed is not None else config["extraction_seed"]
    model = dgcnn_model.load_checkpoint(args.checkpoint)
    graph = load_graph(args.graph)
    snap = snapshot(graph, year_cutoff_day(input_year))
    pairs = dataset_builder.load_eval_pairs(args.pairs)
    scores = dgcnn_model.predict_pairs(model, snap, pairs, seed=seed,
                                       workers=config["workers"])
    _write_scores(scores, args.out)
    print(f"wrote {len(scores)} scores to {args.out}")
    return 0


def cmd_evaluate(args):
    scores = _load_scores(args.scores)
    truth = dataset_builder.load_ground_truth(args.truth)
    dataset_builder.check_alignment(scores, truth, args.scores, args.truth)
    types = None
    if args.types:
        types = _load_types(args.types)
        dataset_builder.check_alignment(scores, types, args.scores, args.types)
    from .eval_metrics import evaluate

    report = evaluate(scores, truth, types)
    text = report.format()
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_baseline_train(args):
    config = load_config(args.config)
    input_year = args.input_year if args.input_year is not None else config["input_year"]
    b = config["baseline"]
    baseline_cfg = baseline_model.BaselineConfig(
        hidden_units=int(b["hidden_units"]), learning_rate=float(b["learning_rate"]),
        epochs=int(b["epochs"]), seed=int(b["seed"]))
    split = dataset_builder.make_split(input_year)
    graph = load_graph(args.graph)
    years = [split.training_input_year - off for off in (0, 1, 2)]
    snaps = [snapshot(graph, year_cutoff_day(y)) for y in years]
    pairs = dataset_builder.load_labeled_pairs(args.pairs, snaps[0])
    features = baseline_model.compute_feature_matrix(snaps, pairs)
    labels = [p.label for p in pairs]
    params = baseline_model.baseline_train(features, labels, baseline_cfg)
    baseline_model.save_baseline(params, args.checkpoint)
    print(f"trained baseline on {len(pairs)} pairs, checkpoint at {args.checkpoint}")
    return 0


def cmd_baseline_predict(args):
    config = load_config(args.config)
    input_year = args.input_year if args.input_year is not None else config["input_year"]
    params = baseline_model.load_baseline(args.checkpoint)
    graph = load_graph(args.graph)
    years = [input_year - off for off in (0, 1, 2)]
    snaps = [snapshot(graph, year_cutoff_day(y)) for y in years]
    pairs = dataset_builder.load_eval_pairs(args.pairs)
    features = baseline_model.compute_feature_matrix(snaps, pairs)
    scores = baseline_model.baseline_predict(params, features)
    _write_scores(scores, args.out)
    print(f"wrote {len(scores)} scores to {args.out}")
    return 0


def cmd_dump_activations(args):
    config = load_config(args.config)
    input_year = args.input_year if args.input_year is not None else config["input_year"]
    seed = args.seed if args.seed is not None else config["extraction_seed"]
    model = dgcnn_model.load_checkpoint(args.checkpoint)
    graph = load_graph(args.graph)
    split = dataset_builder.make_split(input_year)
    snap = snapshot(graph, year_cutoff_day(split.training_input_year))
    pairs = dataset_builder.load_labeled_pairs(args.pairs, snap)
    top = activation_probe.select_top_examples(model, pairs, snap,
                                               args.n_per_label, seed=seed)
    indices = top.label1 + top.label0
    matrices, metadata = activation_probe.collect_activations(model, snap, pairs,
                                                              indices, seed=seed)
    if args.flat:
        activation_probe.export_activations_flat(matrices, metadata, args.out)
    else:
        activation_probe.export_activations(matrices, metadata, args.out)
    note = ""
    if top.shortfall:
        note = " (shortfall: " + ", ".join(
            f"label {k}: {v} short" for k, v in sorted(top.shortfall.items())) + ")"
    print(f"wrote {len(matrices)} activation blocks to {args.out}{note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkpred",
        description="Temporal link prediction with enclosing-subgraph GNNs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True, needs_config=True):
        if needs_config:
            p.add_argument("--config", help="JSON config file")
            p.add_argument("--input-year", type=int, dest="input_year")
        if graph:
            p.add_argument("--graph", required=True,
                           help="edge-list text file or binary event cache")

    p = sub.add_parser("ingest", help="parse an edge list into a binary event cache")
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("make-training-set", help="sample a balanced labeled pair file")
    common(p)
    p.add_argument("--n-pairs", type=int, dest="n_pairs")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_training_set)

    p = sub.add_parser("train", help="train the subgraph classifier")
    common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a pair file with a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="AUC report from score and truth files")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--types")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline-train", help="train the 15-feature baseline")
    common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_baseline_train)

    p = sub.add_parser("baseline-predict", help="score a pair file with the baseline")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline_predict)

    p = sub.add_parser("dump-activations",
                       help="export sort-pooling activations of best-predicted pairs")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-label", type=int, default=100, dest="n_per_label")
    p.add_argument("--seed", type=int)
    p.add_argument("--flat", action="store_true",
                   help="one flattened vector per example instead of k x C blocks")
    p.set_defaults(func=cmd_dump_activations)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
