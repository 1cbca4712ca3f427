"""Command-line entry point.

Subcommands: synth (generate a benchmark dataset), train, eval, forecast,
graph-export, gradcheck.  Configuration or data problems exit with code 2;
numerical failures during a run exit with code 3.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import config_to_dict, load_config
from .data import (
    SynthSpec,
    chrono_split,
    load_dataset,
    load_embeddings,
    load_graph,
    save_graph,
    synth_generate,
)
from .exceptions import HagenError, NumericalError
from .gradcheck import run_suite
from .homophily import homophily_report
from .metrics import binarize, monthly_f1
from .training import (
    TrainingData,
    evaluate_range,
    load_checkpoint,
    save_checkpoint,
    train,
    write_history,
)


def _load_run_data(data_dir, cfg=None):
    events = os.path.join(data_dir, "events.csv")
    meta = os.path.join(data_dir, "meta.json")
    tensor, meta_obj = load_dataset(events, meta)
    graph = None
    graph_path = os.path.join(data_dir, "graph.csv")
    if cfg is not None and cfg.data.graph:
        graph = load_graph(cfg.data.graph, meta_obj.num_regions)
    elif os.path.exists(graph_path):
        graph = load_graph(graph_path, meta_obj.num_regions)
    pretrained = None
    if cfg is not None and cfg.data.embeddings:
        pretrained = load_embeddings(list(cfg.data.embeddings), meta_obj.num_regions)
    return tensor, meta_obj, graph, pretrained


def cmd_synth(args):
    spec = SynthSpec(
        n_regions=args.regions,
        n_categories=args.categories,
        n_slots=args.slots,
        n_clusters=args.clusters,
        period=args.period,
        flip_prob=args.flip_prob,
        seed=args.seed,
    )
    result = synth_generate(spec, out_dir=args.out)
    occ = result.tensor.occurrences
    print(
        f"wrote synthetic dataset to {args.out}: {occ.shape[0]} regions, "
        f"{occ.shape[1]} categories, {occ.shape[2]} slots, "
        f"{int(occ.sum())} occurrence events"
    )
    return 0


def cmd_train(args):
    cfg = load_config(args.config)
    if not cfg.data.events or not cfg.data.meta:
        data_dir = args.data
        if not data_dir:
            print("error: config has no data paths and --data not given", file=sys.stderr)
            return 2
        tensor, meta, graph, pretrained = _load_run_data(data_dir, cfg)
    else:
        tensor, meta = load_dataset(cfg.data.events, cfg.data.meta)
        graph = load_graph(cfg.data.graph, meta.num_regions) if cfg.data.graph else None
        pretrained = (
            load_embeddings(list(cfg.data.embeddings), meta.num_regions)
            if cfg.data.embeddings else None
        )

    result = train(cfg, TrainingData(tensor=tensor, graph=graph, pretrained=pretrained))

    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(result.best, os.path.join(args.out, "best.ckpt.json"))
    save_checkpoint(result.last, os.path.join(args.out, "last.ckpt.json"))
    write_history(result.history, os.path.join(args.out, "history.csv"))
    with open(os.path.join(args.out, "resolved_config.json"), "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
    last = result.history[-1] if result.history else None
    if last:
        print(
            f"trained {len(result.history)} epoch(s); best epoch {result.best_epoch} "
            f"with validation Macro-F1 {result.best_val_macro_f1:.4f}"
        )
    else:
        print("trained 0 epochs; wrote the initialized checkpoint")
    print(f"artifacts in {args.out}")
    return 0


def _split_range(name, n_slots, tc, window):
    ranges = chrono_split(n_slots, tc.train_frac, tc.val_frac, min_slots=window + 1)
    return dict(zip(("train", "val", "test"), ranges))[name]


def cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    network = ckpt.build_network()
    cfg = ckpt.run_config()
    tensor, _, _, _ = _load_run_data(args.data)
    slot_range = _split_range(args.split, tensor.n_slots, cfg.train, cfg.train.window)
    report, probs, targets, target_slots = evaluate_range(
        network, tensor, cfg.train.window, slot_range,
        cfg.eval.threshold, cfg.train.batch_size,
    )

    doc = report.to_dict()
    doc["split"] = args.split
    doc["slot_range"] = list(slot_range)
    if tensor.origin_timestamp:
        months = monthly_f1(
            binarize(probs, cfg.eval.threshold), targets.astype(np.uint8),
            target_slots, tensor.origin_timestamp, tensor.slot_duration_hours,
        )
        doc["per_month"] = [
            {"month": m, "micro_f1": r.micro_f1, "macro_f1": r.macro_f1}
            for m, r in months
        ]

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "metrics.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    report.write_per_category_csv(os.path.join(args.out, "per_category.csv"))
    print(
        f"{args.split} split: Micro-F1 {report.micro_f1:.4f}, "
        f"Macro-F1 {report.macro_f1:.4f} ({probs.shape[0]} slots)"
    )
    if "per_month" in doc:
        for row in doc["per_month"]:
            print(
                f"  {row['month']}: Micro-F1 {row['micro_f1']:.4f}, "
                f"Macro-F1 {row['macro_f1']:.4f}"
            )
    print(f"reports in {args.out}")
    return 0


def cmd_forecast(args):
    ckpt = load_checkpoint(args.checkpoint)
    network = ckpt.build_network()
    cfg = ckpt.run_config()
    tensor, _, _, _ = _load_run_data(args.data)
    k = cfg.train.window
    if tensor.n_slots < k:
        print(
            f"error: need at least {k} slots of history, dataset has {tensor.n_slots}",
            file=sys.stderr,
        )
        return 2
    window = tensor.occurrences[:, :, tensor.n_slots - k:].astype(np.float64)
    probs = network.predict_proba(window)
    labels = binarize(probs, cfg.eval.threshold)

    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        fh.write("region_id,category_id,probability,predicted_label\n")
        for r in range(probs.shape[0]):
            for c in range(probs.shape[1]):
                fh.write(f"{r},{c},{float(probs[r, c])!r},{int(labels[r, c])}\n")
    print(
        f"forecast for slot {tensor.n_slots}: {int(labels.sum())} predicted "
        f"occurrences across {probs.shape[0]}x{probs.shape[1]} cells -> {args.out}"
    )
    return 0


def cmd_graph_export(args):
    ckpt = load_checkpoint(args.checkpoint)
    network = ckpt.build_network()
    cfg = ckpt.run_config()
    adjacency = network.adjacency().data

    os.makedirs(args.out, exist_ok=True)
    save_graph(adjacency, os.path.join(args.out, "graph.csv"))
    lines = [f"exported learned graph ({int((adjacency > 0).sum())} edges)"]

    if args.data:
        tensor, _, _, _ = _load_run_data(args.data)
        _, _, test_range = chrono_split(
            tensor.n_slots, cfg.train.train_frac, cfg.train.val_frac,
            min_slots=cfg.train.window + 1,
        )
        window = tensor.occurrences[:, :, test_range[0]:test_range[1]]
        report = homophily_report(adjacency, window)
        with open(os.path.join(args.out, "homophily.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        lines.append(f"mean homophily over test labels: {report.mean:.4f}")
    for line in lines:
        print(line)
    print(f"artifacts in {args.out}")
    return 0


def cmd_gradcheck(args):
    results = run_suite(base_seed=args.seed, n_seeds=args.seeds)
    ok = True
    for res in results:
        status = "pass" if res["passed"] else "FAIL"
        print(f"{status}  {res['name']:24s} worst gap {res['worst_gap']:.3e}")
        ok = ok and res["passed"]
    if ok:
        print(f"all {len(results)} gradient checks passed over {args.seeds} seed(s)")
        return 0
    print("gradient check FAILED", file=sys.stderr)
    return 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hagen",
        description="Homophily-aware graph recurrent forecasting of crime occurrences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a clustered synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--regions", type=int, default=10)
    p.add_argument("--categories", type=int, default=3)
    p.add_argument("--slots", type=int, default=200)
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--period", type=int, default=8)
    p.add_argument("--flip-prob", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--data", help="data directory (events.csv + meta.json)")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="data directory")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("forecast", help="forecast the slot after the dataset ends")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="data directory")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("graph-export", help="export the learned region graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="data directory for the homophily report")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_graph_export)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds per module")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except HagenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
