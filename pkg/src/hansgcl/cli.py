"""Command-line entry point: ``hansgcl <subcommand> [--config PATH] ...``.

Exit codes: 0 success, 2 bad config, dataset or metrics input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ._validation import ConfigError
from .experiment import (
    RATIO_GRID,
    MetricsError,
    RunConfig,
    emit_plots,
    run_budget_sweep,
    run_ratio_sweep,
    run_training,
)
from .graph import DatasetError
from .model import ModelParams
from .probe import export_embeddings, final_embeddings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parse_triples(text):
    triples = []
    for chunk in text.split(";"):
        parts = [float(x) for x in chunk.split(",") if x.strip()]
        if len(parts) != 3:
            raise ConfigError(f"ratio triple needs three values, got {chunk!r}")
        triples.append(tuple(parts))
    return triples


def _parse_floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _load_config(args):
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.deterministic:
        changes["deterministic"] = True
    return cfg.replace(**changes) if changes else cfg


def cmd_train(args):
    result = run_training(_load_config(args))
    print(json.dumps(result.report, indent=2))


def cmd_sweep_ratio(args):
    ratios = _parse_triples(args.ratios) if args.ratios else RATIO_GRID
    rows = run_ratio_sweep(_load_config(args), ratios)
    print("easy,hard,inter   micro-F1")
    for r in rows:
        print(f"{r['easy']:g},{r['hard']:g},{r['inter']:g}   "
              f"{100 * r['mean']:.2f} +- {100 * r['std']:.2f}")


def cmd_sweep_budget(args):
    thetas = _parse_floats(args.thetas)
    rows = run_budget_sweep(_load_config(args), thetas)
    print("theta_max   micro-F1          ms/epoch")
    for r in rows:
        print(f"{r['theta_max']:<10g}  {100 * r['mean']:.2f} +- {100 * r['std']:.2f}   "
              f"{r['mean_epoch_ms']:.2f}")


def cmd_export_embeddings(args):
    cfg = _load_config(args)
    graph = cfg.load_graph()
    if args.params:
        params = ModelParams.load(args.params)
    else:
        seed = cfg.seeds[0]
        params = run_training(cfg.replace(seeds=[seed]), graph).params[seed]
    path = Path(cfg.out_dir) / "embeddings.csv"
    export_embeddings(final_embeddings(params, graph), path)
    print(path)


def cmd_plot(args):
    out = args.out if args.out is not None else "plots"
    for path in emit_plots(args.metrics, out, render=not args.no_images):
        print(path)


def build_parser():
    parser = argparse.ArgumentParser(prog="hansgcl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
    common.add_argument("--out", help="output directory")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded BLAS, wall-clock kept out of metrics")

    p = sub.add_parser("train", parents=[common], help="train and probe, one run per seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep-ratio", parents=[common], help="easy/hard/inter ratio ablation")
    p.add_argument("--ratios", help="semicolon-separated easy,hard,inter triples")
    p.set_defaults(func=cmd_sweep_ratio)

    p = sub.add_parser("sweep-budget", parents=[common], help="theta_max ablation with timing")
    p.add_argument("--thetas", default="0,0.25,0.5,1.0")
    p.set_defaults(func=cmd_sweep_budget)

    p = sub.add_parser("export-embeddings", parents=[common],
                       help="write final encoder embeddings as CSV")
    p.add_argument("--params", help="params.npz from an earlier run; trains when omitted")
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("plot", parents=[common], help="accumulation and timing series")
    p.add_argument("metrics", nargs="+", help="metrics.jsonl files")
    p.add_argument("--no-images", action="store_true", help="CSV only")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, DatasetError, MetricsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
