"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from lainr.errors import ConfigError, NumericalError, ParseError
from lainr.runner import compare, resolve_config, rows_to_csv, run, run_grid_search

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TASK_COMMANDS = ("fit-image", "superres", "inpaint", "ct", "occupancy", "spectral")

# flag -> (dest, config key, type)
_COMMON = [
    ("--arch", "model.architecture", str),
    ("--degree", "model.degree", int),
    ("--width", "model.hidden_width", int),
    ("--hidden-layers", "model.num_hidden_layers", int),
    ("--rank", "model.rank", int),
    ("--omega0", "model.omega0", float),
    ("--epochs", "train.epochs", int),
    ("--lr", "train.lr", float),
    ("--batch-size", "train.batch_size", int),
    ("--log-every", "train.log_every", int),
    ("--seed", "seed", int),
    ("--out", "output_dir", str),
]
_TASK = [
    ("--image", "task.image", str),
    ("--size", "task.size", int),
    ("--factor", "task.factor", int),
    ("--keep-fraction", "task.keep_fraction", float),
    ("--phantom", "task.phantom", str),
    ("--angles", "task.num_angles", int),
    ("--volume", "task.volume", str),
]


def _add_run_options(p, with_task_flag=False):
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field, e.g. --set train.lr=1e-2")
    for flag, key, typ in _COMMON + _TASK:
        p.add_argument(flag, dest=key.replace(".", "__"), type=typ, default=None)
    p.add_argument("--models", nargs="+", default=None, help="architectures for spectral runs")
    p.add_argument("--overwrite", action="store_true", default=None)
    p.add_argument("--record-time", action="store_true", default=None,
                   help="write wall-clock seconds into report.csv")
    if with_task_flag:
        p.add_argument("--task", choices=TASK_COMMANDS[:-1], default="fit-image")


def build_parser():
    parser = argparse.ArgumentParser(prog="lainr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASK_COMMANDS:
        _add_run_options(sub.add_parser(name, help=f"train on the {name} task"))
    gs = sub.add_parser("grid-search", help="sweep learning rate x batch size")
    _add_run_options(gs, with_task_flag=True)
    gs.add_argument("--lrs", nargs="+", type=float, default=None)
    gs.add_argument("--batch-sizes", nargs="+", type=int, default=None)
    cp = sub.add_parser("compare", help="align and rank training reports")
    cp.add_argument("reports", nargs="+", help="report CSV files or run directories")
    cp.add_argument("--labels", nargs="+", default=None)
    cp.add_argument("--out", type=Path, required=True, help="output directory")
    cp.add_argument("--overwrite", action="store_true")
    return parser


def _overrides(args, kind):
    ov = {"task.kind": kind}
    for _, key, _ in _COMMON + _TASK:
        ov[key] = getattr(args, key.replace(".", "__"))
    ov["task.models"] = args.models
    ov["overwrite"] = args.overwrite
    ov["record_time"] = args.record_time
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", fields=[item])
        ov[key.strip()] = value.strip()
    return ov


def _config(args, kind):
    data = {}
    if args.config is not None:
        try:
            data = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    ov = _overrides(args, kind)
    return resolve_config(data, ov)


def _dispatch(args):
    if args.command == "compare":
        out = args.out
        if out.exists() and any(out.iterdir()) and not args.overwrite:
            raise ConfigError(f"output directory {out} is not empty; pass --overwrite", fields=["out"])
        out.mkdir(parents=True, exist_ok=True)
        table, ranking = compare(args.reports, args.labels)
        (out / "comparison.csv").write_text(rows_to_csv(table))
        (out / "ranking.csv").write_text(rows_to_csv(ranking))
        for r in ranking:
            print(f"{r['rank']}. {r['label']}: best {r['best_metric']:.4f} at epoch {r['best_epoch']}")
        return
    if args.command == "grid-search":
        cfg = _config(args, args.task)
        kwargs = {}
        if args.lrs:
            kwargs["lrs"] = tuple(args.lrs)
        if args.batch_sizes:
            kwargs["batch_sizes"] = tuple(args.batch_sizes)
        out, rows = run_grid_search(cfg, **kwargs)
        print(f"wrote {len(rows)} rows to {out / 'grid.csv'}")
        return
    cfg = _config(args, args.command)
    out, summary = run(cfg)
    if "best_metric" in summary:
        print(f"{summary['architecture']}: best {summary['metric']} {summary['best_metric']:.4f} "
              f"at epoch {summary['best_epoch']} ({summary['param_count']} params) -> {out}")
    else:
        print(f"spectral run -> {out}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except (ConfigError, ParseError) as exc:
        fields = getattr(exc, "fields", None)
        print(f"error: {exc}" + (f" [fields: {', '.join(fields)}]" if fields else ""), file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
