"""Command-line interface.

Subcommands:
    gam fit            learn a projection from a labeled dataset
    gam transform      apply a saved projection to a dataset
    experiment table2  classifier comparison, original vs mapped space
    experiment table1  neighbor-count sweep (SVM accuracy)
    experiment fig2    mapping cost vs target dimension
    experiment dr-sweep      DR method x dimension sweep
    experiment train-sweep   train-set size sweep with timings
    dataset convert    CSV <-> HSB container conversion

Global flags (--config, --seed, --out, --verbose) may be given before or
after the subcommand. Exit codes: 0 ok, 1 config error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .affinity import build_affinity, neighbor_sets, save_matrix_market
from .config import ExperimentConfig, load_config, render_config
from .dataset import load_csv, load_hsb, save_csv, save_hsb
from .errors import ConfigError, DataError, GamapError, NumericalError
from .experiments import (
    emit_dimension_sweep,
    emit_report,
    load_dataset,
    run_classifier_table,
    run_dimension_sweep,
    run_dr_sweep,
    run_neighbor_sweep,
    run_train_size_sweep,
)
from .mapping import fit, load_model, save_model, transform


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _global_flags(parser):
    parser.add_argument("--config", default=argparse.SUPPRESS, help="experiment config file")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    parser.add_argument("--out", default=argparse.SUPPRESS, help="override the output directory")
    parser.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")


def build_parser() -> _Parser:
    shared = _Parser(add_help=False)
    _global_flags(shared)

    root = _Parser(prog="gamap", description=__doc__,
                   formatter_class=argparse.RawDescriptionHelpFormatter)
    _global_flags(root)
    root.set_defaults(config=None, seed=None, out=None, verbose=False)
    groups = root.add_subparsers(dest="group", required=True)

    gam = groups.add_parser("gam", help="fit or apply the mapping").add_subparsers(
        dest="command", required=True)
    p_fit = gam.add_parser("fit", parents=[shared], help="learn a projection")
    p_fit.add_argument("--model-out", default=None, help="model file (default <out>/model.gam)")
    p_fit.add_argument("--affinity-out", default=None,
                       help="also dump the training affinity matrix (Matrix Market)")
    p_fit.add_argument("--iteration-log", default=None,
                       help="write iter,cost,grad_norm,step lines here")
    p_tr = gam.add_parser("transform", parents=[shared], help="project a dataset")
    p_tr.add_argument("--model", required=True)
    p_tr.add_argument("--data", required=True)
    p_tr.add_argument("--format", choices=("csv", "hsb"), default=None)
    p_tr.add_argument("--out-file", default=None, help="output CSV (default <out>/transformed.csv)")

    exp = groups.add_parser("experiment", help="run a replication protocol").add_subparsers(
        dest="command", required=True)
    for name, description in (
        ("table2", "classifier comparison in both spaces"),
        ("table1", "neighbor sweep"),
        ("fig2", "cost vs mapped dimension"),
        ("dr-sweep", "DR dimension sweep"),
        ("train-sweep", "train size sweep"),
    ):
        exp.add_parser(name, parents=[shared], help=description)

    data = groups.add_parser("dataset", help="dataset utilities").add_subparsers(
        dest="command", required=True)
    p_conv = data.add_parser("convert", parents=[shared], help="convert CSV <-> HSB")
    p_conv.add_argument("--input", required=True)
    p_conv.add_argument("--output", required=True)
    p_conv.add_argument("--input-format", choices=("csv", "hsb"), default=None)
    p_conv.add_argument("--output-format", choices=("csv", "hsb"), default=None)
    return root


def _require_config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("this command needs --config <path>")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _say(args, message):
    if args.verbose:
        print(message, file=sys.stderr)


def _format_of(path: str, override: str | None) -> str:
    if override:
        return override
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".hsb":
        return "hsb"
    raise ConfigError(f"cannot infer format of {path}; pass an explicit format flag")


def _load_by_format(path: str, fmt: str):
    return load_csv(path) if fmt == "csv" else load_hsb(path)


def _cmd_gam_fit(args) -> int:
    cfg = _require_config(args)
    ds = load_dataset(cfg)
    cfg = cfg.resolve(ds.dim)
    _say(args, f"loaded {cfg.dataset_path}: n={ds.dim} p={ds.sample_count} c={ds.class_count}")
    log_lines: list[str] = []
    log_fn = log_lines.append if (args.iteration_log or args.verbose) else None
    model = fit(ds, cfg.gam_params(cfg.seed), log_fn=log_fn)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.model_out) if args.model_out else out_dir / "model.gam"
    save_model(model, model_path)
    if args.iteration_log:
        Path(args.iteration_log).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    if args.verbose and log_lines:
        print("\n".join(log_lines[-5:]), file=sys.stderr)
    if args.affinity_out:
        sets = neighbor_sets(ds, cfg.neighbors_within, cfg.neighbors_between)
        save_matrix_market(build_affinity(sets, ds.labels), args.affinity_out)
    print(f"model: {model_path} (n={model.input_dim} m={model.output_dim} "
          f"cost={model.final_cost!r})")
    return 0


def _cmd_gam_transform(args) -> int:
    model = load_model(args.model)
    ds = _load_by_format(args.data, _format_of(args.data, args.format))
    projected = transform(model, ds.features)
    out_file = Path(args.out_file) if args.out_file else Path(args.out or ".") / "transformed.csv"
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        for j in range(projected.shape[1]):
            values = ",".join(repr(float(v)) for v in projected[:, j])
            fh.write(f"{values},{int(ds.labels[j])}\n")
    print(f"transformed: {out_file} ({projected.shape[0]} dims x {projected.shape[1]} samples)")
    return 0


_RUNNERS = {
    "table2": run_classifier_table,
    "table1": run_neighbor_sweep,
    "dr-sweep": run_dr_sweep,
    "train-sweep": run_train_size_sweep,
}


def _cmd_experiment(args) -> int:
    cfg = _require_config(args)
    _say(args, f"running {args.command} with config {args.config}")
    if args.command == "fig2":
        result = run_dimension_sweep(cfg)
        paths = emit_dimension_sweep(result, cfg.output_dir)
    else:
        report = _RUNNERS[args.command](cfg)
        paths = emit_report(report, cfg.output_dir)
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    return 0


def _cmd_dataset_convert(args) -> int:
    in_fmt = _format_of(args.input, args.input_format)
    out_fmt = _format_of(args.output, args.output_format)
    ds = _load_by_format(args.input, in_fmt)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    if out_fmt == "csv":
        save_csv(ds, args.output)
    else:
        save_hsb(ds, args.output)
    print(f"converted {args.input} ({in_fmt}) -> {args.output} ({out_fmt}), "
          f"{ds.sample_count} samples")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.group == "gam" and args.command == "fit":
            return _cmd_gam_fit(args)
        if args.group == "gam" and args.command == "transform":
            return _cmd_gam_transform(args)
        if args.group == "experiment":
            return _cmd_experiment(args)
        if args.group == "dataset" and args.command == "convert":
            return _cmd_dataset_convert(args)
        raise ConfigError(f"unknown command {args.group} {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except GamapError as exc:  # pragma: no cover - catch-all for new subtypes
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
