"""Experiment protocols over original vs mapped space, with CSV reports.

Every protocol derives trial t's randomness from ``config.seed + t``
(split, mapping restarts, SVM epoch shuffling), so any single trial is
reproducible in isolation and two runs of the same config produce
byte-identical cells.csv apart from the wall-time columns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .affinity import build_affinity, neighbor_sets
from .classifiers import fit_knn, fit_ldc, fit_linear_svm, fit_qdc, fit_tree, predict
from .config import ExperimentConfig, render_config
from .dataset import LabeledDataset, SplitSpec, load_csv, load_hsb, split_per_class, standardize
from .dr import apply_dr, fit_kpca, fit_lda, fit_mfa, fit_pca
from .errors import DataError
from .mapping import GamModel, fit as fit_mapping, transform_dataset
from .metrics import average_accuracy, cohen_kappa, confusion, overall_accuracy
from .stiefel import Termination

TIME_COLUMNS = ("map_fit_seconds", "clf_fit_seconds", "predict_seconds")
CELL_COLUMNS = (
    "protocol", "space", "method", "classifier", "param_name", "param_value",
    "trial", "oa", "aa", "kappa", *TIME_COLUMNS, "flags",
)


@dataclass(frozen=True)
class ReportCell:
    protocol: str
    space: str  # original | mapped
    method: str = "-"
    classifier: str = "-"
    param_name: str = "-"
    param_value: str = "-"
    trial: int = 0
    oa: float | None = None
    aa: float | None = None
    kappa: float | None = None
    map_fit_seconds: float | None = None
    clf_fit_seconds: float | None = None
    predict_seconds: float | None = None
    flags: str = ""

    def group_key(self):
        return (self.protocol, self.space, self.method, self.classifier,
                self.param_name, self.param_value)


@dataclass
class ExperimentReport:
    protocol: str
    config: ExperimentConfig
    cells: list[ReportCell] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)

    def log(self, message: str) -> None:
        self.log_lines.append(message)

    def aggregate(self) -> list[dict]:
        """Mean and sample std per cell group, skipping errored cells."""
        groups: dict[tuple, list[ReportCell]] = {}
        for cell in self.cells:
            groups.setdefault(cell.group_key(), []).append(cell)
        rows = []
        for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
            members = [c for c in groups[key] if c.oa is not None]
            row = dict(zip(("protocol", "space", "method", "classifier",
                            "param_name", "param_value"), key))
            row["trials"] = len(members)
            for metric in ("oa", "aa", "kappa"):
                vals = [getattr(c, metric) for c in members if getattr(c, metric) is not None]
                row[f"{metric}_mean"] = float(np.mean(vals)) if vals else None
                row[f"{metric}_std"] = (
                    float(np.std(vals, ddof=1)) if len(vals) > 1 else (0.0 if vals else None)
                )
            for metric in TIME_COLUMNS:
                vals = [getattr(c, metric) for c in members if getattr(c, metric) is not None]
                row[f"{metric.removesuffix('_seconds')}_mean_seconds"] = (
                    float(np.mean(vals)) if vals else None
                )
            rows.append(row)
        return rows


@dataclass(frozen=True)
class DimensionSweepRow:
    target_dim: int
    final_cost: float
    iterations: int
    termination: str


@dataclass
class DimensionSweepResult:
    config: ExperimentConfig
    rows: list[DimensionSweepRow]
    log_lines: list[str] = field(default_factory=list)


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if not cfg.dataset_path:
        raise DataError("config has no dataset.path")
    loader = load_hsb if cfg.dataset_format == "hsb" else load_csv
    return loader(cfg.dataset_path)


def _trial_split(ds: LabeledDataset, cfg: ExperimentConfig, trial: int, train_per_class=None):
    k = cfg.train_per_class if train_per_class is None else train_per_class
    train, test = split_per_class(ds, SplitSpec(k, seed=cfg.seed + trial))
    if cfg.standardize:
        train, stats = standardize(train)
        test, _ = standardize(test, stats)
    return train, test


def _fit_classifier(name: str, train: LabeledDataset, cfg: ExperimentConfig, seed: int):
    if name == "svm":
        return fit_linear_svm(train, c_reg=cfg.svm_c, seed=seed)
    if name.endswith("nn"):
        return fit_knn(train, int(name[:-2]))
    if name == "ldc":
        return fit_ldc(train)
    if name == "qdc":
        return fit_qdc(train)
    if name == "tree":
        return fit_tree(train)
    raise DataError(f"unknown classifier {name!r}")


def _evaluate(clf, test: LabeledDataset):
    t0 = time.perf_counter()
    labels = predict(clf, test.features)
    elapsed = time.perf_counter() - t0
    cm = confusion(test.labels, labels, test.class_count)
    return overall_accuracy(cm), average_accuracy(cm), cohen_kappa(cm), elapsed


def _map_flags(model: GamModel) -> str:
    flags = []
    if model.truncated_neighbors:
        flags.append("truncated_neighbors")
    if model.degenerate_graph:
        flags.append("degenerate_graph")
    return ";".join(flags)


def run_classifier_table(cfg: ExperimentConfig, ds: LabeledDataset | None = None) -> ExperimentReport:
    """Every configured classifier on original vs mapped space, per trial."""
    ds = load_dataset(cfg) if ds is None else ds
    cfg = cfg.resolve(ds.dim)
    report = ExperimentReport("table2", cfg)
    report.log(f"dataset: n={ds.dim} p={ds.sample_count} c={ds.class_count}")
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        train, test = _trial_split(ds, cfg, trial)
        t0 = time.perf_counter()
        model = fit_mapping(train, cfg.gam_params(seed))
        map_seconds = time.perf_counter() - t0
        spaces = {
            "original": (train, test, None),
            "mapped": (transform_dataset(model, train), transform_dataset(model, test), map_seconds),
        }
        report.log(f"trial {trial}: mapping cost {model.final_cost!r} fit {map_seconds:.3f}s")
        for clf_name in cfg.classifiers:
            for space, (tr, te, map_time) in spaces.items():
                t0 = time.perf_counter()
                clf = _fit_classifier(clf_name, tr, cfg, seed)
                clf_seconds = time.perf_counter() - t0
                oa, aa, kappa, pred_seconds = _evaluate(clf, te)
                report.cells.append(ReportCell(
                    "table2", space, classifier=clf_name, trial=trial,
                    oa=oa, aa=aa, kappa=kappa,
                    map_fit_seconds=map_time, clf_fit_seconds=clf_seconds,
                    predict_seconds=pred_seconds,
                    flags=_map_flags(model) if space == "mapped" else "",
                ))
    return report


def run_neighbor_sweep(cfg: ExperimentConfig, ds: LabeledDataset | None = None) -> ExperimentReport:
    """SVM accuracy in both spaces while sweeping the neighbor count."""
    ds = load_dataset(cfg) if ds is None else ds
    cfg = cfg.resolve(ds.dim)
    report = ExperimentReport("table1", cfg)
    for n_neighbors in cfg.neighbor_grid:
        sweep_cfg = replace(cfg, neighbors_within=n_neighbors, neighbors_between=n_neighbors)
        for trial in range(cfg.trials):
            seed = cfg.seed + trial
            train, test = _trial_split(ds, cfg, trial)
            t0 = time.perf_counter()
            model = fit_mapping(train, sweep_cfg.gam_params(seed))
            map_seconds = time.perf_counter() - t0
            spaces = {
                "original": (train, test, None),
                "mapped": (transform_dataset(model, train),
                           transform_dataset(model, test), map_seconds),
            }
            for space, (tr, te, map_time) in spaces.items():
                t0 = time.perf_counter()
                clf = fit_linear_svm(tr, c_reg=cfg.svm_c, seed=seed)
                clf_seconds = time.perf_counter() - t0
                oa, aa, kappa, pred_seconds = _evaluate(clf, te)
                report.cells.append(ReportCell(
                    "table1", space, classifier="svm",
                    param_name="neighbors", param_value=str(n_neighbors), trial=trial,
                    oa=oa, aa=aa, kappa=kappa,
                    map_fit_seconds=map_time, clf_fit_seconds=clf_seconds,
                    predict_seconds=pred_seconds,
                    flags=_map_flags(model) if space == "mapped" else "",
                ))
        report.log(f"neighbors={n_neighbors} done")
    return report


def run_dimension_sweep(cfg: ExperimentConfig, ds: LabeledDataset | None = None) -> DimensionSweepResult:
    """Best mapping cost for each target dimension in the grid."""
    ds = load_dataset(cfg) if ds is None else ds
    cfg = cfg.resolve(ds.dim)
    result = DimensionSweepResult(cfg, [])
    train, _ = _trial_split(ds, cfg, trial=0)
    for m in cfg.dimension_grid:
        params = replace(cfg, target_dim=m).gam_params(cfg.seed)
        model = fit_mapping(train, params)
        opt = model.opt_result
        result.rows.append(DimensionSweepRow(
            m, model.final_cost, opt.iterations if opt else 0,
            opt.termination.value if opt else Termination.GRAD_TOL.value,
        ))
        result.log_lines.append(f"m={m} cost={model.final_cost!r}")
    return result


_DR_FITTERS = {
    "pca": lambda tr, d, cfg: fit_pca(tr.features, d),
    "lda": lambda tr, d, cfg: fit_lda(tr.features, tr.labels, d),
    "kpca": lambda tr, d, cfg: fit_kpca(
        tr.features, d, cfg.kpca_gamma if cfg.kpca_gamma is not None else 1.0 / tr.dim
    ),
    "mfa": lambda tr, d, cfg: fit_mfa(tr.features, tr.labels, d, cfg.mfa_k1, cfg.mfa_k2),
}


def _dr_dim_cap(method: str, train: LabeledDataset) -> int:
    if method == "lda":
        return train.class_count - 1
    if method == "kpca":
        return train.sample_count
    return train.dim


def run_dr_sweep(cfg: ExperimentConfig, ds: LabeledDataset | None = None) -> ExperimentReport:
    """DR method x dimension x space, classified with the linear SVM.

    Dimensions beyond a method's rank bound (LDA: c-1, KPCA: train size,
    PCA/MFA: input dim) are clamped and flagged rather than skipped.
    """
    ds = load_dataset(cfg) if ds is None else ds
    cfg = cfg.resolve(ds.dim)
    report = ExperimentReport("dr-sweep", cfg)
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        train, test = _trial_split(ds, cfg, trial)
        t0 = time.perf_counter()
        model = fit_mapping(train, cfg.gam_params(seed))
        map_seconds = time.perf_counter() - t0
        spaces = {
            "original": (train, test, None),
            "mapped": (transform_dataset(model, train), transform_dataset(model, test), map_seconds),
        }
        for method in cfg.dr_methods:
            for requested in cfg.dr_dims:
                for space, (tr, te, map_time) in spaces.items():
                    cap = _dr_dim_cap(method, tr)
                    d = min(requested, cap)
                    flags = [] if d == requested else [f"clamped:{method}:{d}"]
                    if space == "mapped":
                        flags = [_map_flags(model)] + flags if _map_flags(model) else flags
                    t0 = time.perf_counter()
                    dr_model = _DR_FITTERS[method](tr, d, cfg)
                    tr_proj = LabeledDataset(apply_dr(dr_model, tr.features), tr.labels, tr.class_count)
                    te_proj = LabeledDataset(apply_dr(dr_model, te.features), te.labels, te.class_count)
                    clf = fit_linear_svm(tr_proj, c_reg=cfg.svm_c, seed=seed)
                    clf_seconds = time.perf_counter() - t0
                    oa, aa, kappa, pred_seconds = _evaluate(clf, te_proj)
                    report.cells.append(ReportCell(
                        "dr-sweep", space, method=method, classifier="svm",
                        param_name="dim", param_value=str(requested), trial=trial,
                        oa=oa, aa=aa, kappa=kappa,
                        map_fit_seconds=map_time, clf_fit_seconds=clf_seconds,
                        predict_seconds=pred_seconds, flags=";".join(f for f in flags if f),
                    ))
        report.log(f"trial {trial} done")
    return report


def run_train_size_sweep(cfg: ExperimentConfig, ds: LabeledDataset | None = None) -> ExperimentReport:
    """SVM in both spaces for each training-set size; errors stay per-row."""
    ds = load_dataset(cfg) if ds is None else ds
    cfg = cfg.resolve(ds.dim)
    report = ExperimentReport("train-sweep", cfg)
    for k in cfg.train_size_grid:
        for trial in range(cfg.trials):
            seed = cfg.seed + trial
            try:
                train, test = _trial_split(ds, cfg, trial, train_per_class=k)
                t0 = time.perf_counter()
                model = fit_mapping(train, cfg.gam_params(seed))
                map_seconds = time.perf_counter() - t0
            except DataError as exc:
                report.cells.append(ReportCell(
                    "train-sweep", "-", classifier="svm",
                    param_name="train_per_class", param_value=str(k), trial=trial,
                    flags=f"error:{exc}",
                ))
                report.log(f"train_per_class={k} trial={trial} error: {exc}")
                continue
            spaces = {
                "original": (train, test, None),
                "mapped": (transform_dataset(model, train),
                           transform_dataset(model, test), map_seconds),
            }
            for space, (tr, te, map_time) in spaces.items():
                t0 = time.perf_counter()
                clf = fit_linear_svm(tr, c_reg=cfg.svm_c, seed=seed)
                clf_seconds = time.perf_counter() - t0
                oa, aa, kappa, pred_seconds = _evaluate(clf, te)
                report.cells.append(ReportCell(
                    "train-sweep", space, classifier="svm",
                    param_name="train_per_class", param_value=str(k), trial=trial,
                    oa=oa, aa=aa, kappa=kappa,
                    map_fit_seconds=map_time, clf_fit_seconds=clf_seconds,
                    predict_seconds=pred_seconds,
                    flags=_map_flags(model) if space == "mapped" else "",
                ))
    return report


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write cells.csv, summary.csv, config.echo, run.log (and figures)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    cells_path = out / "cells.csv"
    with open(cells_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CELL_COLUMNS) + "\n")
        for cell in report.cells:
            fh.write(",".join(_fmt(getattr(cell, col)) for col in CELL_COLUMNS) + "\n")
    paths["cells"] = cells_path

    summary_path = out / "summary.csv"
    rows = report.aggregate()
    header = (
        "protocol,space,method,classifier,param_name,param_value,trials,"
        "oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std,"
        "map_fit_mean_seconds,clf_fit_mean_seconds,predict_mean_seconds"
    )
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in header.split(",")) + "\n")
    paths["summary"] = summary_path

    echo_path = out / "config.echo"
    echo_path.write_text(render_config(report.config), encoding="utf-8")
    paths["config"] = echo_path

    log_path = out / "run.log"
    log_path.write_text(
        "\n".join([f"protocol: {report.protocol}", *report.log_lines]) + "\n", encoding="utf-8"
    )
    paths["log"] = log_path

    if report.config.plots and report.cells:
        from . import plots

        paths.update(plots.render_report(report, out))
    return paths


def emit_dimension_sweep(result: DimensionSweepResult, out_dir) -> dict[str, Path]:
    """Write cost_by_dimension.csv plus the usual config echo and log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    csv_path = out / "cost_by_dimension.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("target_dim,final_cost,iterations,termination\n")
        for row in result.rows:
            fh.write(f"{row.target_dim},{row.final_cost!r},{row.iterations},{row.termination}\n")
    paths["costs"] = csv_path
    echo_path = out / "config.echo"
    echo_path.write_text(render_config(result.config), encoding="utf-8")
    paths["config"] = echo_path
    log_path = out / "run.log"
    log_path.write_text("\n".join(["protocol: fig2", *result.log_lines]) + "\n", encoding="utf-8")
    paths["log"] = log_path
    if result.config.plots and result.rows:
        from . import plots

        paths.update(plots.render_dimension_sweep(result, out))
    return paths
