"""Figure rendering for experiment reports.

Each protocol gets one PNG next to its CSV output: accuracy bars for the
classifier table, accuracy-vs-parameter curves for the sweeps, and the
cost-vs-dimension curve. Original space is drawn dotted, mapped space
solid, mirroring the usual convention for before/after comparisons.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SPACE_STYLE = {"original": {"linestyle": ":"}, "mapped": {"linestyle": "-"}}
DPI = 150


def _grouped(report, key_fields):
    """summary rows -> {key_fields tuple: (sorted param values, means, stds)}"""
    rows = [r for r in report.aggregate() if r["oa_mean"] is not None]
    curves = {}
    for row in rows:
        key = tuple(row[f] for f in key_fields)
        curves.setdefault(key, []).append(
            (float(row["param_value"]) if row["param_value"] != "-" else 0.0,
             row["oa_mean"], row["oa_std"])
        )
    for key in curves:
        curves[key] = sorted(curves[key])
    return curves


def _save(fig, out_dir: Path, name: str) -> dict[str, Path]:
    path = Path(out_dir) / name
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return {name.removesuffix(".png"): path}


def _classifier_bars(report, out_dir):
    rows = [r for r in report.aggregate() if r["oa_mean"] is not None]
    classifiers = list(dict.fromkeys(r["classifier"] for r in rows))
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    for offset, space in ((-width / 2, "original"), (width / 2, "mapped")):
        means = [next(r["oa_mean"] for r in rows
                      if r["classifier"] == c and r["space"] == space) for c in classifiers]
        stds = [next(r["oa_std"] for r in rows
                     if r["classifier"] == c and r["space"] == space) for c in classifiers]
        ax.bar([i + offset for i in range(len(classifiers))], means, width,
               yerr=stds, capsize=3, label=f"{space} space")
    ax.set_xticks(range(len(classifiers)), classifiers)
    ax.set_ylabel("overall accuracy")
    ax.set_title("Classifier comparison")
    ax.legend()
    return _save(fig, out_dir, "table2.png")


def _param_curves(report, out_dir, name, xlabel, split_by_method=False):
    key_fields = ("method", "space") if split_by_method else ("space",)
    curves = _grouped(report, key_fields)
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, points in sorted(curves.items()):
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        errs = [p[2] for p in points]
        space = key[-1]
        label = " ".join(str(k) for k in key)
        ax.errorbar(xs, ys, yerr=errs, marker="o", markersize=3,
                    label=label, **SPACE_STYLE[space])
    ax.set_xlabel(xlabel)
    ax.set_ylabel("overall accuracy")
    ax.set_title(f"{report.protocol}: accuracy vs {xlabel}")
    ax.legend(fontsize=8)
    return _save(fig, out_dir, name)


def render_report(report, out_dir) -> dict[str, Path]:
    if report.protocol == "table2":
        return _classifier_bars(report, out_dir)
    if report.protocol == "table1":
        return _param_curves(report, out_dir, "table1.png", "neighbors")
    if report.protocol == "dr-sweep":
        return _param_curves(report, out_dir, "dr_sweep.png", "reduced dimension",
                             split_by_method=True)
    if report.protocol == "train-sweep":
        return _param_curves(report, out_dir, "train_sweep.png", "train samples per class")
    return {}


def render_dimension_sweep(result, out_dir) -> dict[str, Path]:
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = [row.target_dim for row in result.rows]
    ys = [row.final_cost for row in result.rows]
    ax.plot(xs, ys, marker="o", markersize=3)
    best = min(result.rows, key=lambda r: r.final_cost)
    ax.axvline(best.target_dim, color="gray", linestyle=":",
               label=f"minimum at m={best.target_dim}")
    ax.set_xlabel("mapped-space dimension")
    ax.set_ylabel("final cost")
    ax.set_title("Mapping cost vs target dimension")
    ax.legend()
    return _save(fig, out_dir, "fig2.png")
