"""Render learning-curve and summary figures from emitted CSVs.

The CSVs remain the contract; these figures are the human-readable report,
written as PNG files alongside the delimited output they were read from.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_compare",
    "plot_grid_summary",
    "plot_run_dir",
    "plot_trace",
    "read_trace",
]


def read_trace(path: str | Path) -> dict[str, np.ndarray]:
    """Trace CSV as a column-name -> array mapping."""
    table = np.genfromtxt(path, delimiter=",", names=True)
    if table.ndim == 0:  # single-epoch runs come back as a 0-d record
        table = table.reshape(1)
    return {name: np.atleast_1d(table[name]) for name in table.dtype.names}


def plot_trace(csv_path: str | Path, out_path: str | Path | None = None) -> Path:
    """Two panels per run: loss curves; log Bayes factor with sparsity overlaid."""
    csv_path = Path(csv_path)
    t = read_trace(csv_path)
    fig, (ax_loss, ax_bf) = plt.subplots(1, 2, figsize=(11, 4))

    ax_loss.plot(t["epoch"], t["train_loss"], label="train loss")
    ax_loss.plot(t["epoch"], t["val_loss"], label="val loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean cross-entropy")
    ax_loss.legend()

    ax_bf.plot(t["epoch"], t["log_bf"], color="tab:blue", label="log Bayes factor")
    ax_bf.set_xlabel("epoch")
    ax_bf.set_ylabel("log Bayes factor", color="tab:blue")
    ax_sp = ax_bf.twinx()
    ax_sp.plot(t["epoch"], t["sparsity"], color="tab:red", label="sparsity")
    ax_sp.set_ylabel("sparsity", color="tab:red")
    ax_sp.set_ylim(-0.02, 1.02)

    fig.suptitle(csv_path.parent.name)
    fig.tight_layout()
    out_path = Path(out_path) if out_path else csv_path.with_suffix(".png")
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def _seed_traces(run_dir: Path) -> list[Path]:
    return sorted(run_dir.glob("seed*/trace.csv"))


def plot_run_dir(run_dir: str | Path) -> list[Path]:
    """Per-seed trace figures plus a mean validation-loss overlay for one run."""
    run_dir = Path(run_dir)
    traces = _seed_traces(run_dir)
    written = [plot_trace(p) for p in traces]
    if len(traces) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        for p in traces:
            t = read_trace(p)
            ax.plot(t["epoch"], t["val_loss"], alpha=0.6, label=p.parent.name)
        ax.set_xlabel("epoch")
        ax.set_ylabel("validation loss")
        ax.legend(fontsize=8)
        ax.set_title(run_dir.name)
        fig.tight_layout()
        out = run_dir / "val_loss.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        written.append(out)
    return written


def plot_compare(run_dirs: list[str | Path], out_path: str | Path, field: str = "val_loss") -> Path:
    """Overlay the seed-averaged trace field of several runs on one axes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        traces = [read_trace(p) for p in _seed_traces(run_dir)]
        if not traces:
            continue
        epochs = min(len(t["epoch"]) for t in traces)
        mean = np.mean([t[field][:epochs] for t in traces], axis=0)
        ax.plot(traces[0]["epoch"][:epochs], mean, label=run_dir.name)
    ax.set_xlabel("epoch")
    ax.set_ylabel(field.replace("_", " "))
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_grid_summary(summary_csv: str | Path, out_path: str | Path | None = None) -> Path:
    """Accuracy against sparsity per method, one panel per (dataset, model)."""
    summary_csv = Path(summary_csv)
    rows = np.genfromtxt(
        summary_csv, delimiter=",", names=True, dtype=None, encoding="utf-8"
    ).reshape(-1)
    cells = sorted({(str(r["dataset"]), str(r["model"])) for r in rows})
    fig, axes = plt.subplots(1, max(len(cells), 1), figsize=(5 * max(len(cells), 1), 4), squeeze=False)
    methods = ("random", "bayes_random", "magnitude", "bayes_magnitude")
    for ax, (dataset, model) in zip(axes[0], cells):
        sub = [r for r in rows if str(r["dataset"]) == dataset and str(r["model"]) == model]
        sub = [r for r in sub if not np.isnan(_cell_float(r["sparsity"]))]
        sub.sort(key=lambda r: _cell_float(r["sparsity"]))
        levels = [_cell_float(r["sparsity"]) for r in sub]
        for method in methods:
            acc = [_cell_float(r[method]) for r in sub]
            if any(not np.isnan(a) for a in acc):
                ax.plot(levels, acc, marker="o", label=method.replace("_", " "))
        base = next((_cell_float(r["unpruned"]) for r in sub), float("nan"))
        if not np.isnan(base):
            ax.axhline(base, linestyle="--", color="gray", label="unpruned")
        ax.set_title(f"{dataset} {model}")
        ax.set_xlabel("target sparsity")
        ax.set_ylabel("test accuracy")
        ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path) if out_path else summary_csv.with_suffix(".png")
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def _cell_float(value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return float("nan")
