"""Training loop with the epoch-level Bayes gate, grid runner, and trace emission."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bayes import AFTER_PRUNE, BEFORE_PRUNE, PriorSpec, bayes_factor, gate, posterior_record
from .data import BatchIterator, LabeledDataset, load_dataset
from .models import ModelSpec, build_model
from .nn import Network, backward
from .optim import make_optimizer
from .pruning import PruneState, sparsity

__all__ = [
    "DivergenceError",
    "ExperimentConfig",
    "MetricsRow",
    "SummaryRow",
    "TRACE_HEADER",
    "emit_traces",
    "evaluate",
    "make_grid_configs",
    "run",
    "run_grid",
    "train_epoch",
    "write_grid_summary",
]

TRACE_HEADER = "epoch,train_loss,val_loss,val_accuracy,sparsity,log_bf,pruned,wall_time_s"

SPARSITY_LEVELS = (0.25, 0.50, 0.75, 0.90, 0.99)


class DivergenceError(RuntimeError):
    """Raised when a training batch produces a non-finite loss."""

    def __init__(self, loss: float, batch_index: int):
        super().__init__(f"non-finite loss {loss} at batch {batch_index}")
        self.loss = loss
        self.batch_index = batch_index


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment (all repeats included)."""

    dataset: str = "mnist"
    model: str = "fcn"
    method: str = "none"  # none | random | magnitude
    bayes: bool = True  # False: prune unconditionally every epoch
    sparsity: float = 0.75
    epochs: int = 25
    batch_size: int = 64
    learning_rate: float = 0.001
    optimizer: str = "adam"
    prior_mu: float = 0.0
    prior_sigma: float = 1.0
    beta: float = 1.0
    persistent_mask: bool = False
    seed: int = 0
    repeats: int = 5
    eval_slice: int = 10000  # likelihood slice size; <= 0 means the full train set
    normalize: str = "standard"
    hidden_sizes: tuple[int, int] = (256, 128)
    fc_width: int = 128
    data_dir: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.method not in ("none", "random", "magnitude"):
            raise ValueError(f"unknown pruning method {self.method!r}")
        if not 0.0 <= self.sparsity < 1.0:
            raise ValueError(f"target sparsity must lie in [0, 1), got {self.sparsity}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        self.hidden_sizes = tuple(self.hidden_sizes)

    @property
    def slug(self) -> str:
        if self.method == "none":
            return f"{self.dataset}_{self.model}_unpruned"
        prefix = "bayes_" if self.bayes else ""
        return f"{self.dataset}_{self.model}_{prefix}{self.method}_s{self.sparsity:g}"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**{**d, "hidden_sizes": tuple(d["hidden_sizes"])})


@dataclass
class MetricsRow:
    """One epoch of one run. A divergence row carries NaN posteriors."""

    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    global_sparsity: float
    per_tensor_sparsity: dict[str, float]
    log_bf: float
    log_posterior_before: float
    log_posterior_after: float
    pruned_this_epoch: bool
    wall_time_s: float


@dataclass
class SummaryRow:
    """Final-epoch test accuracy aggregated over the repeats of one config."""

    dataset: str
    model: str
    method: str
    bayes: bool
    sparsity: float
    mean_accuracy: float
    std_accuracy: float
    per_seed_accuracy: list[float] = field(default_factory=list)


def evaluate(network: Network, images: np.ndarray, labels: np.ndarray, batch_size: int = 512):
    """Mean cross-entropy and top-1 accuracy over a split."""
    n = len(images)
    total_nll = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        logits = network.forward(images[start : start + batch_size])
        batch_labels = labels[start : start + batch_size]
        z = logits - logits.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        total_nll -= float(log_probs[np.arange(len(batch_labels)), batch_labels].sum())
        correct += int((logits.argmax(axis=1) == batch_labels).sum())
    return total_nll / n, correct / n


def train_epoch(
    network: Network,
    optimizer,
    iterator: BatchIterator,
    prune_state: PruneState | None = None,
) -> float:
    """One full pass: forward, loss, backward, optimizer step per batch.

    Masks are re-zeroed after each step only in persistent-mask mode. Returns
    the example-weighted mean training loss.
    """
    masks = prune_state.masks if (prune_state is not None and prune_state.persistent) else None
    total = 0.0
    count = 0
    for i, (x, y) in enumerate(iterator):
        network.forward(x)
        bg = backward(network, x, y)
        if not math.isfinite(bg.loss):
            raise DivergenceError(bg.loss, i)
        optimizer.step(network.parameters(), bg.grads, masks)
        total += bg.loss * len(y)
        count += len(y)
    return total / count


def _child_seeds(seed: int, n: int = 4) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _run_single(
    config: ExperimentConfig, seed: int, train_ds: LabeledDataset, test_ds: LabeledDataset
) -> list[MetricsRow]:
    """Train one seed for config.epochs epochs, producing one MetricsRow per epoch."""
    s_init, s_batch, s_slice, s_prune = _child_seeds(seed)
    spec = ModelSpec(
        kind=config.model,
        input_shape=tuple(train_ds.images.shape[1:]),
        classes=10,
        hidden_sizes=config.hidden_sizes,
        fc_width=config.fc_width,
    )
    network = build_model(spec, np.random.default_rng(s_init))
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    prior = PriorSpec(config.prior_mu, config.prior_sigma)
    prune_state = None
    if config.method != "none":
        prune_state = PruneState(
            network, config.method, config.sparsity, persistent=config.persistent_mask, seed=s_prune
        )

    n = len(train_ds)
    if 0 < config.eval_slice < n:
        idx = np.sort(
            np.random.default_rng(s_slice).choice(n, size=config.eval_slice, replace=False)
        )
        eval_x, eval_y = train_ds.images[idx], train_ds.labels[idx]
    else:
        eval_x, eval_y = train_ds.images, train_ds.labels

    iterator = BatchIterator(train_ds.images, train_ds.labels, config.batch_size, seed=s_batch)

    rows: list[MetricsRow] = []
    prev_bf = None  # gate state: factor from the most recent pruning epoch
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        try:
            train_loss = train_epoch(network, optimizer, iterator, prune_state)
        except DivergenceError as err:
            with np.errstate(all="ignore"):  # weights are non-finite by now
                val_loss, val_acc = evaluate(network, test_ds.images, test_ds.labels)
            per_tensor, global_sparsity = sparsity(network)
            rows.append(
                MetricsRow(
                    epoch=epoch,
                    train_loss=err.loss,
                    val_loss=val_loss,
                    val_accuracy=val_acc,
                    global_sparsity=global_sparsity,
                    per_tensor_sparsity=per_tensor,
                    log_bf=float("nan"),
                    log_posterior_before=float("nan"),
                    log_posterior_after=float("nan"),
                    pruned_this_epoch=False,
                    wall_time_s=time.perf_counter() - t0,
                )
            )
            break

        before = posterior_record(network, eval_x, eval_y, prior, epoch, BEFORE_PRUNE)
        after = before
        log_bf = 0.0
        pruned = False
        if prune_state is not None and (not config.bayes or gate(prev_bf, config.beta)):
            prune_state.prune(network)
            after = posterior_record(network, eval_x, eval_y, prior, epoch, AFTER_PRUNE)
            factor = bayes_factor(before, after)
            prev_bf = factor
            log_bf = factor.log_bf
            pruned = True

        val_loss, val_acc = evaluate(network, test_ds.images, test_ds.labels)
        per_tensor, global_sparsity = sparsity(network)
        rows.append(
            MetricsRow(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                val_accuracy=val_acc,
                global_sparsity=global_sparsity,
                per_tensor_sparsity=per_tensor,
                log_bf=log_bf,
                log_posterior_before=before.log_posterior,
                log_posterior_after=after.log_posterior,
                pruned_this_epoch=pruned,
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return rows


# one-deep cache: grids iterate configs grouped by dataset
_DATASET_CACHE: dict = {"key": None, "value": None}


def _load_cached(config: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    key = (config.dataset, str(config.data_dir), config.normalize)
    if _DATASET_CACHE["key"] != key:
        _DATASET_CACHE["value"] = load_dataset(config.dataset, config.data_dir, config.normalize)
        _DATASET_CACHE["key"] = key
    return _DATASET_CACHE["value"]


def _fmt(v) -> str:
    return f"{v:.6g}"


def emit_traces(
    rows: list[MetricsRow],
    out_dir: str | Path,
    config: ExperimentConfig | None = None,
    seed: int | None = None,
) -> list[Path]:
    """Write one run's trace CSV (and, when config is given, its JSON manifest)."""
    if not rows:
        raise ValueError("emit_traces: no rows to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "trace.csv"
    lines = [TRACE_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                (
                    str(r.epoch),
                    _fmt(r.train_loss),
                    _fmt(r.val_loss),
                    _fmt(r.val_accuracy),
                    _fmt(r.global_sparsity),
                    _fmt(r.log_bf),
                    "1" if r.pruned_this_epoch else "0",
                    _fmt(r.wall_time_s),
                )
            )
        )
    csv_path.write_text("\n".join(lines) + "\n")
    written = [csv_path]
    if config is not None:
        manifest_path = out_dir / "manifest.json"
        manifest = {"config": config.to_dict(), "effective_seed": seed}
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        written.append(manifest_path)
    return written


def run(
    config: ExperimentConfig,
    datasets: tuple[LabeledDataset, LabeledDataset] | None = None,
) -> tuple[list[list[MetricsRow]], SummaryRow]:
    """Execute all repeats of one config; write traces when config.out is set.

    Repeat i runs with seed config.seed + i. The summary aggregates the
    final-epoch test accuracy over repeats.
    """
    if datasets is None:
        datasets = _load_cached(config)
    train_ds, test_ds = datasets
    per_seed_rows: list[list[MetricsRow]] = []
    accs: list[float] = []
    out_root = Path(config.out) / config.slug if config.out else None
    for i in range(config.repeats):
        seed = config.seed + i
        rows = _run_single(config, seed, train_ds, test_ds)
        per_seed_rows.append(rows)
        accs.append(rows[-1].val_accuracy)
        if out_root is not None:
            emit_traces(rows, out_root / f"seed{seed}", config, seed)
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    summary = SummaryRow(
        dataset=config.dataset,
        model=config.model,
        method=config.method,
        bayes=config.bayes,
        sparsity=config.sparsity,
        mean_accuracy=float(np.mean(accs)),
        std_accuracy=std,
        per_seed_accuracy=accs,
    )
    if out_root is not None:
        header = "dataset,model,method,bayes,sparsity,mean_accuracy,std_accuracy,per_seed"
        line = ",".join(
            (
                summary.dataset,
                summary.model,
                summary.method,
                "1" if summary.bayes else "0",
                _fmt(summary.sparsity),
                _fmt(summary.mean_accuracy),
                _fmt(summary.std_accuracy),
                ";".join(_fmt(a) for a in accs),
            )
        )
        (out_root / "summary.csv").write_text(f"{header}\n{line}\n")
    return per_seed_rows, summary


def make_grid_configs(
    base: ExperimentConfig,
    datasets: list[str],
    models: list[str],
    sparsities: tuple[float, ...] = SPARSITY_LEVELS,
    methods: tuple[str, ...] = ("random", "magnitude"),
    include_baseline: bool = True,
) -> list[ExperimentConfig]:
    """Cross product of the grid axes, plus one unpruned baseline per cell."""
    configs = []
    for ds in datasets:
        for model in models:
            if include_baseline:
                configs.append(
                    dataclasses.replace(
                        base, dataset=ds, model=model, method="none", bayes=False, sparsity=0.0
                    )
                )
            for r in sparsities:
                for method in methods:
                    for bayes in (False, True):
                        configs.append(
                            dataclasses.replace(
                                base, dataset=ds, model=model, method=method, bayes=bayes, sparsity=r
                            )
                        )
    return configs


GRID_HEADER = "dataset,model,unpruned,sparsity,random,bayes_random,magnitude,bayes_magnitude"

_COLUMN_BY_METHOD = {
    ("random", False): "random",
    ("random", True): "bayes_random",
    ("magnitude", False): "magnitude",
    ("magnitude", True): "bayes_magnitude",
}


def write_grid_summary(
    summaries: list[SummaryRow],
    path: str | Path,
    failures: list[tuple[ExperimentConfig, str]] = (),
) -> Path:
    """Pivot per-config summaries into the accuracy-by-sparsity grid table."""
    unpruned = {}
    cells = {}
    sparsities = {}
    for s in summaries:
        if s.method == "none":
            unpruned[(s.dataset, s.model)] = s.mean_accuracy
        else:
            cells[(s.dataset, s.model, s.sparsity, _COLUMN_BY_METHOD[(s.method, s.bayes)])] = _fmt(
                s.mean_accuracy
            )
            sparsities.setdefault((s.dataset, s.model), set()).add(s.sparsity)
    for cfg, _ in failures:
        if cfg.method == "none":
            unpruned.setdefault((cfg.dataset, cfg.model), "error")
        else:
            cells[(cfg.dataset, cfg.model, cfg.sparsity, _COLUMN_BY_METHOD[(cfg.method, cfg.bayes)])] = "error"
            sparsities.setdefault((cfg.dataset, cfg.model), set()).add(cfg.sparsity)
    lines = [GRID_HEADER]
    for dataset, model in sorted(set(sparsities) | set(unpruned)):
        base = unpruned.get((dataset, model), "")
        base_str = base if isinstance(base, str) else _fmt(base)
        levels = sorted(sparsities.get((dataset, model), ()))
        if not levels:
            lines.append(f"{dataset},{model},{base_str},,,,,")
        for r in levels:
            cols = [
                cells.get((dataset, model, r, col), "")
                for col in ("random", "bayes_random", "magnitude", "bayes_magnitude")
            ]
            lines.append(f"{dataset},{model},{base_str},{_fmt(r)}," + ",".join(cols))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def run_grid(
    configs: list[ExperimentConfig],
    out_dir: str | Path | None = None,
    datasets: tuple[LabeledDataset, LabeledDataset] | None = None,
    jobs: int = 1,
) -> tuple[list[SummaryRow], list[tuple[ExperimentConfig, str]]]:
    """Run every config, tolerating per-cell failures; write the pivot summary.

    jobs > 1 runs configs in separate processes (each loads its own data).
    """
    summaries: list[SummaryRow] = []
    failures: list[tuple[ExperimentConfig, str]] = []
    if out_dir is not None:
        configs = [dataclasses.replace(c, out=str(out_dir)) for c in configs]
    if jobs > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_grid_worker, cfg): cfg for cfg in configs}
            for future in concurrent.futures.as_completed(futures):
                cfg = futures[future]
                try:
                    summaries.append(future.result())
                except Exception as err:  # per-cell isolation
                    failures.append((cfg, f"{type(err).__name__}: {err}"))
    else:
        for cfg in configs:
            try:
                summaries.append(run(cfg, datasets=datasets)[1])
            except Exception as err:
                failures.append((cfg, f"{type(err).__name__}: {err}"))
    summaries.sort(key=lambda s: (s.dataset, s.model, s.sparsity, s.method, s.bayes))
    if out_dir is not None:
        write_grid_summary(summaries, Path(out_dir) / "grid_summary.csv", failures)
        _write_long_summary(summaries, Path(out_dir) / "grid_runs.csv")
        if failures:
            lines = [f"{cfg.slug}: {msg}" for cfg, msg in failures]
            (Path(out_dir) / "failures.txt").write_text("\n".join(lines) + "\n")
    return summaries, failures


def _grid_worker(config: ExperimentConfig) -> SummaryRow:
    return run(config)[1]


def _write_long_summary(summaries: list[SummaryRow], path: Path) -> None:
    header = "dataset,model,method,bayes,sparsity,mean_accuracy,std_accuracy,per_seed"
    lines = [header]
    for s in summaries:
        lines.append(
            ",".join(
                (
                    s.dataset,
                    s.model,
                    s.method,
                    "1" if s.bayes else "0",
                    _fmt(s.sparsity),
                    _fmt(s.mean_accuracy),
                    _fmt(s.std_accuracy),
                    ";".join(_fmt(a) for a in s.per_seed_accuracy),
                )
            )
        )
    path.write_text("\n".join(lines) + "\n")
