"""Command-line entry points: train one config, run the grid, render reports."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import DATA_ENV
from .experiment import (
    SPARSITY_LEVELS,
    ExperimentConfig,
    make_grid_configs,
    run,
    run_grid,
)


def _csv_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(item) for item in _csv_list(text)]


def _int_pair(text: str) -> tuple[int, int]:
    parts = [int(p) for p in _csv_list(text)]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated sizes, got {text!r}")
    return parts[0], parts[1]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("none", "random", "magnitude"), default="none")
    p.add_argument(
        "--bayes",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="gate pruning on the Bayes factor (--no-bayes prunes every epoch)",
    )
    p.add_argument("--sparsity", type=float, default=0.75, help="target sparsity r in [0, 1)")
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="adam")
    p.add_argument("--beta", type=float, default=1.0, help="Bayes factor threshold")
    p.add_argument("--prior-mu", type=float, default=0.0)
    p.add_argument("--prior-sigma", type=float, default=1.0)
    p.add_argument(
        "--persistent-mask",
        action="store_true",
        help="re-zero pruned positions after every optimizer step",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument(
        "--eval-slice",
        type=int,
        default=10000,
        help="training examples used for the posterior likelihood (<= 0: full set)",
    )
    p.add_argument("--normalize", choices=("standard", "scale"), default="standard")
    p.add_argument("--hidden-sizes", type=_int_pair, default=(256, 128), metavar="H1,H2")
    p.add_argument("--fc-width", type=int, default=128)
    p.add_argument("--data-dir", default=None, help=f"dataset root (fallback: ${DATA_ENV})")
    p.add_argument("--out", default="runs", help="output directory for traces and summaries")
    p.add_argument("--plots", action="store_true", help="render figures next to the CSVs")


def _config_from_args(args: argparse.Namespace, dataset: str, model: str) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=dataset,
        model=model,
        method=args.method,
        bayes=args.bayes,
        sparsity=args.sparsity,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        prior_mu=args.prior_mu,
        prior_sigma=args.prior_sigma,
        beta=args.beta,
        persistent_mask=args.persistent_mask,
        seed=args.seed,
        repeats=args.repeats,
        eval_slice=args.eval_slice,
        normalize=args.normalize,
        hidden_sizes=args.hidden_sizes,
        fc_width=args.fc_width,
        data_dir=args.data_dir,
        out=args.out,
    )


def _cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args, args.dataset, args.model)
    try:
        _, summary = run(config)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    accs = " ".join(f"{a:.4f}" for a in summary.per_seed_accuracy)
    print(
        f"{config.slug}: test accuracy {summary.mean_accuracy:.4f} "
        f"+/- {summary.std_accuracy:.4f} over {config.repeats} seeds [{accs}]"
    )
    if config.out:
        print(f"traces written under {Path(config.out) / config.slug}")
        if args.plots:
            from .plots import plot_run_dir

            for path in plot_run_dir(Path(config.out) / config.slug):
                print(f"figure: {path}")
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    base = _config_from_args(args, "mnist", "fcn")
    configs = make_grid_configs(
        base,
        datasets=args.datasets,
        models=args.models,
        sparsities=tuple(args.sparsities),
        methods=tuple(args.methods),
        include_baseline=not args.no_baseline,
    )
    summaries, failures = run_grid(configs, out_dir=args.out, jobs=args.jobs)
    print(f"grid finished: {len(summaries)} runs ok, {len(failures)} failed")
    for cfg, msg in failures:
        print(f"  failed {cfg.slug}: {msg}", file=sys.stderr)
    if args.out:
        print(f"summary: {Path(args.out) / 'grid_summary.csv'}")
        if args.plots and summaries:
            from .plots import plot_grid_summary

            print(f"figure: {plot_grid_summary(Path(args.out) / 'grid_summary.csv')}")
    return 0 if not failures else 1


def _cmd_report(args: argparse.Namespace) -> int:
    from .plots import plot_compare, plot_grid_summary, plot_run_dir, plot_trace

    written: list[Path] = []
    run_dirs: list[Path] = []
    for raw in args.paths:
        path = Path(raw)
        if path.is_file() and path.suffix == ".csv":
            if path.name == "grid_summary.csv":
                written.append(plot_grid_summary(path))
            else:
                written.append(plot_trace(path))
        elif path.is_dir():
            if (path / "grid_summary.csv").is_file():
                written.append(plot_grid_summary(path / "grid_summary.csv"))
                for child in sorted(path.iterdir()):
                    if child.is_dir() and list(child.glob("seed*/trace.csv")):
                        written.extend(plot_run_dir(child))
                        run_dirs.append(child)
            else:
                written.extend(plot_run_dir(path))
                run_dirs.append(path)
        else:
            print(f"error: no trace CSV or run directory at {path}", file=sys.stderr)
            return 2
    if args.compare:
        if len(run_dirs) < 2:
            print("error: --compare needs at least two run directories", file=sys.stderr)
            return 2
        written.append(plot_compare(run_dirs, args.compare))
    for path in written:
        print(f"figure: {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bayesprune",
        description="Bayes-factor-gated iterative pruning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one configuration (all repeats)")
    p_train.add_argument("--dataset", choices=("mnist", "fashion", "cifar10"), default="mnist")
    p_train.add_argument("--model", choices=("fcn", "cnn"), default="fcn")
    _add_run_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_grid = sub.add_parser("grid", help="run the accuracy-by-sparsity grid")
    p_grid.add_argument("--datasets", type=_csv_list, default=["mnist", "fashion", "cifar10"])
    p_grid.add_argument("--models", type=_csv_list, default=["fcn", "cnn"])
    p_grid.add_argument(
        "--sparsities", type=_csv_floats, default=list(SPARSITY_LEVELS)
    )
    p_grid.add_argument("--methods", type=_csv_list, default=["random", "magnitude"])
    p_grid.add_argument("--no-baseline", action="store_true", help="skip the unpruned baselines")
    p_grid.add_argument("--jobs", type=int, default=1, help="parallel runs (processes)")
    _add_run_flags(p_grid)
    p_grid.set_defaults(func=_cmd_grid)

    p_report = sub.add_parser("report", help="render figures from emitted CSVs")
    p_report.add_argument("paths", nargs="+", help="run directories, grid directories, or trace CSVs")
    p_report.add_argument("--compare", default=None, help="write an overlay figure to this path")
    p_report.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
