"""Pytest wiring: the long-running opt-in flag and dataset availability helpers."""

import os
from pathlib import Path

import pytest

from bayesprune.data import DATA_ENV, dataset_available


def pytest_addoption(parser):
    parser.addoption(
        "--run-longrun",
        action="store_true",
        default=False,
        help="run the long-running CIFAR-10 reproduction tier",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-longrun"):
        return
    skip = pytest.mark.skip(reason="long-running tier; enable with --run-longrun")
    for item in items:
        if "longrun" in item.keywords:
            skip(item)


def find_data_dir():
    """Dataset root from the environment or the conventional ./data checkout."""
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    local = Path(__file__).resolve().parent.parent / "data"
    return local if local.is_dir() else None


def require_dataset(name):
    """Skip the calling test when the named dataset's files are absent."""
    data_dir = find_data_dir()
    if data_dir is None or not dataset_available(name, data_dir):
        pytest.skip(
            f"dataset {name!r} not found (set {DATA_ENV} or run scripts/fetch_data.py)"
        )
    return data_dir
