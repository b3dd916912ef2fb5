"""Loaders for the MNIST/Fashion IDX and CIFAR-10 binary formats, plus batching.

No network access here: files are read from a data directory supplied by flag
or the BAYES_PRUNE_DATA environment variable (see scripts/fetch_data.py for a
downloader). Loaders return raw uint8 pixels; normalize() converts to float64.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DATA_ENV",
    "BatchIterator",
    "LabeledDataset",
    "batches",
    "dataset_available",
    "load_cifar10",
    "load_dataset",
    "load_idx",
    "load_mnist_dir",
    "normalize",
    "resolve_data_dir",
]

DATA_ENV = "BAYES_PRUNE_DATA"
DATASET_NAMES = ("mnist", "fashion", "cifar10")

# conventional per-channel train-set statistics; the "scale" mode skips them
NORMALIZATION = {
    "mnist": ((0.1307,), (0.3081,)),
    "fashion": ((0.2860,), (0.3530,)),
    "cifar10": ((0.4914, 0.4822, 0.4465), (0.2470, 0.2435, 0.2616)),
}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}
CIFAR_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_FILE = "test_batch.bin"


@dataclass
class LabeledDataset:
    images: np.ndarray  # [N, c, h, w]
    labels: np.ndarray  # [N] int64 in [0, 10)
    split: str  # "train" | "test"
    name: str  # "mnist" | "fashion" | "cifar10"

    def __len__(self) -> int:
        return len(self.labels)


def _read_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def load_idx(path: str | Path) -> np.ndarray:
    """Parse a big-endian IDX file (uint8 payload, 1-D labels or 3-D images)."""
    data = _read_bytes(Path(path))
    if len(data) < 4:
        raise ValueError(f"{path}: not an IDX file (only {len(data)} bytes)")
    magic = data[:4]
    if magic[0] != 0 or magic[1] != 0 or magic[2] != 0x08 or magic[3] not in (1, 3):
        raise ValueError(
            f"{path}: bad IDX magic 0x{magic.hex()} "
            f"(expected 0x00000801 for labels or 0x00000803 for images)"
        )
    ndims = magic[3]
    header_end = 4 + 4 * ndims
    if len(data) < header_end:
        raise ValueError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndims}I", data[4:header_end])
    expected = int(np.prod(dims))
    payload = data[header_end:]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload length {len(payload)} does not match "
            f"dimensions {dims} (expected {expected} bytes)"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def _find_idx(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"missing dataset file {directory / stem}[.gz]")


def load_mnist_dir(directory: str | Path, name: str = "mnist") -> tuple[LabeledDataset, LabeledDataset]:
    """Load an MNIST-format directory (also used for Fashion-MNIST)."""
    directory = Path(directory)
    out = []
    for split, img_key, lbl_key in (
        ("train", "train_images", "train_labels"),
        ("test", "test_images", "test_labels"),
    ):
        images = load_idx(_find_idx(directory, MNIST_FILES[img_key]))
        labels = load_idx(_find_idx(directory, MNIST_FILES[lbl_key]))
        if images.ndim != 3:
            raise ValueError(f"{MNIST_FILES[img_key]}: expected 3-D image file, got {images.ndim}-D")
        if labels.ndim != 1 or len(labels) != len(images):
            raise ValueError(
                f"{MNIST_FILES[lbl_key]}: {len(labels)} labels for {len(images)} images"
            )
        n, h, w = images.shape
        out.append(
            LabeledDataset(
                images=images.reshape(n, 1, h, w),
                labels=labels.astype(np.int64),
                split=split,
                name=name,
            )
        )
    return out[0], out[1]


def _read_cifar_batch(path: Path) -> tuple[np.ndarray, np.ndarray]:
    raw = path.read_bytes()
    if len(raw) == 0 or len(raw) % 3073 != 0:
        raise ValueError(
            f"{path}: length {len(raw)} is not a positive multiple of 3073 "
            f"(1 label byte + 3072 pixel bytes per record)"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3073)
    labels = records[:, 0].astype(np.int64)
    images = records[:, 1:].reshape(-1, 3, 32, 32)  # 1024 R, then G, then B
    return images, labels


def load_cifar10(directory: str | Path) -> tuple[LabeledDataset, LabeledDataset]:
    """Load the CIFAR-10 binary distribution (five train batches + test batch)."""
    directory = Path(directory)
    if (directory / "cifar-10-batches-bin").is_dir():
        directory = directory / "cifar-10-batches-bin"
    missing = [
        f for f in CIFAR_TRAIN_FILES + [CIFAR_TEST_FILE] if not (directory / f).is_file()
    ]
    if missing:
        raise FileNotFoundError(f"missing CIFAR-10 files in {directory}: {', '.join(missing)}")
    train_parts = [_read_cifar_batch(directory / f) for f in CIFAR_TRAIN_FILES]
    train_images = np.concatenate([p[0] for p in train_parts])
    train_labels = np.concatenate([p[1] for p in train_parts])
    test_images, test_labels = _read_cifar_batch(directory / CIFAR_TEST_FILE)
    return (
        LabeledDataset(train_images, train_labels, "train", "cifar10"),
        LabeledDataset(test_images, test_labels, "test", "cifar10"),
    )


def normalize(ds: LabeledDataset, mode: str = "standard") -> LabeledDataset:
    """Scale uint8 pixels to floats: x/255, then optionally (x - mean) / std."""
    x = ds.images.astype(np.float64) / 255.0
    if mode == "standard":
        mean, std = NORMALIZATION[ds.name]
        c = x.shape[1]
        x = (x - np.reshape(mean, (1, c, 1, 1))) / np.reshape(std, (1, c, 1, 1))
    elif mode != "scale":
        raise ValueError(f"unknown normalization mode {mode!r}")
    return LabeledDataset(images=x, labels=ds.labels, split=ds.split, name=ds.name)


class BatchIterator:
    """Seeded shuffling batch stream: fresh permutation per epoch, short final batch kept."""

    def __init__(self, images: np.ndarray, labels: np.ndarray, batch_size: int = 64, seed: int = 0):
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if len(images) != len(labels):
            raise ValueError(f"{len(images)} images but {len(labels)} labels")
        self.images = images
        self.labels = labels
        self.batch_size = batch_size
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return -(-len(self.labels) // self.batch_size)

    def __iter__(self):
        n = len(self.labels)
        perm = self._rng.permutation(n)
        for start in range(0, n, self.batch_size):
            idx = perm[start : start + self.batch_size]
            yield self.images[idx], self.labels[idx]


def batches(ds: LabeledDataset, batch_size: int = 64, seed: int = 0) -> BatchIterator:
    return BatchIterator(ds.images, ds.labels, batch_size, seed)


def resolve_data_dir(path: str | Path | None = None) -> Path:
    """Data directory from the explicit argument or BAYES_PRUNE_DATA."""
    p = path or os.environ.get(DATA_ENV)
    if not p:
        raise FileNotFoundError(
            f"no data directory: pass --data-dir or set {DATA_ENV}. "
            f"Expected layout: <dir>/mnist/, <dir>/fashion/ (IDX files), "
            f"<dir>/cifar10/ (binary batches); see scripts/fetch_data.py"
        )
    return Path(p)


def _expected_files(name: str) -> list[str]:
    if name == "cifar10":
        return CIFAR_TRAIN_FILES + [CIFAR_TEST_FILE]
    return [f"{f}[.gz]" for f in MNIST_FILES.values()]


def dataset_available(name: str, data_dir: str | Path | None = None) -> bool:
    """True when every file the named dataset needs is present."""
    try:
        base = resolve_data_dir(data_dir) / name
    except FileNotFoundError:
        return False
    if name == "cifar10":
        d = base / "cifar-10-batches-bin" if (base / "cifar-10-batches-bin").is_dir() else base
        return all((d / f).is_file() for f in CIFAR_TRAIN_FILES + [CIFAR_TEST_FILE])
    try:
        for stem in MNIST_FILES.values():
            _find_idx(base, stem)
    except FileNotFoundError:
        return False
    return True


def load_dataset(
    name: str, data_dir: str | Path | None = None, normalize_mode: str = "standard"
) -> tuple[LabeledDataset, LabeledDataset]:
    """Load and normalize one of the three supported datasets."""
    if name not in DATASET_NAMES:
        raise ValueError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")
    base = resolve_data_dir(data_dir) / name
    if not base.is_dir():
        raise FileNotFoundError(
            f"dataset directory {base} not found; expected files: "
            f"{', '.join(_expected_files(name))}"
        )
    if name == "cifar10":
        train, test = load_cifar10(base)
    else:
        train, test = load_mnist_dir(base, name)
    return normalize(train, normalize_mode), normalize(test, normalize_mode)
