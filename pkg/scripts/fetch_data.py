#!/usr/bin/env python3
"""Download MNIST, Fashion-MNIST, and CIFAR-10 into the layout bayesprune expects.

Usage:
    python scripts/fetch_data.py [--root data] [--datasets mnist,fashion,cifar10]

Produces:
    <root>/mnist/*-ubyte.gz         (IDX, kept compressed; the loader reads .gz)
    <root>/fashion/*-ubyte.gz
    <root>/cifar10/*.bin            (extracted from the binary tarball)

The library itself never touches the network; this script is the only
downloader and can be replaced by any other way of arranging these files.
"""

import argparse
import sys
import tarfile
import urllib.error
import urllib.request
from pathlib import Path

IDX_FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]

MNIST_MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
]
FASHION_BASE = "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
CIFAR_URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"


def download(url, dest, chunk=1 << 20):
    print(f"  {url} -> {dest}")
    with urllib.request.urlopen(url) as response, open(dest, "wb") as out:
        while True:
            block = response.read(chunk)
            if not block:
                break
            out.write(block)


def fetch_idx_dataset(root, name, bases):
    target = root / name
    target.mkdir(parents=True, exist_ok=True)
    for filename in IDX_FILES:
        dest = target / filename
        if dest.exists():
            print(f"  {dest} already present")
            continue
        last_error = None
        for base in bases:
            try:
                download(base + filename, dest)
                break
            except urllib.error.URLError as err:
                last_error = err
        else:
            raise SystemExit(f"could not download {filename}: {last_error}")


def fetch_cifar10(root):
    target = root / "cifar10"
    target.mkdir(parents=True, exist_ok=True)
    wanted = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
    if all((target / f).exists() for f in wanted):
        print(f"  {target} already complete")
        return
    archive = target / "cifar-10-binary.tar.gz"
    if not archive.exists():
        download(CIFAR_URL, archive)
    with tarfile.open(archive) as tar:
        for member in tar.getmembers():
            basename = Path(member.name).name
            if basename in wanted:
                with tar.extractfile(member) as src:
                    (target / basename).write_bytes(src.read())
                print(f"  extracted {basename}")
    archive.unlink()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", default="data", help="destination directory")
    parser.add_argument(
        "--datasets",
        default="mnist,fashion,cifar10",
        help="comma-separated subset to fetch",
    )
    args = parser.parse_args()
    root = Path(args.root)
    names = [n.strip() for n in args.datasets.split(",") if n.strip()]
    for name in names:
        print(f"fetching {name}")
        if name == "mnist":
            fetch_idx_dataset(root, "mnist", MNIST_MIRRORS)
        elif name == "fashion":
            fetch_idx_dataset(root, "fashion", [FASHION_BASE])
        elif name == "cifar10":
            fetch_cifar10(root)
        else:
            print(f"unknown dataset {name!r}", file=sys.stderr)
            return 2
    print(f"done; point BAYES_PRUNE_DATA (or --data-dir) at {root.resolve()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
