"""Shared test oracles: naive reference implementations and fixture builders.

Everything here is deliberately independent of the library internals it
checks: loops instead of vectorization, struct.pack instead of the parser,
a hand-rolled scalar Adam recurrence, and so on.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from bayesprune.data import LabeledDataset


def dense_oracle(x, w, b):
    """Triple-loop matmul reference."""
    batch, n_in = x.shape
    n_out = w.shape[1]
    out = np.zeros((batch, n_out))
    for i in range(batch):
        for j in range(n_out):
            acc = b[j]
            for k in range(n_in):
                acc += x[i, k] * w[k, j]
            out[i, j] = acc
    return out


def conv_oracle(x, kernel, b, stride=1):
    """Six-nested-loop valid cross-correlation reference."""
    n, c, h, w = x.shape
    c_out, c_in, kh, kw = kernel.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.zeros((n, c_out, oh, ow))
    for img in range(n):
        for o in range(c_out):
            for y in range(oh):
                for xx in range(ow):
                    acc = b[o]
                    for ci in range(c_in):
                        for i in range(kh):
                            for j in range(kw):
                                acc += (
                                    x[img, ci, y * stride + i, xx * stride + j]
                                    * kernel[o, ci, i, j]
                                )
                    out[img, o, y, xx] = acc
    return out


def pool_oracle(x, kernel, stride):
    """Brute-force window scan for max pooling."""
    n, c, h, w = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    out = np.zeros((n, c, oh, ow))
    for img in range(n):
        for ci in range(c):
            for y in range(oh):
                for xx in range(ow):
                    window = x[
                        img, ci, y * stride : y * stride + kernel, xx * stride : xx * stride + kernel
                    ]
                    out[img, ci, y, xx] = window.max()
    return out


def adam_scalar_trace(w0=1.0, steps=10, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Hand-rolled Adam on f(w) = w^2 (g = 2w); returns the w sequence."""
    w, m, v = w0, 0.0, 0.0
    out = []
    for t in range(1, steps + 1):
        g = 2.0 * w
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        w = w - lr * mhat / (math.sqrt(vhat) + eps)
        out.append(w)
    return out


def gaussian_logpdf_sum(arrays, mu, sigma):
    """Scalar-loop sum of Gaussian log densities over every entry."""
    total = 0.0
    for a in arrays:
        for value in np.asarray(a).reshape(-1):
            total += (
                -0.5 * math.log(2 * math.pi * sigma**2)
                - (value - mu) ** 2 / (2 * sigma**2)
            )
    return total


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / (abs(a) + abs(b) + floor)


def numerical_grad(f, x, eps=1e-5):
    """Central finite differences of a scalar function w.r.t. array x, in place."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        grad[i] = (fp - fm) / (2 * eps)
    return grad


def max_grad_rel_err(network, x, y, eps=1e-5):
    """Worst elementwise relative error of backward() against central differences."""
    from bayesprune.nn import backward, softmax_cross_entropy

    def loss_of():
        loss, _ = softmax_cross_entropy(network.forward(x), y)
        return loss

    network.forward(x)
    bg = backward(network, x, y)
    worst = 0.0
    for name, p in network.parameters().items():
        numeric = numerical_grad(loss_of, p, eps)
        analytic = bg.grads[name]
        err = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-8)
        worst = max(worst, float(err.max()))
    return worst


class ParamBag:
    """Minimal network stand-in: anything with .parameters() / .prunable_weights()."""

    def __init__(self, params, prunable=None):
        self._params = dict(params)
        self._prunable = list(prunable) if prunable is not None else list(self._params)

    def parameters(self):
        return self._params

    def prunable_weights(self):
        return {k: self._params[k] for k in self._prunable}

    def n_parameters(self):
        return sum(p.size for p in self._params.values())


def write_idx(path, array):
    """Independent IDX writer (big-endian header + uint8 payload)."""
    array = np.asarray(array, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(bytes([0, 0, 0x08, array.ndim]))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(array.tobytes())
    return path


def write_cifar_batch(path, labels, images):
    """Independent CIFAR-10 binary record writer."""
    with open(path, "wb") as f:
        for label, image in zip(labels, images):
            f.write(bytes([label]))
            f.write(np.asarray(image, dtype=np.uint8).tobytes())
    return path


def make_synthetic(
    n=256, shape=(1, 6, 6), classes=10, seed=0, noise=0.4, name="mnist", split="train"
):
    """Learnable 10-class toy dataset: one Gaussian blob direction per class."""
    rng = np.random.default_rng(seed)
    patterns = rng.normal(size=(classes,) + shape)
    labels = np.arange(n) % classes
    rng.shuffle(labels)
    images = patterns[labels] + noise * rng.normal(size=(n,) + shape)
    return LabeledDataset(
        images=images.astype(np.float64),
        labels=labels.astype(np.int64),
        split=split,
        name=name,
    )


def synthetic_pair(n_train=256, n_test=128, shape=(1, 6, 6), seed=0, noise=0.4):
    """Train/test LabeledDataset pair drawn from the same class patterns."""
    rng = np.random.default_rng(seed)
    patterns = rng.normal(size=(10,) + shape)

    def make(n, split):
        labels = np.arange(n) % 10
        rng.shuffle(labels)
        images = patterns[labels] + noise * rng.normal(size=(n,) + shape)
        return LabeledDataset(images.astype(np.float64), labels.astype(np.int64), split, "mnist")

    return make(n_train, "train"), make(n_test, "test")
