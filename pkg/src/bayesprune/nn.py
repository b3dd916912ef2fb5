"""Dense tensors, the five layer kinds, softmax cross-entropy, and exact backprop.

Everything runs in float64 end to end: desk-scale runs trade speed for
gradient-check fidelity. Layers cache what their backward needs during
forward; caches are overwritten by the next forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BatchGradients",
    "Conv2D",
    "Dense",
    "Flatten",
    "MaxPool2D",
    "Network",
    "ReLU",
    "backward",
    "conv2d_forward",
    "dense_forward",
    "loss_and_gradients",
    "maxpool_forward",
    "relu_forward",
    "softmax_cross_entropy",
]


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map: out[i, j] = sum_k x[i, k] * w[k, j] + b[j]."""
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ValueError(
            f"dense_forward expects x[batch, in], w[in, out], b[out]; "
            f"got x{x.shape}, w{w.shape}, b{b.shape}"
        )
    if x.shape[1] != w.shape[0]:
        raise ValueError(
            f"dense_forward: x has {x.shape[1]} input features but w expects {w.shape[0]}"
        )
    if w.shape[1] != b.shape[0]:
        raise ValueError(
            f"dense_forward: w produces {w.shape[1]} outputs but b has {b.shape[0]}"
        )
    return x @ w + b


def _out_size(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Gather all valid kh-by-kw patches into shape (n, c, kh, kw, oh, ow)."""
    n, c, h, w = x.shape
    oh = _out_size(h, kh, stride)
    ow = _out_size(w, kw, stride)
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride]
    return cols


def conv2d_forward(
    x: np.ndarray, kernel: np.ndarray, b: np.ndarray, stride: int = 1
) -> np.ndarray:
    """Valid (no padding) cross-correlation plus a per-output-channel bias."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(
            f"conv2d_forward expects x[batch, c, h, w] and kernel[c_out, c_in, kh, kw]; "
            f"got x{x.shape}, kernel{kernel.shape}"
        )
    if stride < 1:
        raise ValueError(f"conv2d_forward: stride must be >= 1, got {stride}")
    n, c, h, w = x.shape
    c_out, c_in, kh, kw = kernel.shape
    if c != c_in:
        raise ValueError(f"conv2d_forward: x has {c} channels but kernel expects {c_in}")
    if b.shape != (c_out,):
        raise ValueError(f"conv2d_forward: bias shape {b.shape} != ({c_out},)")
    if kh > h or kw > w:
        raise ValueError(
            f"conv2d_forward: kernel {kh}x{kw} larger than input {h}x{w}"
        )
    cols = _im2col(x, kh, kw, stride)
    out = np.tensordot(cols, kernel, axes=([1, 2, 3], [1, 2, 3]))  # (n, oh, ow, c_out)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + b.reshape(1, -1, 1, 1)


def maxpool_forward(
    x: np.ndarray, kernel: int, stride: int
) -> tuple[np.ndarray, np.ndarray]:
    """Windowed maximum plus the argmax offsets needed for backward routing.

    The returned indices are flat offsets into each window in row-major order;
    ties resolve to the first occurrence, which keeps backward deterministic.
    """
    if kernel <= 0:
        raise ValueError(f"maxpool_forward: kernel must be positive, got {kernel}")
    if stride <= 0:
        raise ValueError(f"maxpool_forward: stride must be positive, got {stride}")
    if x.ndim != 4:
        raise ValueError(f"maxpool_forward expects x[batch, c, h, w]; got x{x.shape}")
    n, c, h, w = x.shape
    if h < kernel or w < kernel:
        raise ValueError(f"maxpool_forward: kernel {kernel} larger than input {h}x{w}")
    oh = _out_size(h, kernel, stride)
    ow = _out_size(w, kernel, stride)
    windows = np.empty((n, c, kernel * kernel, oh, ow), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            windows[:, :, i * kernel + j] = x[
                :, :, i : i + oh * stride : stride, j : j + ow * stride : stride
            ]
    arg = windows.argmax(axis=2)  # first max in row-major window order
    out = np.take_along_axis(windows, arg[:, :, None], axis=2)[:, :, 0]
    return out, arg


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of the true classes and its logits gradient.

    Stabilized by the row-max shift; dlogits = (softmax - one_hot) / batch.
    """
    if logits.ndim != 2:
        raise ValueError(f"softmax_cross_entropy expects logits[batch, classes]; got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise ValueError(
            f"softmax_cross_entropy: {batch} logit rows but labels shape {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise IndexError(
            f"labels must lie in [0, {classes}); got range "
            f"[{int(labels.min())}, {int(labels.max())}]"
        )
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(batch)
    loss = -float(log_probs[rows, labels].mean())
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    dlogits /= batch
    return loss, dlogits


def _kaiming_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base class; subclasses cache forward inputs for their backward pass."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _need_cache(self):
        if self._cache is None:
            raise RuntimeError(
                f"{type(self).__name__}.backward called without a cached forward pass"
            )
        return self._cache


class Dense(Layer):
    """Fully connected layer; weight [in, out], bias [out]."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        super().__init__()
        if in_features <= 0 or out_features <= 0:
            raise ValueError(
                f"Dense: feature counts must be positive, got ({in_features}, {out_features})"
            )
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            w = np.zeros((in_features, out_features))
        else:
            w = _kaiming_uniform((in_features, out_features), in_features, rng)
        self.params = {"w": w, "b": np.zeros(out_features)}

    def forward(self, x):
        self._cache = x
        return dense_forward(x, self.params["w"], self.params["b"])

    def backward(self, dout):
        x = self._need_cache()
        self.grads = {"w": x.T @ dout, "b": dout.sum(axis=0)}
        return dout @ self.params["w"].T


class Conv2D(Layer):
    """Valid 2-D convolution; weight [c_out, c_in, kh, kw], bias [c_out]."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_h: int,
        kernel_w: int,
        stride: int = 1,
        rng: np.random.Generator | None = None,
    ):
        super().__init__()
        if min(in_channels, out_channels, kernel_h, kernel_w, stride) <= 0:
            raise ValueError("Conv2D: all dimensions and the stride must be positive")
        self.stride = stride
        fan_in = in_channels * kernel_h * kernel_w
        shape = (out_channels, in_channels, kernel_h, kernel_w)
        w = np.zeros(shape) if rng is None else _kaiming_uniform(shape, fan_in, rng)
        self.params = {"w": w, "b": np.zeros(out_channels)}

    def forward(self, x):
        self._cache = x
        return conv2d_forward(x, self.params["w"], self.params["b"], self.stride)

    def backward(self, dout):
        x = self._need_cache()
        w = self.params["w"]
        _, _, kh, kw = w.shape
        s = self.stride
        oh, ow = dout.shape[2], dout.shape[3]
        cols = _im2col(x, kh, kw, s)
        dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 4, 5]))
        db = dout.sum(axis=(0, 2, 3))
        self.grads = {"w": dw, "b": db}
        dcols = np.tensordot(dout, w, axes=([1], [0]))  # (n, oh, ow, c, kh, kw)
        dx = np.zeros_like(x)
        for i in range(kh):
            for j in range(kw):
                # overlapping windows (stride < kernel) accumulate across offsets
                dx[:, :, i : i + oh * s : s, j : j + ow * s : s] += dcols[
                    :, :, :, :, i, j
                ].transpose(0, 3, 1, 2)
        return dx


class MaxPool2D(Layer):
    def __init__(self, kernel: int, stride: int):
        super().__init__()
        if kernel <= 0:
            raise ValueError(f"MaxPool2D: kernel must be positive, got {kernel}")
        if stride <= 0:
            raise ValueError(f"MaxPool2D: stride must be positive, got {stride}")
        self.kernel = kernel
        self.stride = stride

    def forward(self, x):
        out, arg = maxpool_forward(x, self.kernel, self.stride)
        self._cache = (x.shape, arg)
        return out

    def backward(self, dout):
        in_shape, arg = self._need_cache()
        k, s = self.kernel, self.stride
        di, dj = np.divmod(arg, k)
        bi, ci, yi, xi = np.indices(dout.shape)
        dx = np.zeros(in_shape, dtype=dout.dtype)
        np.add.at(dx, (bi, ci, yi * s + di, xi * s + dj), dout)
        return dx


class ReLU(Layer):
    def forward(self, x):
        self._cache = x
        return relu_forward(x)

    def backward(self, dout):
        x = self._need_cache()
        return dout * (x > 0)


class Flatten(Layer):
    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._need_cache())


@dataclass
class BatchGradients:
    """Per-parameter gradients of the mean batch loss, keyed like Network.parameters()."""

    loss: float
    grads: dict[str, np.ndarray]


class Network:
    """Ordered layer stack with stably named parameter tensors.

    Parameter names follow layer kind and order ("conv1.w", "fc2.b", ...);
    pruning masks and optimizer state rely on this ordering being stable.
    """

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)
        self.layer_names: list[str | None] = []
        counts = {"fc": 0, "conv": 0}
        for layer in self.layers:
            if isinstance(layer, Dense):
                counts["fc"] += 1
                self.layer_names.append(f"fc{counts['fc']}")
            elif isinstance(layer, Conv2D):
                counts["conv"] += 1
                self.layer_names.append(f"conv{counts['conv']}")
            else:
                self.layer_names.append(None)
        self._logits: np.ndarray | None = None
        self._batch: int | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        self._logits = x
        self._batch = x.shape[0]
        return x

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in zip(self.layer_names, self.layers):
            for key, value in layer.params.items():
                out[f"{name}.{key}"] = value
        return out

    def prunable_weights(self) -> dict[str, np.ndarray]:
        """Weight matrices and kernels only; biases are never pruned."""
        return {
            f"{name}.w": layer.params["w"]
            for name, layer in zip(self.layer_names, self.layers)
            if isinstance(layer, (Dense, Conv2D))
        }

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())


def backward(network: Network, x: np.ndarray, labels: np.ndarray) -> BatchGradients:
    """Exact gradients of the mean cross-entropy loss for the last forward batch."""
    if network._logits is None:
        raise RuntimeError("backward called before any forward pass")
    if network._batch != len(x) or network._batch != len(labels):
        raise RuntimeError(
            f"backward: cached forward batch ({network._batch}) does not match "
            f"the given batch ({len(x)} inputs, {len(labels)} labels)"
        )
    loss, grad = softmax_cross_entropy(network._logits, labels)
    for layer in reversed(network.layers):
        grad = layer.backward(grad)
    grads = {}
    for name, layer in zip(network.layer_names, network.layers):
        for key, g in layer.grads.items():
            grads[f"{name}.{key}"] = g
    return BatchGradients(loss=loss, grads=grads)


def loss_and_gradients(network: Network, x: np.ndarray, labels: np.ndarray) -> BatchGradients:
    """Forward pass followed by backward; the per-batch training step primitive."""
    network.forward(x)
    return backward(network, x, labels)
