"""SGD and Adam parameter updates, optionally re-zeroing masked weights."""

from __future__ import annotations

import numpy as np

__all__ = ["SGD", "Adam", "make_optimizer"]


def _check_shapes(params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    for name, w in params.items():
        g = grads.get(name)
        if g is None:
            raise ValueError(f"missing gradient for parameter {name!r}")
        if g.shape != w.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter shape "
                f"{w.shape} for {name!r}"
            )


def _reapply_masks(params: dict[str, np.ndarray], masks: dict[str, np.ndarray]) -> None:
    # persistent-mask mode: pruned positions are exactly 0.0 after every step
    for name, m in masks.items():
        params[name] *= m


class SGD:
    kind = "sgd"

    def __init__(self, learning_rate: float = 0.001):
        self.learning_rate = learning_rate

    def step(self, params, grads, masks=None):
        """w <- w - lr * g, in place."""
        _check_shapes(params, grads)
        for name, w in params.items():
            w -= self.learning_rate * grads[name]
        if masks:
            _reapply_masks(params, masks)


class Adam:
    """Bias-corrected moment updates with the Kingma & Ba defaults."""

    kind = "adam"

    def __init__(
        self,
        learning_rate: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._scratch: dict[str, np.ndarray] = {}

    def step(self, params, grads, masks=None):
        _check_shapes(params, grads)
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for name, w in params.items():
            g = grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(w)
                self._v[name] = np.zeros_like(w)
                self._scratch[name] = np.empty_like(w)
            m, v, scratch = self._m[name], self._v[name], self._scratch[name]
            # in-place moment updates: the step loop dominates training time
            m *= self.beta1
            np.multiply(g, 1.0 - self.beta1, out=scratch)
            m += scratch
            v *= self.beta2
            np.multiply(g, g, out=scratch)
            scratch *= 1.0 - self.beta2
            v += scratch
            np.divide(v, correct2, out=scratch)
            np.sqrt(scratch, out=scratch)
            scratch += self.eps
            np.divide(m, scratch, out=scratch)
            scratch *= self.learning_rate / correct1
            w -= scratch
        if masks:
            _reapply_masks(params, masks)


def make_optimizer(kind: str, learning_rate: float = 0.001):
    if kind == "sgd":
        return SGD(learning_rate)
    if kind == "adam":
        return Adam(learning_rate)
    raise ValueError(f"unknown optimizer {kind!r}")
