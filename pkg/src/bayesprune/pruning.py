"""Mask bookkeeping and the random / magnitude pruning procedures.

Both procedures work per weight tensor and in place: surviving entries keep
their exact values and positions, pruned entries become 0.0. Masks use
1.0 = keep, 0.0 = pruned.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PRUNE_METHODS",
    "PruneState",
    "apply_mask",
    "magnitude_prune",
    "random_prune",
    "sparsity",
]

PRUNE_METHODS = ("random", "magnitude")


def _prune_count(n: int, rate: float) -> int:
    # floor(n * rate); the epsilon absorbs cases like 100 * 0.99 = 98.999...
    return min(n, int(np.floor(n * rate + 1e-9)))


def apply_mask(w: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Elementwise product w * m; shape preserved."""
    if m.shape != w.shape:
        raise ValueError(f"mask shape {m.shape} does not match weight shape {w.shape}")
    return w * m


def random_prune(network, rate: float, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Top zeros up to floor(n * rate) per weight tensor by uniform sampling.

    Existing zeros count toward the target, so only k' = max(0, k - n_z) new
    positions are drawn, uniformly without replacement from the nonzero set.
    Returns the resulting masks.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"pruning rate must lie in [0, 1), got {rate}")
    masks = {}
    for name, w in network.prunable_weights().items():
        flat = w.reshape(-1)
        k = _prune_count(flat.size, rate)
        nonzero = np.flatnonzero(flat)
        n_z = flat.size - nonzero.size
        k_new = max(0, k - n_z)
        if k_new > 0:
            chosen = rng.choice(nonzero, size=k_new, replace=False)
            flat[chosen] = 0.0
        masks[name] = (w != 0).astype(np.float64)
    return masks


def magnitude_prune(network, rate: float) -> dict[str, np.ndarray]:
    """Zero the floor(n * rate) smallest-|w| entries of each weight tensor.

    Ties break toward the lower flat index (stable sort), so already-zero
    entries are re-selected first and the operation is idempotent at a fixed
    rate. Returns the resulting masks.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"pruning rate must lie in [0, 1), got {rate}")
    masks = {}
    for name, w in network.prunable_weights().items():
        flat = w.reshape(-1)
        k = _prune_count(flat.size, rate)
        if k > 0:
            order = np.argsort(np.abs(flat), kind="stable")
            flat[order[:k]] = 0.0
        masks[name] = (w != 0).astype(np.float64)
    return masks


def sparsity(network) -> tuple[dict[str, float], float]:
    """Zero fraction per prunable weight tensor and globally."""
    per_tensor = {}
    zeros = 0
    total = 0
    for name, w in network.prunable_weights().items():
        z = int(np.count_nonzero(w == 0))
        per_tensor[name] = z / w.size
        zeros += z
        total += w.size
    return per_tensor, (zeros / total if total else 0.0)


class PruneState:
    """Per-run pruning configuration plus the current masks.

    In persistent mode the optimizer re-zeroes masked positions after every
    step, so the zero set never shrinks; otherwise pruned weights may regrow
    between epochs and pruning is re-applied whenever the gate opens.
    """

    def __init__(self, network, method: str, rate: float, persistent: bool = False, seed: int = 0):
        if method not in PRUNE_METHODS:
            raise ValueError(f"unknown pruning method {method!r}; expected one of {PRUNE_METHODS}")
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"target sparsity must lie in [0, 1), got {rate}")
        self.method = method
        self.rate = rate
        self.persistent = persistent
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self.masks = {name: np.ones_like(w) for name, w in network.prunable_weights().items()}

    def prune(self, network) -> dict[str, np.ndarray]:
        """Run the configured procedure and refresh the masks."""
        if self.method == "random":
            self.masks = random_prune(network, self.rate, self._rng)
        else:
            self.masks = magnitude_prune(network, self.rate)
        return self.masks
