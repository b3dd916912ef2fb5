"""Log prior, log likelihood, log posterior, and the Bayes-factor prune gate.

All probability arithmetic stays in log space: a log Bayes factor of -1e4 is
an ordinary float here, while the factor itself would underflow. Posteriors
are unnormalized (the evidence cancels in every ratio we take).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BEFORE_PRUNE",
    "AFTER_PRUNE",
    "BayesFactorRecord",
    "PosteriorRecord",
    "PriorSpec",
    "bayes_factor",
    "gate",
    "log_likelihood",
    "log_prior",
    "posterior_record",
]

BEFORE_PRUNE = "before_prune"
AFTER_PRUNE = "after_prune"


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian prior over every weight entry."""

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"prior sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class PosteriorRecord:
    """Unnormalized log posterior of one weight configuration on one data slice."""

    log_likelihood: float
    log_prior: float
    log_posterior: float
    n_examples: int
    n_params: int
    epoch: int
    phase: str  # BEFORE_PRUNE | AFTER_PRUNE


@dataclass(frozen=True)
class BayesFactorRecord:
    """log BF of the pruned configuration over the unpruned one, same epoch."""

    log_bf: float
    epoch: int


def log_prior(network, prior: PriorSpec) -> float:
    """Sum of Gaussian log densities over every parameter entry.

    Pruned entries contribute the density at zero; biases are included.
    """
    const = -0.5 * math.log(2.0 * math.pi * prior.sigma**2)
    total = 0.0
    for w in network.parameters().values():
        d = w - prior.mu
        total += w.size * const - float((d * d).sum()) / (2.0 * prior.sigma**2)
    return total


def log_likelihood(network, images: np.ndarray, labels: np.ndarray, batch_size: int = 512) -> float:
    """Sum over examples of the log softmax probability of the true class."""
    n = len(images)
    if n == 0:
        raise ValueError("log_likelihood: empty dataset slice")
    labels = np.asarray(labels, dtype=np.int64)
    total = 0.0
    for start in range(0, n, batch_size):
        logits = network.forward(images[start : start + batch_size])
        z = logits - logits.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        batch_labels = labels[start : start + batch_size]
        total += float(log_probs[np.arange(len(batch_labels)), batch_labels].sum())
    return total


def posterior_record(
    network,
    images: np.ndarray,
    labels: np.ndarray,
    prior: PriorSpec,
    epoch: int,
    phase: str,
    batch_size: int = 512,
) -> PosteriorRecord:
    """Evaluate the unnormalized log posterior of the current weights."""
    if phase not in (BEFORE_PRUNE, AFTER_PRUNE):
        raise ValueError(f"unknown posterior phase {phase!r}")
    ll = log_likelihood(network, images, labels, batch_size)
    lp = log_prior(network, prior)
    return PosteriorRecord(
        log_likelihood=ll,
        log_prior=lp,
        log_posterior=ll + lp,
        n_examples=len(images),
        n_params=network.n_parameters(),
        epoch=epoch,
        phase=phase,
    )


def bayes_factor(before: PosteriorRecord, after: PosteriorRecord) -> BayesFactorRecord:
    """log BF = log posterior after pruning minus log posterior before.

    The evidence and the equal prior model probabilities cancel in the ratio,
    so the difference of unnormalized log posteriors is exact.
    """
    if before.phase != BEFORE_PRUNE or after.phase != AFTER_PRUNE:
        raise RuntimeError(
            f"bayes_factor needs (before_prune, after_prune) records; "
            f"got ({before.phase!r}, {after.phase!r})"
        )
    if before.epoch != after.epoch:
        raise RuntimeError(
            f"bayes_factor: records from different epochs ({before.epoch} vs {after.epoch})"
        )
    return BayesFactorRecord(log_bf=after.log_posterior - before.log_posterior, epoch=before.epoch)


def gate(previous: BayesFactorRecord | None, beta: float) -> bool:
    """Decide whether pruning fires this epoch.

    Open at the first pruning opportunity (no factor exists yet), afterwards
    open iff the most recent log Bayes factor exceeds ln(beta).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return previous is None or previous.log_bf > math.log(beta)
