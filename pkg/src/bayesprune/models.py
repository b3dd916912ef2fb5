"""The two fixed architectures: a two-hidden-layer FCN and a 32/64-filter CNN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Conv2D, Dense, Flatten, MaxPool2D, Network, ReLU

CONV_CHANNELS = (32, 64)  # fixed filter counts for the CNN
CONV_KERNEL = 3
POOL_KERNEL = 2
POOL_STRIDE = 2


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "fcn" | "cnn"
    input_shape: tuple[int, int, int]  # (channels, height, width)
    classes: int = 10
    hidden_sizes: tuple[int, int] = (256, 128)
    fc_width: int = 128


def conv_stack_output(input_shape: tuple[int, int, int]) -> tuple[int, int, int]:
    """Walk the conv/pool shape formulas through both stages; (c, h, w) out."""
    _, h, w = input_shape
    for _ in CONV_CHANNELS:
        h, w = h - CONV_KERNEL + 1, w - CONV_KERNEL + 1
        if h < POOL_KERNEL or w < POOL_KERNEL:
            raise ValueError(
                f"input {input_shape} is too small for two conv+pool stages"
            )
        h = (h - POOL_KERNEL) // POOL_STRIDE + 1
        w = (w - POOL_KERNEL) // POOL_STRIDE + 1
    return CONV_CHANNELS[-1], h, w


def build_fcn(spec: ModelSpec, rng: np.random.Generator | None = None) -> Network:
    """Flatten -> Dense -> ReLU -> Dense -> ReLU -> Dense(classes)."""
    if spec.kind != "fcn":
        raise ValueError(f"build_fcn got spec kind {spec.kind!r}")
    h1, h2 = spec.hidden_sizes
    if h1 <= 0 or h2 <= 0:
        raise ValueError(f"hidden sizes must be positive, got {spec.hidden_sizes}")
    c, h, w = spec.input_shape
    d = c * h * w
    return Network(
        [
            Flatten(),
            Dense(d, h1, rng),
            ReLU(),
            Dense(h1, h2, rng),
            ReLU(),
            Dense(h2, spec.classes, rng),
        ]
    )


def build_cnn(spec: ModelSpec, rng: np.random.Generator | None = None) -> Network:
    """Two conv+pool stages, then a two-layer fully connected head."""
    if spec.kind != "cnn":
        raise ValueError(f"build_cnn got spec kind {spec.kind!r}")
    if spec.fc_width <= 0:
        raise ValueError(f"fc_width must be positive, got {spec.fc_width}")
    c, _, _ = spec.input_shape
    fc, fh, fw = conv_stack_output(spec.input_shape)
    flat = fc * fh * fw
    return Network(
        [
            Conv2D(c, CONV_CHANNELS[0], CONV_KERNEL, CONV_KERNEL, 1, rng),
            ReLU(),
            MaxPool2D(POOL_KERNEL, POOL_STRIDE),
            Conv2D(CONV_CHANNELS[0], CONV_CHANNELS[1], CONV_KERNEL, CONV_KERNEL, 1, rng),
            ReLU(),
            MaxPool2D(POOL_KERNEL, POOL_STRIDE),
            Flatten(),
            Dense(flat, spec.fc_width, rng),
            ReLU(),
            Dense(spec.fc_width, spec.classes, rng),
        ]
    )


def build_model(spec: ModelSpec, rng: np.random.Generator | None = None) -> Network:
    if spec.kind == "fcn":
        return build_fcn(spec, rng)
    if spec.kind == "cnn":
        return build_cnn(spec, rng)
    raise ValueError(f"unknown model kind {spec.kind!r}")
