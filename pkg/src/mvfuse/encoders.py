"""View-dedicated feature extractors.

Each view gets its own encoder mapping raw data to a latent vector of shared
width d, with a trailing learnable layer normalization so the different view
representations live on a common scale. Temporal views go through a 1D CNN
stack with global average pooling over time; static views through an MLP
stack; categorical views are one-hot encoded and routed through the MLP path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Affine, Conv1d, Dropout, LayerNorm, Module
from .tensor import Tensor

VIEW_KINDS = ("temporal", "static", "categorical")


@dataclass(frozen=True)
class ViewSpec:
    """Identity and raw dimensions of one view.

    Temporal views are (time_steps, channels) series; static views are
    channel vectors; categorical views are single integer codes with the
    given cardinality.
    """

    id: str
    kind: str
    time_steps: int | None = None
    channels: int | None = None
    cardinality: int | None = None

    def __post_init__(self):
        if self.kind not in VIEW_KINDS:
            raise ValueError(f"unknown view kind {self.kind!r}")
        if self.kind == "temporal":
            if not self.time_steps or self.time_steps < 1:
                raise ValueError("temporal view needs time_steps >= 1")
            if not self.channels or self.channels < 1:
                raise ValueError("temporal view needs channels >= 1")
        elif self.kind == "static":
            if not self.channels or self.channels < 1:
                raise ValueError("static view needs channels >= 1")
        else:
            if not self.cardinality or self.cardinality < 2:
                raise ValueError("categorical view needs cardinality >= 2")

    @property
    def flat_dim(self) -> int:
        """Length of this view once flattened, the slot width for concatenation."""
        if self.kind == "temporal":
            return self.time_steps * self.channels
        if self.kind == "static":
            return self.channels
        return self.cardinality


@dataclass
class EncoderConfig:
    latent_dim: int = 128
    layers: int = 2
    dropout: float = 0.2
    conv_kernel: int = 3

    def __post_init__(self):
        if self.latent_dim < 1 or self.layers < 1:
            raise ValueError("latent_dim and layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def one_hot(index: int, cardinality: int) -> np.ndarray:
    """One-hot vector for a categorical code; raises on out-of-range codes."""
    idx = int(index)
    if not 0 <= idx < cardinality:
        raise ValueError(f"categorical code {idx} out of range [0, {cardinality})")
    out = np.zeros(cardinality)
    out[idx] = 1.0
    return out


def one_hot_batch(indices: np.ndarray, cardinality: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=int)
    if idx.min() < 0 or idx.max() >= cardinality:
        raise ValueError("categorical code out of range")
    out = np.zeros((idx.shape[0], cardinality))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


class TemporalEncoder(Module):
    """Conv1d stack with ReLU and dropout, mean-pooled over time, layer normalized.

    ``calls`` counts forward invocations; training asserts encoders run once
    per view per step no matter how many view combinations are fused.
    """

    def __init__(self, channels: int, cfg: EncoderConfig, rng: np.random.Generator):
        d = cfg.latent_dim
        self.convs = [Conv1d(channels if i == 0 else d, d, rng, kernel=cfg.conv_kernel)
                      for i in range(cfg.layers)]
        self.norm = LayerNorm(d)
        self.dropout = Dropout(cfg.dropout)
        self.calls = 0

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None,
                 train: bool = False) -> Tensor:
        if x.shape[-2] < 1:
            raise ValueError("temporal encoder needs a non-empty series")
        self.calls += 1
        out = x
        for conv in self.convs:
            out = self.dropout(conv(out).relu(), rng=rng, train=train)
        pooled = out.mean(axis=-2)
        return self.norm(pooled)


class StaticEncoder(Module):
    """Affine stack with ReLU and dropout, layer normalized."""

    def __init__(self, channels: int, cfg: EncoderConfig, rng: np.random.Generator):
        d = cfg.latent_dim
        self.affines = [Affine(channels if i == 0 else d, d, rng)
                        for i in range(cfg.layers)]
        self.norm = LayerNorm(d)
        self.dropout = Dropout(cfg.dropout)
        self.calls = 0

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None,
                 train: bool = False) -> Tensor:
        self.calls += 1
        out = x
        for affine in self.affines:
            out = self.dropout(affine(out).relu(), rng=rng, train=train)
        return self.norm(out)


def make_encoder(spec: ViewSpec, cfg: EncoderConfig, rng: np.random.Generator) -> Module:
    """Build the encoder matching a view's kind; categorical views reuse the MLP."""
    if spec.kind == "temporal":
        return TemporalEncoder(spec.channels, cfg, rng)
    if spec.kind == "static":
        return StaticEncoder(spec.channels, cfg, rng)
    return StaticEncoder(spec.cardinality, cfg, rng)
