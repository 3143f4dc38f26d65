"""Reusable layers: affine, 1D convolution over time, layer normalization,
dropout, LSTM cell, and multi-head self-attention.

All layers are pure functions of (input, parameters); dropout additionally
takes a generator and a train flag. Parameters live in small Module
containers so models can enumerate them for the optimizer and snapshots.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, concat


class Module:
    """Minimal parameter container.

    Walks its attributes in insertion order and yields every gradient-tracked
    Tensor, recursing into child modules and lists of modules. Order is
    deterministic, which keeps optimizer state and snapshots reproducible.
    """

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for name, value in vars(self).items():
            key = f"{prefix}.{name}" if prefix else name
            if isinstance(value, Tensor) and value.requires_grad:
                out.append((key, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(key))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{key}.{i}"))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


class Affine(Module):
    """y = x @ W + b over the last axis."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.W = glorot(rng, d_in, d_out, (d_in, d_out))
        self.b = Tensor(np.zeros(d_out), requires_grad=True)
        self.d_in = d_in
        self.d_out = d_out

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ValueError(f"affine expects last dim {self.d_in}, got {x.shape[-1]}")
        return x @ self.W + self.b


class Conv1d(Module):
    """Temporal convolution with symmetric zero padding, output length == input length.

    Input is (..., T, c_in); the kernel must be odd so 'same' padding stays
    symmetric. Realized as a sum of shifted tap matmuls, so gradients flow
    through existing primitives.
    """

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, kernel: int = 3):
        if kernel < 1 or kernel % 2 == 0:
            raise ValueError("kernel size must be odd and positive")
        self.W = glorot(rng, kernel * c_in, c_out, (kernel, c_in, c_out))
        self.b = Tensor(np.zeros(c_out), requires_grad=True)
        self.kernel = kernel
        self.c_in = c_in
        self.c_out = c_out

    def __call__(self, x: Tensor) -> Tensor:
        T = x.shape[-2]
        if T < 1:
            raise ValueError("conv1d needs at least one time step")
        if x.shape[-1] != self.c_in:
            raise ValueError(f"conv1d expects {self.c_in} channels, got {x.shape[-1]}")
        pad = self.kernel // 2
        xp = x.pad_axis(axis=-2, before=pad, after=pad)
        out = None
        for tau in range(self.kernel):
            sel = (Ellipsis, slice(tau, tau + T), slice(None))
            tap = xp[sel] @ self.W[tau]
            out = tap if out is None else out + tap
        return out + self.b


class LayerNorm(Module):
    """Normalize the last axis to zero mean and unit variance, then scale and shift.

    The variance guard eps is tiny (1e-12) so normalized variance is 1 up to
    1e-9 on ordinary inputs; a constant input maps to the shift vector.
    """

    def __init__(self, dim: int, eps: float = 1e-12):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.shift = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps
        self.dim = dim

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] < 2:
            raise ValueError("layer norm needs at least two features")
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        normalized = centered * (var + self.eps) ** -0.5
        return normalized * self.gain + self.shift


class Dropout:
    """Inverted dropout: scales kept units by 1/(1-p) at train time.

    Identity when rate is 0 or train is False; evaluation never drops.
    """

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None,
                 train: bool = False) -> Tensor:
        if not train or self.rate == 0.0:
            return x
        if rng is None:
            raise ValueError("train-time dropout needs a generator")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep) / keep
        return x * Tensor(mask)


class LSTMCell(Module):
    """Standard LSTM gate equations for one step.

    Gate weights are stored as one (d_in + d_h, 4*d_h) matrix in input,
    forget, output, candidate order.
    """

    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator,
                 forget_bias: float = 1.0):
        self.W = glorot(rng, d_in + d_h, 4 * d_h, (d_in + d_h, 4 * d_h))
        bias = np.zeros(4 * d_h)
        bias[d_h:2 * d_h] = forget_bias
        self.b = Tensor(bias, requires_grad=True)
        self.d_in = d_in
        self.d_h = d_h

    def step(self, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape[-1] != self.d_in:
            raise ValueError(f"lstm step expects input dim {self.d_in}, got {x.shape[-1]}")
        d = self.d_h
        z = concat([x, h_prev], axis=-1) @ self.W + self.b
        i = z[..., 0:d].sigmoid()
        f = z[..., d:2 * d].sigmoid()
        o = z[..., 2 * d:3 * d].sigmoid()
        g = z[..., 3 * d:4 * d].tanh()
        c = f * c_prev + i * g
        h = o * c.tanh()
        return h, c

    def zero_state(self, batch_shape: tuple = ()) -> tuple[Tensor, Tensor]:
        shape = batch_shape + (self.d_h,)
        return Tensor(np.zeros(shape)), Tensor(np.zeros(shape))


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention over a set of rows.

    Input is (n, d) or (batch, n, d). Per-head logits are Q K^T, optionally
    scaled by 1/sqrt(d/heads), plus a learned per-head scalar bias; head
    outputs are value projections concatenated back to width d. Dropout, when
    enabled, is applied to the attention probabilities.
    """

    def __init__(self, d: int, heads: int, rng: np.random.Generator,
                 scaling: bool = True, dropout: float = 0.0):
        if d % heads != 0:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.W_Q = glorot(rng, d, d, (d, d))
        self.W_K = glorot(rng, d, d, (d, d))
        self.W_V = glorot(rng, d, d, (d, d))
        self.bias = Tensor(np.zeros(heads), requires_grad=True)
        self.heads = heads
        self.d = d
        self.scaling = scaling
        self.dropout = Dropout(dropout)

    def __call__(self, z: Tensor, rng: np.random.Generator | None = None,
                 train: bool = False) -> Tensor:
        single = z.ndim == 2
        if single:
            z = z.reshape((1,) + z.shape)
        B, n, d = z.shape
        h, dh = self.heads, self.d // self.heads

        def split_heads(t: Tensor) -> Tensor:
            return t.reshape((B, n, h, dh)).transpose((0, 2, 1, 3))

        q = split_heads(z @ self.W_Q)
        k = split_heads(z @ self.W_K)
        v = split_heads(z @ self.W_V)
        logits = q @ k.transpose((0, 1, 3, 2))
        if self.scaling:
            logits = logits * (1.0 / np.sqrt(dh))
        logits = logits + self.bias.reshape((1, h, 1, 1))
        probs = logits.softmax(axis=-1)
        probs = self.dropout(probs, rng=rng, train=train)
        out = (probs @ v).transpose((0, 2, 1, 3)).reshape((B, n, d))
        return out[0] if single else out

    def attention_weights(self, z: Tensor) -> np.ndarray:
        """Evaluation-mode attention probabilities, shape (batch, heads, n, n)."""
        single = z.ndim == 2
        if single:
            z = z.reshape((1,) + z.shape)
        B, n, d = z.shape
        h, dh = self.heads, self.d // self.heads
        q = (z @ self.W_Q).reshape((B, n, h, dh)).transpose((0, 2, 1, 3))
        k = (z @ self.W_K).reshape((B, n, h, dh)).transpose((0, 2, 1, 3))
        logits = q @ k.transpose((0, 1, 3, 2))
        if self.scaling:
            logits = logits * (1.0 / np.sqrt(dh))
        logits = logits + self.bias.reshape((1, h, 1, 1))
        probs = logits.softmax(axis=-1)
        return probs.data[0] if single else probs.data
