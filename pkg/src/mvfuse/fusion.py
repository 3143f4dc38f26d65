"""Merge functions over the available view encodings.

Every dynamic merge (average, gated, cross-attention, memory) produces a
fused vector of the encoder width d no matter how many views are available,
which is what lets a model literally ignore missing views instead of imputing
them. Concatenation with zero imputation is kept as the fixed-size baseline.

All fuse methods take a full-length row list with None marking missing views;
rows are single encodings (d,) or batches (B, d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Dropout, LSTMCell, Module, MultiHeadAttention, glorot
from .tensor import Tensor, concat, stack

FUSION_KINDS = ("average", "gated", "cross", "memory", "concat")


@dataclass
class FusionConfig:
    """Fusion kind plus its hyperparameters.

    ``layers`` defaults to 1 for cross-attention and 2 for memory fusion when
    left unset. ``dropout`` hits attention probabilities (cross) or the
    sequence between stacked recurrent layers (memory).
    """

    kind: str = "average"
    heads: int = 8
    layers: int | None = None
    dropout: float = 0.4
    permute: bool = False
    attention_scaling: bool = True

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        if self.layers is None:
            self.layers = 2 if self.kind == "memory" else 1
        if self.layers < 1 or self.heads < 1:
            raise ValueError("layers and heads must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def _split_rows(rows: list) -> tuple[list[int], list[Tensor], bool]:
    """Available indices and their rows, promoted to (B, d); flags single-sample input."""
    avail = [i for i, r in enumerate(rows) if r is not None]
    if not avail:
        raise ValueError("fusion needs at least one available view")
    single = rows[avail[0]].ndim == 1
    promoted = [rows[i].reshape((1, -1)) if single else rows[i] for i in avail]
    return avail, promoted, single


class AverageFusion(Module):
    """Mean of the available encodings; permutation invariant by construction."""

    def __init__(self):
        self.calls = 0

    def fuse(self, rows: list, rng=None, train: bool = False) -> Tensor:
        self.calls += 1
        _, avail_rows, single = _split_rows(rows)
        fused = stack(avail_rows, axis=-2).mean(axis=-2)
        return fused[0] if single else fused


class GatedFusion(Module):
    """Data-driven per-dimension weighting across views.

    Logits come from the zero-imputed full stack (so they are computable for
    any availability pattern), but the per-dimension softmax across views
    excludes missing columns from the normalization, making their weights
    exact zeros.
    """

    def __init__(self, m: int, d: int, rng: np.random.Generator):
        self.W_G = glorot(rng, m * d, d * m, (m * d, d * m))
        self.b = Tensor(np.zeros(d * m), requires_grad=True)
        self.m = m
        self.d = d
        self.calls = 0

    def _full_stack(self, rows: list) -> tuple[Tensor, np.ndarray, bool]:
        avail, avail_rows, single = _split_rows(rows)
        batch = avail_rows[0].shape[0]
        zero = Tensor(np.zeros((batch, self.d)))
        by_slot = []
        it = iter(avail_rows)
        for v in range(self.m):
            by_slot.append(next(it) if v in avail else zero)
        available = np.zeros(self.m, dtype=bool)
        available[avail] = True
        return stack(by_slot, axis=-2), available, single

    def gate_weights(self, z_full: Tensor, available: np.ndarray) -> Tensor:
        """Per-dimension view weights, shape (..., d, m); missing columns are 0."""
        batch = z_full.shape[0]
        flat = z_full.reshape((batch, self.m * self.d))
        logits = (flat @ self.W_G + self.b).reshape((batch, self.d, self.m))
        return logits.softmax(axis=-1, exclude=~available)

    def fuse(self, rows: list, rng=None, train: bool = False) -> Tensor:
        self.calls += 1
        z_full, available, single = self._full_stack(rows)
        weights = self.gate_weights(z_full, available)
        fused = (weights.swapaxes(-1, -2) * z_full).sum(axis=-2)
        return fused[0] if single else fused


class CrossAttentionFusion(Module):
    """A learned fusion token queries the available views through self-attention.

    Only available views are stacked, each with its view-specific positional
    embedding, so missing views are never attended. The fused vector is the
    token's row after the final attention layer.
    """

    def __init__(self, m: int, d: int, cfg: FusionConfig, rng: np.random.Generator):
        self.token = glorot(rng, 1, d, (d,))
        self.positional = glorot(rng, m + 1, d, (m + 1, d))
        self.blocks = [MultiHeadAttention(d, cfg.heads, rng, scaling=cfg.attention_scaling,
                                          dropout=cfg.dropout)
                       for _ in range(cfg.layers)]
        self.m = m
        self.d = d
        self.calls = 0

    def fuse(self, rows: list, rng=None, train: bool = False) -> Tensor:
        self.calls += 1
        avail, avail_rows, single = _split_rows(rows)
        batch = avail_rows[0].shape[0]
        ones = Tensor(np.ones((batch, 1)))
        token_row = ones @ (self.token + self.positional[0]).reshape((1, self.d))
        sequence = [token_row]
        for v, row in zip(avail, avail_rows):
            sequence.append(row + self.positional[1 + v])
        z = stack(sequence, axis=-2)
        for block in self.blocks:
            z = block(z, rng=rng, train=train)
        fused = z[:, 0, :]
        return fused[0] if single else fused

    def token_attention(self, rows: list) -> np.ndarray:
        """First-layer token attention over (token + available views), eval mode.

        Shape (heads, 1 + m_avail) for single rows, batched otherwise.
        """
        avail, avail_rows, single = _split_rows(rows)
        batch = avail_rows[0].shape[0]
        ones = Tensor(np.ones((batch, 1)))
        token_row = ones @ (self.token + self.positional[0]).reshape((1, self.d))
        sequence = [token_row] + [row + self.positional[1 + v]
                                  for v, row in zip(avail, avail_rows)]
        z = stack(sequence, axis=-2)
        weights = self.blocks[0].attention_weights(z)[..., 0, :]
        return weights[0] if single else weights


class MemoryFusion(Module):
    """Recurrent fusion: a stacked bidirectional LSTM consumes the available
    encodings one view at a time from an empty initial memory; the fused
    vector is the final memory state.

    Views are fed in declaration order, so this merge is order sensitive; a
    random train-time permutation can be enabled to counter order bias.
    """

    def __init__(self, d: int, cfg: FusionConfig, rng: np.random.Generator):
        if d % 2 != 0:
            raise ValueError("memory fusion needs an even width for bidirection")
        half = d // 2
        self.forward_cells = [LSTMCell(d, half, rng) for _ in range(cfg.layers)]
        self.backward_cells = [LSTMCell(d, half, rng) for _ in range(cfg.layers)]
        self.dropout = Dropout(cfg.dropout)
        self.permute = cfg.permute
        self.d = d
        self.calls = 0

    @staticmethod
    def _run_direction(cell: LSTMCell, seq: list[Tensor]) -> tuple[list[Tensor], Tensor]:
        batch = seq[0].shape[0]
        h, c = cell.zero_state((batch,))
        outputs = []
        for x in seq:
            h, c = cell.step(x, h, c)
            outputs.append(h)
        return outputs, h

    def fuse(self, rows: list, rng=None, train: bool = False) -> Tensor:
        self.calls += 1
        _, avail_rows, single = _split_rows(rows)
        if self.permute and train:
            if rng is None:
                raise ValueError("permuted memory fusion needs a generator at train time")
            order = rng.permutation(len(avail_rows))
            avail_rows = [avail_rows[i] for i in order]
        seq = avail_rows
        final_fwd = final_bwd = None
        for layer, (fwd, bwd) in enumerate(zip(self.forward_cells, self.backward_cells)):
            if layer > 0 and train:
                seq = [self.dropout(x, rng=rng, train=train) for x in seq]
            out_fwd, final_fwd = self._run_direction(fwd, seq)
            out_bwd, final_bwd = self._run_direction(bwd, seq[::-1])
            out_bwd = out_bwd[::-1]
            seq = [concat([f, b], axis=-1) for f, b in zip(out_fwd, out_bwd)]
        fused = concat([final_fwd, final_bwd], axis=-1)
        return fused[0] if single else fused


class ConcatFusion(Module):
    """Feature-level concatenation with zero imputation; output width m*d."""

    def __init__(self, m: int, d: int):
        self.m = m
        self.d = d
        self.calls = 0

    def fuse(self, rows: list, rng=None, train: bool = False) -> Tensor:
        self.calls += 1
        avail, avail_rows, single = _split_rows(rows)
        batch = avail_rows[0].shape[0]
        zero = Tensor(np.zeros((batch, self.d)))
        it = iter(avail_rows)
        slots = [next(it) if v in avail else zero for v in range(self.m)]
        fused = concat(slots, axis=-1)
        return fused[0] if single else fused


def concat_zero_impute(items: list, slot_dims: list[int]) -> np.ndarray:
    """Concatenate flattened per-view arrays, filling missing slots with zeros.

    ``items[v]`` is a (batch, dims...) array or None; the output always has
    width sum(slot_dims) regardless of which views are missing.
    """
    if len(items) != len(slot_dims):
        raise ValueError("one slot dimension per view required")
    batch = None
    for item in items:
        if item is not None:
            batch = np.asarray(item).shape[0]
            break
    if batch is None:
        raise ValueError("concatenation needs at least one available view")
    parts = []
    for item, dim in zip(items, slot_dims):
        if item is None:
            parts.append(np.zeros((batch, dim)))
        else:
            arr = np.asarray(item, dtype=np.float64).reshape(batch, -1)
            if arr.shape[1] != dim:
                raise ValueError(f"view slot expects {dim} values, got {arr.shape[1]}")
            parts.append(arr)
    return np.concatenate(parts, axis=1)


def make_fusion(cfg: FusionConfig, m: int, d: int, rng: np.random.Generator) -> Module:
    if cfg.kind == "average":
        return AverageFusion()
    if cfg.kind == "gated":
        return GatedFusion(m, d, rng)
    if cfg.kind == "cross":
        return CrossAttentionFusion(m, d, cfg, rng)
    if cfg.kind == "memory":
        return MemoryFusion(d, cfg, rng)
    return ConcatFusion(m, d)


def fused_width(cfg: FusionConfig, m: int, d: int) -> int:
    """Width of the fused vector feeding the prediction head."""
    return m * d if cfg.kind == "concat" else d
