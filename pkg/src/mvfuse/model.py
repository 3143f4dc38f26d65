"""Model assembly: per-view encoders, a merge function, and a prediction head.

Two families cover all configurations. The feature-fusion family runs one
encoder per view and merges the encodings; missing views are either ignored
at the merge (feature level) or zero-imputed in the raw input (input level).
The input-concat family is the classical input-level baseline: one MLP over
the flattened, zero-imputed concatenation of all views.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoders import (EncoderConfig, StaticEncoder, ViewSpec, make_encoder,
                       one_hot_batch)
from .fusion import FusionConfig, concat_zero_impute, fused_width, make_fusion
from .layers import Affine, Module
from .tensor import Tensor, no_grad

LEVELS = ("input", "feature")


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def batch_views(views: dict[str, np.ndarray], indices) -> dict[str, np.ndarray]:
    return {vid: arr[indices] for vid, arr in views.items()}


class _BaseModel(Module):
    """Shared prediction plumbing for both model families."""

    view_specs: list[ViewSpec]
    task: str
    level: str

    @property
    def view_ids(self) -> list[str]:
        return [s.id for s in self.view_specs]

    def forward_masked(self, views: dict[str, np.ndarray], mask: tuple[int, ...],
                       rng=None, train: bool = False) -> Tensor:
        raise NotImplementedError

    def predict(self, views: dict[str, np.ndarray],
                available: np.ndarray) -> np.ndarray:
        """Evaluation-mode predictions under per-sample availability.

        ``available`` is a boolean (N, m) matrix. Samples are grouped by
        availability pattern so each group runs as one batch; outputs are
        class probabilities (N, K) or regression values (N,).
        """
        n = available.shape[0]
        patterns, inverse = np.unique(available, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)  # 2-D on some numpy versions
        out = None
        with no_grad():
            for gi in range(patterns.shape[0]):
                idx = np.flatnonzero(inverse == gi)
                mask = tuple(int(v) for v in np.flatnonzero(patterns[gi]))
                preds = self.forward_masked(batch_views(views, idx), mask).data
                if self.task == "classification":
                    preds = _softmax_rows(preds)
                else:
                    preds = preds[:, 0]
                if out is None:
                    out = np.zeros((n,) + preds.shape[1:])
                out[idx] = preds
        return out


class FeatureFusionModel(_BaseModel):
    """Encoders per view, merge function, one-layer prediction head.

    The head consumes width d for dynamic merges and m*d for feature-level
    concatenation. At input level the model zero-imputes the raw data of
    missing views and always fuses all m encodings.
    """

    def __init__(self, view_specs: list[ViewSpec], encoder_cfg: EncoderConfig,
                 fusion_cfg: FusionConfig, task: str, n_outputs: int,
                 rng: np.random.Generator, level: str = "feature"):
        if level not in LEVELS:
            raise ValueError(f"unknown level {level!r}")
        m, d = len(view_specs), encoder_cfg.latent_dim
        self.view_specs = list(view_specs)
        self.encoders = [make_encoder(spec, encoder_cfg, rng) for spec in self.view_specs]
        self.fusion = make_fusion(fusion_cfg, m, d, rng)
        self.head = Affine(fused_width(fusion_cfg, m, d), n_outputs, rng)
        self.task = task
        self.level = level
        self.head_calls = 0

    def _encoder_input(self, spec: ViewSpec, arr: np.ndarray) -> Tensor:
        if spec.kind == "categorical":
            return Tensor(one_hot_batch(arr, spec.cardinality))
        return Tensor(arr)

    def encode_view(self, index: int, arr: np.ndarray, rng=None,
                    train: bool = False) -> Tensor:
        spec = self.view_specs[index]
        return self.encoders[index](self._encoder_input(spec, arr), rng=rng, train=train)

    def encode_all(self, views: dict[str, np.ndarray], rng=None,
                   train: bool = False) -> list[Tensor]:
        return [self.encode_view(i, views[spec.id], rng=rng, train=train)
                for i, spec in enumerate(self.view_specs)]

    def fuse_head(self, rows: list, rng=None, train: bool = False) -> Tensor:
        self.head_calls += 1
        fused = self.fusion.fuse(rows, rng=rng, train=train)
        return self.head(fused)

    def forward_masked(self, views: dict[str, np.ndarray], mask: tuple[int, ...],
                       rng=None, train: bool = False) -> Tensor:
        if self.level == "input":
            rows = []
            for i, spec in enumerate(self.view_specs):
                if spec.kind == "categorical":
                    x = one_hot_batch(views[spec.id], spec.cardinality)
                else:
                    x = np.asarray(views[spec.id], dtype=np.float64)
                if i not in mask:
                    x = np.zeros_like(x)
                rows.append(self.encoders[i](Tensor(x), rng=rng, train=train))
            return self.fuse_head(rows, rng=rng, train=train)
        rows = [self.encode_view(i, views[self.view_specs[i].id], rng=rng, train=train)
                if i in mask else None
                for i in range(len(self.view_specs))]
        return self.fuse_head(rows, rng=rng, train=train)


class InputConcatModel(_BaseModel):
    """Input-level fusion baseline: zero-imputed flat concatenation into one MLP."""

    def __init__(self, view_specs: list[ViewSpec], encoder_cfg: EncoderConfig,
                 task: str, n_outputs: int, rng: np.random.Generator):
        self.view_specs = list(view_specs)
        self.slot_dims = [spec.flat_dim for spec in self.view_specs]
        self.encoder = StaticEncoder(sum(self.slot_dims), encoder_cfg, rng)
        self.head = Affine(encoder_cfg.latent_dim, n_outputs, rng)
        self.task = task
        self.level = "input"
        self.head_calls = 0

    def _flat_views(self, views: dict[str, np.ndarray],
                    mask: tuple[int, ...]) -> np.ndarray:
        items = []
        for i, spec in enumerate(self.view_specs):
            if i not in mask:
                items.append(None)
            elif spec.kind == "categorical":
                items.append(one_hot_batch(views[spec.id], spec.cardinality))
            else:
                arr = np.asarray(views[spec.id], dtype=np.float64)
                items.append(arr.reshape(arr.shape[0], -1))
        return concat_zero_impute(items, self.slot_dims)

    def forward_masked(self, views: dict[str, np.ndarray], mask: tuple[int, ...],
                       rng=None, train: bool = False) -> Tensor:
        self.head_calls += 1
        flat = Tensor(self._flat_views(views, mask))
        return self.head(self.encoder(flat, rng=rng, train=train))


def build_model(view_specs: list[ViewSpec], encoder_cfg: EncoderConfig,
                fusion_cfg: FusionConfig, task: str, n_outputs: int,
                level: str, rng: np.random.Generator) -> _BaseModel:
    """Pick the model family for a fusion kind and missing-handling level."""
    if fusion_cfg.kind == "concat" and level == "input":
        return InputConcatModel(view_specs, encoder_cfg, task, n_outputs, rng)
    return FeatureFusionModel(view_specs, encoder_cfg, fusion_cfg, task,
                              n_outputs, rng, level=level)


# -- snapshots -------------------------------------------------------------------


def save_model(model: _BaseModel, encoder_cfg: EncoderConfig, fusion_cfg: FusionConfig,
               n_outputs: int, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arch = {
        "views": [vars(s) for s in model.view_specs],
        "encoder": vars(encoder_cfg),
        "fusion": vars(fusion_cfg),
        "task": model.task,
        "n_outputs": n_outputs,
        "level": model.level,
    }
    with open(out / "model.json", "w") as fh:
        json.dump(arch, fh, indent=2, sort_keys=True)
        fh.write("\n")
    arrays = {name: p.data for name, p in model.named_parameters()}
    np.savez(out / "model.npz", **arrays)
    return out / "model.json"


def load_model(model_dir: str | Path) -> _BaseModel:
    model_dir = Path(model_dir)
    with open(model_dir / "model.json") as fh:
        arch = json.load(fh)
    specs = [ViewSpec(**entry) for entry in arch["views"]]
    encoder_cfg = EncoderConfig(**arch["encoder"])
    fusion_cfg = FusionConfig(**arch["fusion"])
    model = build_model(specs, encoder_cfg, fusion_cfg, arch["task"],
                        arch["n_outputs"], arch["level"], np.random.default_rng(0))
    with np.load(model_dir / "model.npz") as arrays:
        params = dict(model.named_parameters())
        if set(arrays.files) != set(params):
            raise ValueError("snapshot parameters do not match the architecture")
        for name, p in params.items():
            p.data = arrays[name]
    return model
