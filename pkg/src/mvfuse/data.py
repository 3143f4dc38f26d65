"""Multi-view datasets: synthetic generation, CSV ingestion, normalization.

The synthetic generator draws a shared latent factor per sample and renders
each view as a noisy linear readout of a mix between that shared factor and a
view-private one; the redundancy knob controls how much signal the views
share, which is what makes missing-view robustness measurable. Datasets round
trip through plain CSV files plus a JSON manifest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import ViewSpec
from .rng import stream


class DataError(Exception):
    """Base class for dataset loading problems."""


class RowCountError(DataError):
    """Row counts disagree between view files and targets."""


class UnknownViewError(DataError):
    """A view id is not declared in the dataset."""


class MalformedFieldError(DataError):
    """A CSV field could not be parsed as the expected number."""


class MultiViewDataset:
    """Per-sample view arrays plus targets.

    ``views[id]`` is (N, T, c) for temporal views, (N, c) for static views,
    and (N,) integer codes for categorical views. Targets are integer class
    labels or float regression values.
    """

    def __init__(self, view_specs: list[ViewSpec], views: dict[str, np.ndarray],
                 y: np.ndarray, task: str, n_classes: int | None = None):
        if task not in ("classification", "regression"):
            raise ValueError(f"unknown task {task!r}")
        self.view_specs = list(view_specs)
        self.views = dict(views)
        self.y = np.asarray(y)
        self.task = task
        self.n_classes = n_classes
        n = self.y.shape[0]
        for spec in self.view_specs:
            if spec.id not in self.views:
                raise UnknownViewError(f"view {spec.id!r} missing from data")
            rows = self.views[spec.id].shape[0]
            if rows != n:
                raise RowCountError(
                    f"view {spec.id!r} has {rows} samples, targets have {n}")

    @property
    def n_samples(self) -> int:
        return int(self.y.shape[0])

    @property
    def view_ids(self) -> list[str]:
        return [s.id for s in self.view_specs]

    def spec(self, view_id: str) -> ViewSpec:
        for s in self.view_specs:
            if s.id == view_id:
                return s
        raise UnknownViewError(f"view {view_id!r} not declared")

    def view_index(self, view_id: str) -> int:
        for i, s in enumerate(self.view_specs):
            if s.id == view_id:
                return i
        raise UnknownViewError(f"view {view_id!r} not declared")

    def subset(self, indices: np.ndarray) -> "MultiViewDataset":
        views = {vid: arr[indices] for vid, arr in self.views.items()}
        return MultiViewDataset(self.view_specs, views, self.y[indices],
                                self.task, self.n_classes)

    @property
    def n_outputs(self) -> int:
        return self.n_classes if self.task == "classification" else 1


# -- synthetic generation ------------------------------------------------------


@dataclass
class SyntheticViewConfig:
    """How to render one synthetic view from the latent factors."""

    id: str
    kind: str = "static"
    time_steps: int | None = None
    channels: int | None = None
    cardinality: int | None = None
    noise: float = 0.1
    redundancy: float = 0.8
    loading_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.redundancy <= 1.0:
            raise ValueError("redundancy must be in [0, 1]")
        if self.noise < 0.0:
            raise ValueError("noise must be >= 0")

    def spec(self) -> ViewSpec:
        return ViewSpec(id=self.id, kind=self.kind, time_steps=self.time_steps,
                        channels=self.channels, cardinality=self.cardinality)


@dataclass
class SyntheticConfig:
    n_samples: int = 1000
    latent_dim: int = 8
    task: str = "classification"
    classes: int = 3
    views: list[SyntheticViewConfig] = field(default_factory=list)
    basis_order: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if not self.views:
            raise ValueError("need at least one view")
        if self.task == "classification" and self.classes < 2:
            raise ValueError("classification needs >= 2 classes")


def _temporal_basis(order: int, time_steps: int) -> np.ndarray:
    """Smooth low-order cosine basis, shape (order, T)."""
    t = (np.arange(time_steps) + 0.5) / time_steps
    return np.stack([np.cos(np.pi * j * t) for j in range(order)])


def generate_synthetic(cfg: SyntheticConfig) -> MultiViewDataset:
    """Sample a dataset from the shared-latent-factor model.

    Each view observes loading @ (rho * u + (1 - rho) * u_private) plus
    Gaussian noise; temporal views render that projection through a smooth
    cosine basis over time. Labels are argmax of a fixed linear readout of
    the shared factor (classification) or a linear readout (regression).
    """
    k = cfg.latent_dim
    n = cfg.n_samples
    rng = stream(cfg.seed, "data")
    u = rng.standard_normal((n, k))

    views: dict[str, np.ndarray] = {}
    specs: list[ViewSpec] = []
    for vcfg in cfg.views:
        spec = vcfg.spec()
        specs.append(spec)
        load_rng = np.random.default_rng(vcfg.loading_seed)
        private = rng.standard_normal((n, k))
        mix = vcfg.redundancy * u + (1.0 - vcfg.redundancy) * private
        if spec.kind == "temporal":
            c, T, j = spec.channels, spec.time_steps, cfg.basis_order
            loading = load_rng.standard_normal((j, c, k)) / np.sqrt(k)
            basis = _temporal_basis(j, T)
            coeffs = np.einsum("nk,jck->njc", mix, loading)
            series = np.einsum("jt,njc->ntc", basis, coeffs)
            series += vcfg.noise * rng.standard_normal(series.shape)
            views[spec.id] = series
        elif spec.kind == "static":
            c = spec.channels
            loading = load_rng.standard_normal((c, k)) / np.sqrt(k)
            x = mix @ loading.T + vcfg.noise * rng.standard_normal((n, c))
            views[spec.id] = x
        else:
            loading = load_rng.standard_normal(k) / np.sqrt(k)
            raw = mix @ loading + vcfg.noise * rng.standard_normal(n)
            edges = np.quantile(raw, np.linspace(0, 1, spec.cardinality + 1)[1:-1])
            views[spec.id] = np.digitize(raw, edges).astype(np.int64)

    label_rng = np.random.default_rng(cfg.seed + 1_000_003)
    if cfg.task == "classification":
        readout = label_rng.standard_normal((cfg.classes, k))
        y = np.argmax(u @ readout.T, axis=1).astype(np.int64)
        n_classes = cfg.classes
    else:
        readout = label_rng.standard_normal(k) / np.sqrt(k)
        y = u @ readout
        n_classes = None
    return MultiViewDataset(specs, views, y, cfg.task, n_classes)


# -- splits ---------------------------------------------------------------------


def train_val_split(n: int, val_fraction: float,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    n_val = max(1, int(round(val_fraction * n)))
    if n_val >= n:
        raise ValueError("split leaves no training samples")
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def kfold_indices(n: int, folds: int = 5, repeats: int = 1,
                  seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train, validation) index pairs for repeated k-fold cross-validation."""
    if folds < 2:
        raise ValueError("k-fold needs k >= 2")
    out = []
    for rep in range(repeats):
        perm = stream(seed, "folds", rep).permutation(n)
        parts = np.array_split(perm, folds)
        for i in range(folds):
            val = np.sort(parts[i])
            train = np.sort(np.concatenate([parts[j] for j in range(folds) if j != i]))
            out.append((train, val))
    return out


# -- z-score normalization -------------------------------------------------------


def zscore_fit(ds: MultiViewDataset, indices: np.ndarray | None = None) -> dict:
    """Per-channel mean and std from the given (training) rows only.

    Categorical views are skipped. Constant channels get std 1 so they map
    to zero rather than blowing up.
    """
    stats: dict[str, dict[str, list[float]]] = {}
    for spec in ds.view_specs:
        if spec.kind == "categorical":
            continue
        arr = ds.views[spec.id]
        rows = arr if indices is None else arr[indices]
        flat = rows.reshape(-1, rows.shape[-1])
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        stats[spec.id] = {"mean": mean.tolist(), "std": std.tolist()}
    return stats


def zscore_apply(ds: MultiViewDataset, stats: dict) -> MultiViewDataset:
    views = {}
    for spec in ds.view_specs:
        arr = ds.views[spec.id]
        if spec.id in stats:
            mean = np.asarray(stats[spec.id]["mean"])
            std = np.asarray(stats[spec.id]["std"])
            views[spec.id] = (arr - mean) / std
        else:
            views[spec.id] = arr
    return MultiViewDataset(ds.view_specs, views, ds.y, ds.task, ds.n_classes)


def zscore_invert(ds: MultiViewDataset, stats: dict) -> MultiViewDataset:
    views = {}
    for spec in ds.view_specs:
        arr = ds.views[spec.id]
        if spec.id in stats:
            mean = np.asarray(stats[spec.id]["mean"])
            std = np.asarray(stats[spec.id]["std"])
            views[spec.id] = arr * std + mean
        else:
            views[spec.id] = arr
    return MultiViewDataset(ds.view_specs, views, ds.y, ds.task, ds.n_classes)


# -- CSV and manifest round trip ----------------------------------------------


def _float_field(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise MalformedFieldError(f"{where}: cannot parse {text!r} as a number") from exc


def save_dataset(ds: MultiViewDataset, out_dir: str | Path) -> Path:
    """Write one CSV per view plus targets and a JSON manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"views": [], "targets": {"path": "targets.csv", "task": ds.task}}
    if ds.n_classes is not None:
        manifest["targets"]["classes"] = ds.n_classes
    for spec in ds.view_specs:
        path = f"view_{spec.id}.csv"
        arr = ds.views[spec.id]
        entry = {"id": spec.id, "kind": spec.kind, "path": path}
        with open(out / path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if spec.kind == "temporal":
                entry["dims"] = [spec.time_steps, spec.channels]
                writer.writerow(["sample_id", "t"] + [f"c{j}" for j in range(spec.channels)])
                for i in range(arr.shape[0]):
                    for t in range(arr.shape[1]):
                        writer.writerow([i, t] + [repr(float(v)) for v in arr[i, t]])
            elif spec.kind == "static":
                entry["dims"] = [spec.channels]
                writer.writerow([f"c{j}" for j in range(spec.channels)])
                for row in arr:
                    writer.writerow([repr(float(v)) for v in row])
            else:
                entry["cardinality"] = spec.cardinality
                writer.writerow(["code"])
                for v in arr:
                    writer.writerow([int(v)])
        manifest["views"].append(entry)
    with open(out / "targets.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"])
        for v in ds.y:
            writer.writerow([int(v) if ds.task == "classification" else repr(float(v))])
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_dataset(manifest_path: str | Path) -> MultiViewDataset:
    """Load a dataset from its manifest; all view files must agree on row count."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = manifest_path.parent

    targets = manifest["targets"]
    task = targets["task"]
    target_file = base / targets["path"]
    if not target_file.exists():
        raise FileNotFoundError(f"targets file not found: {target_file}")
    y_vals = []
    with open(target_file, newline="") as fh:
        reader = csv.DictReader(fh)
        for ln, row in enumerate(reader, start=2):
            y_vals.append(_float_field(row["y"], f"{target_file}:{ln}"))
    y = np.asarray(y_vals)
    n = y.shape[0]
    if task == "classification":
        y = y.astype(np.int64)

    specs: list[ViewSpec] = []
    views: dict[str, np.ndarray] = {}
    for entry in manifest["views"]:
        vid, kind = entry["id"], entry["kind"]
        path = base / entry["path"]
        if not path.exists():
            raise FileNotFoundError(f"view file not found: {path}")
        if kind == "temporal":
            T, c = entry["dims"]
            spec = ViewSpec(id=vid, kind=kind, time_steps=T, channels=c)
            arr = np.full((n, T, c), np.nan)
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                for ln, row in enumerate(reader, start=2):
                    where = f"{path}:{ln}"
                    i = int(_float_field(row[0], where))
                    t = int(_float_field(row[1], where))
                    if not 0 <= i < n:
                        raise RowCountError(
                            f"view {vid!r} references sample {i}, targets have {n} rows")
                    if not 0 <= t < T:
                        raise RowCountError(f"view {vid!r} has step {t} outside 0..{T - 1}")
                    arr[i, t] = [_float_field(v, where) for v in row[2:]]
            if np.isnan(arr).any():
                raise RowCountError(f"view {vid!r} is missing (sample, step) rows")
        elif kind == "static":
            (c,) = entry["dims"]
            spec = ViewSpec(id=vid, kind=kind, channels=c)
            rows = []
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                next(reader)
                for ln, row in enumerate(reader, start=2):
                    rows.append([_float_field(v, f"{path}:{ln}") for v in row])
            arr = np.asarray(rows).reshape(-1, c) if rows else np.zeros((0, c))
            if arr.shape[0] != n:
                raise RowCountError(
                    f"view {vid!r} has {arr.shape[0]} samples, targets have {n}")
        elif kind == "categorical":
            card = entry["cardinality"]
            spec = ViewSpec(id=vid, kind=kind, cardinality=card)
            codes = []
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                next(reader)
                for ln, row in enumerate(reader, start=2):
                    codes.append(int(_float_field(row[0], f"{path}:{ln}")))
            arr = np.asarray(codes, dtype=np.int64)
            if arr.shape[0] != n:
                raise RowCountError(
                    f"view {vid!r} has {arr.shape[0]} samples, targets have {n}")
        else:
            raise UnknownViewError(f"view {vid!r} has unknown kind {kind!r}")
        specs.append(spec)
        views[vid] = arr

    n_classes = targets.get("classes")
    if task == "classification" and n_classes is None:
        n_classes = int(y.max()) + 1
    ds = MultiViewDataset(specs, views, y, task, n_classes)
    if "norm_stats" in manifest:
        ds = zscore_apply(ds, manifest["norm_stats"])
    return ds
