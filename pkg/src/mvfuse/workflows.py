"""End-to-end workflows wiring configs to data, training, and evaluation.

These functions back the command line but are plain Python so tests and
notebooks can drive them directly. Every artifact embeds the resolved config
and seed, and all randomness comes from named streams under the config seed,
so reruns are byte-for-byte reproducible.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from . import data as data_mod
from .augmentation import AugPolicy
from .config import ConfigError, ExperimentConfig, resolved_dict
from .evaluation import EvalReport, MissingScenario, evaluate_scenarios, sweep
from .fusion import FusionConfig
from .gradcheck import DEFAULT_TOLERANCE, run_suite
from .model import build_model, load_model, save_model
from .rng import stream
from .training import TrainResult, train_model


def load_raw_dataset(cfg: ExperimentConfig) -> data_mod.MultiViewDataset:
    if cfg.data.source == "manifest":
        return data_mod.load_dataset(cfg.data.manifest)
    return data_mod.generate_synthetic(cfg.data.synthetic)


def split_dataset(cfg: ExperimentConfig, ds: data_mod.MultiViewDataset):
    """Deterministic train/validation split plus train-fitted normalization."""
    rng = stream(cfg.seed, "data", "split")
    train_idx, val_idx = data_mod.train_val_split(ds.n_samples, cfg.data.val_fraction, rng)
    if cfg.data.normalize:
        stats = data_mod.zscore_fit(ds, train_idx)
        ds = data_mod.zscore_apply(ds, stats)
    return ds.subset(train_idx), ds.subset(val_idx)


def prepare_data(cfg: ExperimentConfig):
    return split_dataset(cfg, load_raw_dataset(cfg))


def default_scenarios(cfg: ExperimentConfig, view_ids: list[str]) -> list[MissingScenario]:
    if cfg.eval.scenarios:
        return list(cfg.eval.scenarios)
    view = cfg.eval.view or view_ids[0]
    return [MissingScenario(kind="none"),
            MissingScenario(kind="only_missing", view=view),
            MissingScenario(kind="only_available", view=view)]


def focus_view(cfg: ExperimentConfig, view_ids: list[str]) -> str:
    view = cfg.eval.view or view_ids[0]
    if view not in view_ids:
        raise ConfigError(f"eval.view {view!r} is not a declared view")
    return view


def fit_model(cfg: ExperimentConfig, ds_train, ds_val, init_stream=("init",),
              aug: AugPolicy | None = None, fusion: FusionConfig | None = None):
    """Build and train one model from config pieces; returns (model, result)."""
    aug = aug if aug is not None else cfg.aug
    fusion = fusion if fusion is not None else cfg.fusion
    model = build_model(ds_train.view_specs, cfg.encoder, fusion, ds_train.task,
                        ds_train.n_outputs, aug.level, stream(cfg.seed, *init_stream))
    result = train_model(model, ds_train, ds_val, aug, cfg.train)
    return model, result


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_log(path: Path, result: TrainResult) -> None:
    with open(path, "w", newline="\n") as fh:
        for record in result.log:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def run_synth(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    """Generate the configured synthetic dataset and write CSVs plus manifest."""
    if cfg.data.synthetic is None:
        raise ConfigError("synth needs a data.synthetic section")
    ds = data_mod.generate_synthetic(cfg.data.synthetic)
    out = Path(out_dir)
    manifest = data_mod.save_dataset(ds, out)
    _write_json(out / "resolved_config.json", {"config": resolved_dict(cfg),
                                               "seed": cfg.seed})
    return manifest


def run_train(cfg: ExperimentConfig, out_dir: str | Path):
    """Train one model per the config; writes snapshot, log, resolved config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds_train, ds_val = prepare_data(cfg)
    model, result = fit_model(cfg, ds_train, ds_val)
    save_model(model, cfg.encoder, cfg.fusion, ds_train.n_outputs, out)
    _write_log(out / "train_log.jsonl", result)
    _write_json(out / "resolved_config.json", {"config": resolved_dict(cfg),
                                               "seed": cfg.seed})
    return model, result


def _model_for_eval(cfg: ExperimentConfig, out: Path, model_dir: str | Path | None,
                    ds_train, ds_val):
    if model_dir is not None and (Path(model_dir) / "model.json").exists():
        return load_model(model_dir)
    if (out / "model.json").exists():
        return load_model(out)
    model, result = fit_model(cfg, ds_train, ds_val)
    save_model(model, cfg.encoder, cfg.fusion, ds_train.n_outputs, out)
    _write_log(out / "train_log.jsonl", result)
    return model


def run_evaluate(cfg: ExperimentConfig, out_dir: str | Path,
                 model_dir: str | Path | None = None) -> EvalReport:
    """Evaluate the configured scenarios on the validation data.

    With eval.folds > 1 this runs repeated k-fold cross-validation, training
    one model per fold; otherwise it reuses (or trains) a single model on the
    configured split.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = EvalReport()
    if cfg.eval.folds > 1:
        ds = load_raw_dataset(cfg)
        folds = data_mod.kfold_indices(ds.n_samples, cfg.eval.folds,
                                       cfg.eval.repeats, cfg.seed)
        for fold_id, (train_idx, val_idx) in enumerate(folds):
            work = ds
            if cfg.data.normalize:
                stats = data_mod.zscore_fit(work, train_idx)
                work = data_mod.zscore_apply(work, stats)
            ds_train, ds_val = work.subset(train_idx), work.subset(val_idx)
            model, _ = fit_model(cfg, ds_train, ds_val, init_stream=("init", fold_id))
            scenarios = default_scenarios(cfg, ds_val.view_ids)
            report.extend(evaluate_scenarios(model, ds_val, scenarios, cfg.seed,
                                             fold=fold_id))
    else:
        ds_train, ds_val = prepare_data(cfg)
        model = _model_for_eval(cfg, out, model_dir, ds_train, ds_val)
        scenarios = default_scenarios(cfg, ds_val.view_ids)
        report = evaluate_scenarios(model, ds_val, scenarios, cfg.seed)
    report.to_csv(out / "report.csv")
    report.write_summary(out / "summary.json", config=resolved_dict(cfg), seed=cfg.seed)
    return report


def run_sweep(cfg: ExperimentConfig, out_dir: str | Path,
              model_dir: str | Path | None = None) -> EvalReport:
    """Fraction-of-missing sweep over the focus view on the validation data."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds_train, ds_val = prepare_data(cfg)
    model = _model_for_eval(cfg, out, model_dir, ds_train, ds_val)
    view = focus_view(cfg, ds_val.view_ids)
    report = sweep(model, ds_val, view, cfg.eval.grid, cfg.seed)
    report.to_csv(out / "report.csv")
    report.write_summary(out / "summary.json", config=resolved_dict(cfg), seed=cfg.seed)
    return report


def run_gradcheck(out_dir: str | Path, seeds: int = 20) -> dict[str, float]:
    """Finite-difference battery over every layer and fusion function."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_suite(seeds=range(seeds))
    worst = max(results.values())
    payload = {"cases": results, "max_relative_error": worst,
               "tolerance": DEFAULT_TOLERANCE, "passed": worst < DEFAULT_TOLERANCE}
    _write_json(out / "gradcheck.json", payload)
    return results


ABLATION_GRID = [("none", "input"), ("none", "feature"),
                 ("sensd", "input"), ("sensd", "feature"),
                 ("com", "input"), ("com", "feature")]


def run_ablate(cfg: ExperimentConfig, out_dir: str | Path) -> list[dict]:
    """Train the 3x2 grid of augmentation kind by level on one dataset.

    Input-level cells use concatenation fusion, feature-level cells the
    average merge. Each cell reports the primary metric without missing
    views, with the focus view missing, and with only the focus view.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds_train, ds_val = prepare_data(cfg)
    view = focus_view(cfg, ds_val.view_ids)
    scenarios = [MissingScenario(kind="none"),
                 MissingScenario(kind="only_missing", view=view),
                 MissingScenario(kind="only_available", view=view)]
    metric = "f1" if ds_val.task == "classification" else "r2"
    rows = []
    for kind, level in ABLATION_GRID:
        aug = AugPolicy(kind=kind, level=level, tempd_ratio=cfg.aug.tempd_ratio)
        fusion = replace(cfg.fusion, kind="concat" if level == "input" else "average")
        model, _ = fit_model(cfg, ds_train, ds_val, init_stream=("init", kind, level),
                             aug=aug, fusion=fusion)
        report = evaluate_scenarios(model, ds_val, scenarios, cfg.seed)
        row = {"aug": kind, "level": level}
        for scenario in scenarios:
            row[scenario.key()] = report.values(scenario.key(), metric)[0]
        rows.append(row)
    header = ["aug", "level"] + [s.key() for s in scenarios]
    with open(out / "ablation.csv", "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(row[h]) if h in ("aug", "level") else repr(row[h])
                              for h in header) + "\n")
    _write_json(out / "ablation.json", {"metric": metric, "rows": rows,
                                        "config": resolved_dict(cfg), "seed": cfg.seed})
    return rows
