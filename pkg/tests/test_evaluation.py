"""Evaluation: missing-view simulation, metric oracles, sweeps, reports."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvfuse.data import SyntheticConfig, SyntheticViewConfig, generate_synthetic
from mvfuse.encoders import EncoderConfig
from mvfuse.evaluation import (EvalReport, MissingScenario, auc_pr,
                               class_change_ratio, deformation, evaluate_scenarios,
                               f1_macro, mape, prs, r2, scenario_availability,
                               sweep)
from mvfuse.fusion import FusionConfig
from mvfuse.model import build_model

VIEWS = ["optical", "radar", "weather", "soil"]


class TestScenarioAvailability:
    def test_fraction_zero_keeps_everything(self):
        avail = scenario_availability(MissingScenario("fraction", "radar", 0.0),
                                      50, VIEWS, seed=1)
        assert avail.all()

    def test_only_available_keeps_exactly_one_view(self):
        avail = scenario_availability(MissingScenario("only_available", "optical"),
                                      10, VIEWS, seed=1)
        np.testing.assert_array_equal(avail[:, 0], np.ones(10, bool))
        assert not avail[:, 1:].any()

    def test_only_missing_drops_exactly_one_view(self):
        avail = scenario_availability(MissingScenario("only_missing", "weather"),
                                      10, VIEWS, seed=1)
        assert not avail[:, 2].any()
        assert avail[:, [0, 1, 3]].all()

    def test_fraction_half_masks_exact_count_reproducibly(self):
        scenario = MissingScenario("fraction", "radar", 0.5)
        a = scenario_availability(scenario, 100, VIEWS, seed=3)
        b = scenario_availability(scenario, 100, VIEWS, seed=3)
        np.testing.assert_array_equal(a, b)
        assert (~a[:, 1]).sum() == 50
        assert a[:, [0, 2, 3]].all()

    def test_fraction_masks_are_nested_across_p(self):
        low = scenario_availability(MissingScenario("fraction", "radar", 0.3),
                                    100, VIEWS, seed=3)
        high = scenario_availability(MissingScenario("fraction", "radar", 0.7),
                                     100, VIEWS, seed=3)
        assert set(np.flatnonzero(~low[:, 1])) <= set(np.flatnonzero(~high[:, 1]))

    def test_unknown_view_rejected(self):
        from mvfuse.data import UnknownViewError
        with pytest.raises(UnknownViewError):
            scenario_availability(MissingScenario("only_missing", "thermal"),
                                  5, VIEWS, seed=0)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            MissingScenario("only_missing")
        with pytest.raises(ValueError):
            MissingScenario("fraction", "radar", 1.5)
        with pytest.raises(ValueError):
            MissingScenario("sometimes", "radar")


def brute_force_f1(y, yhat):
    classes = sorted(set(y) | set(yhat))
    scores = []
    for c in classes:
        tp = sum(1 for a, b in zip(y, yhat) if a == c and b == c)
        fp = sum(1 for a, b in zip(y, yhat) if a != c and b == c)
        fn = sum(1 for a, b in zip(y, yhat) if a == c and b != c)
        scores.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return sum(scores) / len(scores)


def brute_force_auc_pr(y, scores):
    """Average precision by walking every distinct threshold."""
    thresholds = sorted(set(scores), reverse=True)
    n_pos = sum(y)
    prev_recall = 0.0
    area = 0.0
    for th in thresholds:
        predicted = [s >= th for s in scores]
        tp = sum(1 for p, t in zip(predicted, y) if p and t)
        fp = sum(1 for p, t in zip(predicted, y) if p and not t)
        precision = tp / (tp + fp)
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


class TestMetricOracles:
    def test_perfect_classification_scores_one(self):
        y = np.array([0, 1, 2, 1, 0])
        assert f1_macro(y, y) == 1.0

    def test_hand_counted_binary_f1(self):
        got = f1_macro(np.array([1, 0, 1, 0]), np.array([1, 0, 0, 0]))
        assert abs(got - 11 / 15) < 1e-15

    def test_f1_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = rng.integers(2, 5)
            n = rng.integers(4, 30)
            y = rng.integers(0, k, n)
            yhat = rng.integers(0, k, n)
            assert abs(f1_macro(y, yhat) - brute_force_f1(list(y), list(yhat))) <= 1e-10

    def test_mean_predictor_has_zero_r2(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        pred = np.full(4, y.mean())
        assert abs(r2(y, pred)) < 1e-12

    def test_r2_matches_sum_of_squares_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = rng.integers(3, 40)
            y = rng.normal(size=n)
            pred = rng.normal(size=n)
            expected = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
            assert abs(r2(y, pred) - expected) <= 1e-10

    def test_mape_analytic(self):
        assert abs(mape(np.array([100.0, 200.0]), np.array([110.0, 180.0])) - 0.10) < 1e-12

    def test_mape_rejects_zero_targets(self):
        with pytest.raises(ValueError):
            mape(np.array([0.0, 1.0]), np.array([1.0, 1.0]))

    def test_auc_pr_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = rng.integers(4, 40)
            y = rng.integers(0, 2, n)
            if y.sum() in (0, n):
                y[0], y[-1] = 0, 1
            scores = np.round(rng.random(n), 2)  # force threshold ties
            got = auc_pr(y, scores)
            expected = brute_force_auc_pr(list(y), list(scores))
            assert abs(got - expected) <= 1e-10

    def test_auc_pr_multiclass_macro(self):
        y = np.array([0, 1, 2, 1])
        scores = np.array([[0.8, 0.1, 0.1], [0.2, 0.6, 0.2],
                           [0.1, 0.2, 0.7], [0.3, 0.5, 0.2]])
        per_class = [brute_force_auc_pr(list((y == c).astype(int)), list(scores[:, c]))
                     for c in range(3)]
        assert abs(auc_pr(y, scores) - np.mean(per_class)) <= 1e-12

    def test_auc_pr_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc_pr(np.array([1, 1, 1]), np.array([0.4, 0.5, 0.6]))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_metrics_invariant_to_sample_order(self, seed):
        rng = np.random.default_rng(seed)
        n = 25
        y = rng.integers(0, 3, n)
        y[:3] = [0, 1, 2]
        yhat = rng.integers(0, 3, n)
        perm = rng.permutation(n)
        assert f1_macro(y, yhat) == f1_macro(y[perm], yhat[perm])
        yr = rng.normal(size=n)
        pr_ = rng.normal(size=n)
        assert abs(r2(yr, pr_) - r2(yr[perm], pr_[perm])) < 1e-12


class TestRobustnessScores:
    def test_prs_identical_predictions_is_one(self):
        y = np.array([1.0, 2.0, 3.0])
        pred = np.array([1.1, 2.2, 2.9])
        assert prs(y, pred, pred) == 1.0

    def test_prs_double_error_is_exp_minus_one(self):
        y = np.zeros(4)
        full = np.full(4, 1.0)
        miss = np.full(4, 2.0)  # rmse ratio exactly 2
        assert abs(prs(y, miss, full) - np.exp(-1.0)) <= 1e-12

    def test_prs_clamps_at_one_when_missing_beats_full(self):
        y = np.zeros(4)
        assert prs(y, np.full(4, 0.5), np.full(4, 1.0)) == 1.0

    def test_prs_zero_full_rmse_rejected(self):
        y = np.ones(3)
        with pytest.raises(ValueError):
            prs(y, y + 0.5, y)

    def test_prs_monotone_in_missing_error(self):
        y = np.zeros(8)
        full = np.full(8, 1.0)
        values = [prs(y, np.full(8, level), full) for level in np.linspace(0.2, 5, 12)]
        assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))
        assert values[0] == 1.0

    def test_deformation_uniform_shift_analytic(self):
        rng = np.random.default_rng(0)
        full = rng.normal(size=50)
        c = 0.7
        miss = full + c * full.std()
        assert abs(deformation(full, miss) - c) <= 1e-12

    def test_deformation_zero_for_identical(self):
        full = np.array([1.0, 2.0, 5.0])
        assert deformation(full, full) == 0.0

    def test_deformation_constant_full_rejected(self):
        with pytest.raises(ValueError):
            deformation(np.ones(4), np.zeros(4))

    def test_class_change_extremes(self):
        probs_a = np.array([[0.9, 0.1], [0.2, 0.8]])
        assert class_change_ratio(probs_a, probs_a) == 0.0
        flipped = probs_a[:, ::-1]
        assert class_change_ratio(probs_a, flipped) == 1.0
        labels = np.array([0, 1, 1, 0])
        assert class_change_ratio(labels, np.array([0, 1, 0, 0])) == 0.25


def fitted_model(task="classification", seed=0):
    cfg = SyntheticConfig(
        n_samples=90, latent_dim=4, task=task, classes=3, seed=seed,
        views=[SyntheticViewConfig(id=v, kind="static", channels=3, noise=0.2,
                                   redundancy=0.8, loading_seed=i)
               for i, v in enumerate(["optical", "radar", "weather"])])
    ds = generate_synthetic(cfg)
    model = build_model(ds.view_specs, EncoderConfig(latent_dim=8, layers=1, dropout=0.0),
                        FusionConfig(kind="average", dropout=0.0), ds.task,
                        ds.n_outputs, "feature", np.random.default_rng(seed))
    return model, ds


class TestSweep:
    def test_grid_rows_and_endpoint_equalities(self):
        model, ds = fitted_model()
        report = sweep(model, ds, "optical", [0.0, 0.5, 1.0], seed=4)
        f1_rows = [r for r in report.rows if r["metric"] == "f1"]
        assert len(f1_rows) == 3

        scenarios = [MissingScenario("none"),
                     MissingScenario("only_missing", "optical")]
        reference = evaluate_scenarios(model, ds, scenarios, seed=4)
        for metric in ("f1", "auc_pr", "prs", "class_change"):
            start = report.values("fraction:optical:0", metric)[0]
            end = report.values("fraction:optical:1", metric)[0]
            assert abs(start - reference.values("none", metric)[0]) <= 1e-12
            assert abs(end - reference.values("only_missing:optical", metric)[0]) <= 1e-12

    def test_shift_scores_non_decreasing_in_p(self):
        model, ds = fitted_model(seed=1)
        grid = [0.0, 0.25, 0.5, 0.75, 1.0]
        report = sweep(model, ds, "radar", grid, seed=7)
        curve = [report.values(f"fraction:radar:{p:g}", "class_change")[0] for p in grid]
        assert all(b >= a - 1e-15 for a, b in zip(curve, curve[1:]))
        assert curve[0] == 0.0

    def test_regression_sweep_metrics(self):
        model, ds = fitted_model(task="regression", seed=2)
        report = sweep(model, ds, "optical", [0.0, 1.0], seed=5)
        deform = [report.values(f"fraction:optical:{p:g}", "deformation")[0]
                  for p in (0.0, 1.0)]
        assert deform[0] == 0.0
        assert deform[1] >= 0.0
        assert report.values("fraction:optical:0", "prs")[0] == 1.0


class TestReport:
    def test_csv_round_trip_and_summary(self, tmp_path):
        report = EvalReport()
        report.add("none", None, None, "f1", 0, 1, 0.5)
        report.add("none", None, None, "f1", 1, 1, 0.7)
        summary = report.summary()
        assert summary[0]["mean"] == pytest.approx(0.6)
        assert summary[0]["n"] == 2
        path = tmp_path / "report.csv"
        report.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "scenario,view,p,metric,fold,seed,value"
        assert len(lines) == 3

    def test_summary_json_is_deterministic(self, tmp_path):
        report = EvalReport()
        report.add("none", None, None, "f1", 0, 1, 1 / 3)
        report.write_summary(tmp_path / "a.json", config={"x": 1}, seed=7)
        report.write_summary(tmp_path / "b.json", config={"x": 1}, seed=7)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
