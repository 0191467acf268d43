from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rapidrisk._core import ConfigurationError
from rapidrisk.dataset import Dataset, SchemaMismatch
from rapidrisk.dtypes import Categorical
from rapidrisk.learners import AttackerSpec
from rapidrisk.risk import (
    Absolute,
    AllRecords,
    ClassNotInBaseline,
    DegenerateBaselineWarning,
    EmptyColumn,
    EmptyTargetSet,
    Holdout,
    IncompatibleKinds,
    LengthMismatch,
    MixedConfigurations,
    StabilisedRelative,
    SymmetricRelative,
    aggregate_multi_model,
    aggregate_replicates,
    baseline_marginals,
    metric_from_name,
    normalized_gain,
    rapid_assess,
    rapid_categorical,
    rapid_continuous,
)

from .samples.data import TOY_INCOMES, TOY_PREDICTED_INCOMES, mixed_data


class TestBaselines:
    def test_that_marginals_ignore_missing_labels(self):
        assert baseline_marginals(["a", "b", "a", None]) == pytest.approx({"a": 2 / 3, "b": 1 / 3})

    def test_that_empty_columns_are_rejected(self):
        with pytest.raises(EmptyColumn):
            baseline_marginals([None, None])

    def test_that_normalized_gain_is_zero_for_a_certain_baseline(self):
        assert normalized_gain(0.5, 1.0) == 0.0
        assert normalized_gain(0.7, 0.6) == pytest.approx(0.25)
        assert normalized_gain(np.array([1.0, 0.0]), np.array([0.5, 0.5])).tolist() == [1.0, -1.0]


class TestMetrics:
    def test_that_metrics_compute_their_errors(self):
        assert SymmetricRelative(0.01).error([100.0], [100.0])[0] == 0.0
        assert StabilisedRelative(1e-9).error([50000.0], [47000.0])[0] == pytest.approx(0.06)
        assert Absolute().error([3.0], [5.5])[0] == 2.5
        assert not Absolute().is_relative

    def test_that_symmetric_error_stays_below_two(self):
        errors = SymmetricRelative(0.01).error([1e6, -1e6, 0.0], [-1e6, 1e6, 1e9])
        assert np.all(errors < 2.0)

    def test_that_metrics_are_looked_up_by_name(self):
        assert metric_from_name("stabilised", 0.5) == StabilisedRelative(0.5)
        assert metric_from_name("absolute") == Absolute()
        with pytest.raises(ConfigurationError, match="Unknown metric 'squared'"):
            metric_from_name("squared")
        with pytest.raises(ConfigurationError, match="delta=0"):
            SymmetricRelative(0)


class TestRapidCategorical:
    def test_that_the_toy_records_score_one_in_three(self, toy_categorical):
        probs, y_true, baselines, classes = toy_categorical
        result = rapid_categorical(probs, y_true, baselines, 0.3, classes)
        assert result.r == pytest.approx([0.25, 0.625, -0.125])
        assert result.flags.tolist() == [False, True, False]
        assert result.score == pytest.approx(1 / 3)
        assert result.n_at_risk == 1
        assert result.accuracy == 1.0

    def test_that_with_threshold_rescores_without_retraining(self, toy_categorical):
        probs, y_true, baselines, classes = toy_categorical
        result = rapid_categorical(probs, y_true, baselines, 0.3, classes)
        lower = result.with_threshold(0.2)
        assert lower.score == pytest.approx(2 / 3)
        assert lower.tau == 0.2
        assert result.with_threshold(0.7).score == 0.0

    def test_that_a_class_absent_from_the_probabilities_has_zero_g(self):
        result = rapid_categorical([[1.0]], ["b"], {"a": 0.5, "b": 0.5}, classes=["a"])
        assert result.g.tolist() == [0.0]
        assert result.r.tolist() == [-1.0]

    def test_that_inputs_are_validated(self, toy_categorical):
        probs, y_true, baselines, classes = toy_categorical
        with pytest.raises(LengthMismatch, match="3 vs 2"):
            rapid_categorical(probs, y_true[:2], baselines, 0.3, classes)
        with pytest.raises(ClassNotInBaseline, match="'unknown'"):
            rapid_categorical(probs, ["healthy", "healthy", "unknown"], baselines, 0.3, classes)
        with pytest.raises(ConfigurationError):
            rapid_categorical(probs, y_true, baselines, 1.0, classes)

    def test_that_a_single_class_warns_and_scores_zero(self):
        with pytest.warns(DegenerateBaselineWarning):
            result = rapid_categorical([[1.0], [1.0]], ["a", "a"], {"a": 1.0}, classes=["a"])
        assert result.score == 0.0
        assert result.r.tolist() == [0.0, 0.0]

    @settings(deadline=None, max_examples=50)
    @given(
        g=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30),
        b=st.floats(0.01, 0.99),
        taus=st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
    )
    def test_that_the_score_never_rises_with_tau(self, g, b, taus):
        probs = [[p, 1.0 - p] for p in g]
        y_true = ["p"] * len(g)
        lo, hi = sorted(taus)
        result = rapid_categorical(probs, y_true, {"p": b, "q": 1.0 - b}, lo, ["p", "q"])
        assert 0.0 <= result.score <= 1.0
        assert result.with_threshold(hi).score <= result.score
        assert np.all(result.r <= 1.0)


class TestRapidContinuous:
    def test_that_the_toy_incomes_score_one_in_three(self):
        result = rapid_continuous(
            TOY_PREDICTED_INCOMES, TOY_INCOMES, 0.10, StabilisedRelative(1e-9)
        )
        assert result.e == pytest.approx([0.06, 4000 / 35000, 0.125])
        assert result.flags.tolist() == [True, False, False]
        assert result.score == pytest.approx(1 / 3)
        assert result.mae == pytest.approx(17000 / 3)

    def test_that_the_default_metric_is_symmetric(self):
        result = rapid_continuous(TOY_PREDICTED_INCOMES, TOY_INCOMES)
        assert result.metric == SymmetricRelative(0.01)
        assert result.score == pytest.approx(1 / 3)

    def test_that_epsilon_must_be_positive(self):
        with pytest.raises(ConfigurationError, match="epsilon=0"):
            rapid_continuous([1.0], [1.0], 0)

    @settings(deadline=None, max_examples=50)
    @given(
        y=st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=30),
        shift=st.floats(-100.0, 100.0),
        eps=st.tuples(st.floats(0.001, 1.0), st.floats(0.001, 1.0)),
    )
    def test_that_the_score_never_falls_with_epsilon(self, y, shift, eps):
        lo, hi = sorted(eps)
        yhat = [v + shift for v in y]
        result = rapid_continuous(yhat, y, lo)
        assert result.with_threshold(hi).score >= result.score


class TestRapidAssess:
    def test_that_a_recoverable_mapping_puts_every_record_at_risk(self, mapped_pair):
        original, released = mapped_pair
        result = rapid_assess(original, released, ["zone"], "status", AttackerSpec("cart"))
        assert result.g == pytest.approx(np.full(60, 21 / 23))
        assert result.score == 1.0
        assert result.baseline == "full"
        assert result.mode == "all_records"
        assert result.attacker["family"] == "cart"

    def test_that_an_uninformative_attacker_scores_zero(self, constant_qi_data):
        result = rapid_assess(
            constant_qi_data, constant_qi_data, ["site"], "status", AttackerSpec("cart")
        )
        assert result.r == pytest.approx(np.zeros(60), abs=1e-12)
        assert result.score == 0.0

    def test_that_marginal_predictions_give_zero_gain(self, constant_qi_data):
        result = rapid_assess(
            constant_qi_data,
            constant_qi_data,
            ["site"],
            "status",
            AttackerSpec("logistic", lam=10.0),
        )
        assert result.r == pytest.approx(np.zeros(60), abs=1e-6)
        assert result.score == 0.0

    def test_that_holdout_scores_only_the_selected_rows(self, mapped_pair):
        original, released = mapped_pair
        result = rapid_assess(
            original, released, ["zone"], "status", AttackerSpec("cart"), mode=Holdout([5, 0, 7])
        )
        assert result.n_evaluated == 3
        assert sorted(result.rows.tolist()) == [0, 5, 7]
        assert result.mode == "holdout"

    def test_that_an_empty_holdout_is_rejected(self, mapped_pair):
        original, released = mapped_pair
        with pytest.raises(EmptyTargetSet):
            rapid_assess(original, released, ["zone"], "status", AttackerSpec("cart"), mode=Holdout([]))

    def test_that_continuous_targets_use_the_metric(self):
        data = mixed_data(40)
        result = rapid_assess(
            data,
            data,
            ["group", "x"],
            "y",
            AttackerSpec("cart", min_leaf=1, min_split=2),
            epsilon=0.05,
        )
        assert result.score == 1.0
        assert result.e == pytest.approx(np.zeros(40), abs=1e-9)
        assert result.metric == SymmetricRelative(0.01)

    def test_that_bad_column_roles_are_rejected(self, mapped_pair):
        original, released = mapped_pair
        with pytest.raises(ConfigurationError, match="both sensitive and a quasi-identifier"):
            rapid_assess(original, released, ["zone", "status"], "status")
        with pytest.raises(SchemaMismatch, match="'income' is missing"):
            rapid_assess(original, released, ["zone"], "income")

    def test_that_kind_clashes_are_rejected(self, mapped_pair):
        original, _ = mapped_pair
        released = Dataset.from_values(
            {"zone": ["a", "b"], "status": [1.0, 2.0]},
            kinds={"zone": Categorical(["a", "b"])},
        )
        with pytest.raises(IncompatibleKinds):
            rapid_assess(original, released, ["zone"], "status")

    def test_that_released_levels_unseen_in_the_original_are_fine(self, mapped_pair):
        original, _ = mapped_pair
        released = Dataset.from_values(
            {"zone": ["a", "b", "c", "d"] * 5, "status": ["x", "y", "z", "w"] * 5}
        )
        result = rapid_assess(original, released, ["zone"], "status", AttackerSpec("cart", min_leaf=1))
        assert result.n_evaluated == 60


class TestAggregation:
    def _toy(self, toy_categorical, tau=0.3):
        probs, y_true, baselines, classes = toy_categorical
        return rapid_categorical(probs, y_true, baselines, tau, classes)

    def test_that_multi_model_reports_mean_and_worst_case(self, toy_categorical):
        base = self._toy(toy_categorical)
        results = [
            replace(base, attacker={"family": "cart"}, score=0.2),
            replace(base, attacker={"family": "random_forest"}, score=0.6),
        ]
        summary = aggregate_multi_model(results)
        assert summary.mean_score == pytest.approx(0.4)
        assert summary.max_score == 0.6
        assert summary.max_attacker == "random_forest"

    def test_that_replicates_report_mean_and_worst_case(self, toy_categorical):
        base = self._toy(toy_categorical)
        summary = aggregate_replicates([replace(base, score=s) for s in (0.1, 0.3, 0.2)])
        assert summary.mean_score == pytest.approx(0.2)
        assert summary.max_score == 0.3
        assert summary.to_dict()["scores"] == [0.1, 0.3, 0.2]

    def test_that_mixed_thresholds_are_rejected(self, toy_categorical):
        with pytest.raises(MixedConfigurations):
            aggregate_multi_model([self._toy(toy_categorical, 0.3), self._toy(toy_categorical, 0.4)])

    def test_that_nothing_to_aggregate_is_rejected(self):
        with pytest.raises(ConfigurationError):
            aggregate_replicates([])


class TestModes:
    def test_that_modes_have_names(self):
        assert AllRecords().name == "all_records"
        assert Holdout([1, 2]).rows == (1, 2)
