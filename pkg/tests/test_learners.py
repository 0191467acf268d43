from pathlib import Path

import numpy as np
import pytest

from rapidrisk.dataset import Dataset
from rapidrisk.dtypes import Categorical, Continuous
from rapidrisk.learners import (
    AttackerSpec,
    DegenerateTarget,
    EmptyTraining,
    UnknownFamily,
    UnsupportedTarget,
    load_model,
    predict_class,
    predict_proba,
    predict_value,
    save_model,
    train,
)
from rapidrisk.learners._logistic import irls_binary, smooth_gradient, smooth_loss
from rapidrisk.learners._tree import DecisionTree, TreeParams
from rapidrisk._core import ConfigurationError
from rapidrisk.dataset import SchemaMismatch

from .samples.data import ZONES, mapped_data, mixed_data


def line_data(n: int = 20) -> Dataset:
    x = [float(i) for i in range(n)]
    return Dataset.from_values(
        {"x": x, "y": x, "label": ["lo" if v < n / 2 else "hi" for v in x]},
        kinds={"x": Continuous(), "y": Continuous(), "label": Categorical(["lo", "hi"])},
    )


def unbalanced_data(n: int = 100) -> Dataset:
    n_a = int(0.6 * n)
    return Dataset.from_values(
        {
            "zone": [ZONES[i % 3] for i in range(n)],
            "y": ["a"] * n_a + ["b"] * (n - n_a),
        },
        kinds={"zone": Categorical(ZONES), "y": Categorical(["a", "b"])},
    )


class TestAttackerSpec:
    def test_that_aliases_resolve(self):
        assert AttackerSpec("rf").family == "random_forest"
        assert AttackerSpec("tree").family == "cart"
        assert AttackerSpec("logistic").family == "logistic_l1"

    def test_that_family_defaults_apply(self):
        assert AttackerSpec("rf").min_leaf == 5
        assert AttackerSpec("cart").min_leaf == 3
        assert AttackerSpec().n_trees == 500

    def test_that_bad_specs_are_rejected(self):
        with pytest.raises(UnknownFamily, match="Unknown attacker family 'gbm'"):
            AttackerSpec("gbm")
        with pytest.raises(ConfigurationError, match="n_trees must be >= 1"):
            AttackerSpec(n_trees=0)
        with pytest.raises(ConfigurationError, match="lam must be >= 0"):
            AttackerSpec("logistic", lam=-1.0)

    def test_that_with_seed_only_changes_the_seed(self):
        spec = AttackerSpec("rf", n_trees=7, seed=1)
        other = spec.with_seed(9)
        assert other.seed == 9
        assert other.n_trees == 7
        assert other.family == spec.family

    def test_that_to_dict_names_the_family(self):
        raw = AttackerSpec("cart", seed=4).to_dict()
        assert raw["family"] == "cart"
        assert raw["seed"] == 4
        assert raw["min_split"] == 10


class TestDecisionTree:
    def test_that_pure_leaves_are_laplace_smoothed(self):
        X = np.array([[0.0]] * 5 + [[1.0]] * 5)
        y = np.array([0] * 5 + [1] * 5)
        tree = DecisionTree(TreeParams(min_leaf=5, min_split=10)).fit(X, np.array([False]), y, 2)
        assert tree.n_leaves == 2
        assert tree.predict_proba(np.array([[0.0]]))[0, 0] == pytest.approx(6 / 7)

    def test_that_separable_data_is_fit_exactly(self):
        data = line_data()
        model = train(AttackerSpec("cart"), data, ["x"], "label")
        assert predict_class(model, data) == data.labels("label")

    def test_that_constant_targets_are_predicted_exactly(self):
        data = Dataset.from_values({"x": [float(i) for i in range(12)], "y": [4.5] * 12})
        model = train(AttackerSpec("cart"), data, ["x"], "y")
        assert np.all(predict_value(model, data) == 4.5)

    def test_that_deep_trees_reproduce_training_points(self):
        data = line_data()
        model = train(AttackerSpec("cart", min_leaf=1, min_split=2), data, ["x"], "y")
        assert predict_value(model, data) == pytest.approx(data.column("y"))

    def test_that_categorical_splits_recover_a_mapping(self):
        data = mapped_data(60)
        model = train(AttackerSpec("cart"), data, ["zone"], "status")
        assert predict_class(model, data) == data.labels("status")


class TestRandomForest:
    def test_that_one_unbagged_tree_equals_cart(self):
        data = mixed_data(50)
        cart = train(AttackerSpec("cart", min_leaf=5, min_split=10), data, ["group", "x"], "y")
        forest = train(
            AttackerSpec("rf", n_trees=1, bootstrap=False, min_leaf=5, mtry=2),
            data,
            ["group", "x"],
            "y",
        )
        assert np.array_equal(predict_value(cart, data), predict_value(forest, data))

    def test_that_predictions_average_the_trees(self):
        data = mixed_data(50)
        model = train(AttackerSpec("rf", n_trees=5, seed=2), data, ["group", "x"], "y")
        X = model.features.raw(data)
        per_tree = np.mean([tree.predict_value(X) for tree in model.model.trees], axis=0)
        assert predict_value(model, data) == pytest.approx(per_tree)

    def test_that_probabilities_are_distributions(self):
        data = mapped_data(60)
        model = train(AttackerSpec("rf", n_trees=10), data, ["zone"], "status")
        probs = predict_proba(model, data)
        assert probs.shape == (60, 3)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert probs.min() >= 0.0 and probs.max() <= 1.0

    def test_that_training_is_seeded(self):
        data = mixed_data(40)
        a = train(AttackerSpec("rf", n_trees=8, seed=5), data, ["group", "x"], "y")
        b = train(AttackerSpec("rf", n_trees=8, seed=5), data, ["group", "x"], "y", threads=3)
        assert np.array_equal(predict_value(a, data), predict_value(b, data))

    def test_that_unseen_levels_still_get_a_distribution(self):
        data = mapped_data(60)
        model = train(AttackerSpec("rf", n_trees=10), data, ["zone"], "status")
        rows = Dataset.from_values(
            {"zone": ["a", "d"]}, kinds={"zone": Categorical(["a", "b", "c", "d"])}
        )
        probs = predict_proba(model, rows)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestLogistic:
    @pytest.mark.parametrize("seed", range(20))
    def test_that_the_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, d, k = int(rng.integers(5, 41)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        X = rng.normal(size=(n, d))
        Y = np.eye(k)[rng.integers(0, k, size=n)]
        W = rng.normal(scale=0.5, size=(d, k - 1))
        b = rng.normal(scale=0.5, size=k - 1)
        gW, gb = smooth_gradient(X, Y, W, b)
        h = 1e-5

        def central(f, x):
            out = np.zeros_like(x)
            for idx in np.ndindex(*x.shape):
                step = np.zeros_like(x)
                step[idx] = h
                out[idx] = (f(x + step) - f(x - step)) / (2 * h)
            return out

        numeric = np.concatenate(
            [
                central(lambda w: smooth_loss(X, Y, w, b), W).ravel(),
                central(lambda c: smooth_loss(X, Y, W, c), b),
            ]
        )
        analytic = np.concatenate([gW.ravel(), gb])
        assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(numeric)

    def test_that_the_penalty_is_scaled_per_record(self):
        spec = AttackerSpec("logistic", lam=0.05)
        once = train(spec, mapped_data(30), ["zone"], "status")
        twice = train(spec, mapped_data(60), ["zone"], "status")
        assert twice.model.coef == pytest.approx(once.model.coef, abs=1e-4)
        assert twice.model.intercept == pytest.approx(once.model.intercept, abs=1e-4)

    def test_that_a_large_penalty_gives_the_marginals(self):
        data = unbalanced_data(100)
        model = train(AttackerSpec("logistic", lam=10.0), data, ["zone"], "y")
        assert np.all(model.model.coef == 0.0)
        probs = predict_proba(model, data)
        assert probs[:, 0] == pytest.approx(np.full(100, 0.6), abs=1e-3)
        assert probs[:, 1] == pytest.approx(np.full(100, 0.4), abs=1e-3)

    def test_that_the_objective_never_increases(self):
        data = mapped_data(60)
        model = train(AttackerSpec("logistic", lam=0.01), data, ["zone"], "status")
        trace = np.array(model.model.objective_trace)
        assert np.all(np.diff(trace) <= 1e-12)

    def test_that_it_learns_a_mapping(self):
        data = mapped_data(60)
        model = train(AttackerSpec("logistic", lam=0.001), data, ["zone"], "status")
        assert predict_class(model, data) == data.labels("status")

    def test_that_it_needs_two_classes(self):
        data = Dataset.from_values({"zone": ["a", "b", "c"], "y": ["p", "p", "p"]})
        with pytest.raises(DegenerateTarget, match="single observed class 'p'"):
            train(AttackerSpec("logistic"), data, ["zone"], "y")

    def test_that_it_needs_a_categorical_target(self):
        data = mixed_data(20)
        with pytest.raises(UnsupportedTarget):
            train(AttackerSpec("logistic"), data, ["group"], "y")

    def test_that_irls_recovers_known_coefficients(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=4000)
        p = 1.0 / (1.0 + np.exp(-(0.5 + 1.5 * x)))
        y = (rng.uniform(size=4000) < p).astype(float)
        fit = irls_binary(np.column_stack([np.ones(4000), x]), y)
        assert fit.converged
        assert not fit.separated
        assert fit.coef == pytest.approx([0.5, 1.5], abs=0.2)


class TestTraining:
    def test_that_too_few_rows_are_rejected(self):
        data = Dataset.from_values({"zone": ["a", "b"], "y": ["p", None]})
        with pytest.raises(EmptyTraining, match="got 1"):
            train(AttackerSpec("cart"), data, ["zone"], "y")

    def test_that_kind_mismatches_are_rejected(self):
        data = mapped_data(30)
        model = train(AttackerSpec("cart"), data, ["zone"], "status")
        with pytest.raises(SchemaMismatch):
            predict_value(model, data)
        rows = Dataset.from_values({"zone": [1.0, 2.0]})
        with pytest.raises(SchemaMismatch, match="was categorical at training time"):
            predict_proba(model, rows)

    def test_that_models_round_trip_through_json(self, tmp_path: Path):
        data = mixed_data(40)
        for spec in (AttackerSpec("cart"), AttackerSpec("rf", n_trees=3)):
            model = train(spec, data, ["group", "x"], "y")
            p = tmp_path / f"{spec.family}.json"
            save_model(model, p)
            assert np.array_equal(predict_value(load_model(p), data), predict_value(model, data))
        labelled = mapped_data(30)
        model = train(AttackerSpec("logistic"), labelled, ["zone"], "status")
        p = tmp_path / "logistic.json"
        save_model(model, p)
        assert predict_proba(load_model(p), labelled) == pytest.approx(predict_proba(model, labelled))
