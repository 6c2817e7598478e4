import math

import numpy as np
import pytest
from scipy import sparse
from sklearn.base import clone
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline

from expand_sparsify import EasClassifier, EasRegressor, ExpandSparsify
from expand_sparsify.approximator import predict_batch
from expand_sparsify.data import ManifoldSpec, make_classification, make_regression, make_target
from expand_sparsify.estimators import default_k
from expand_sparsify.exceptions import ConfigurationError


@pytest.fixture(scope="module")
def regression():
    spec = ManifoldSpec(m=1, n=10, embedding_seed=1)
    return make_regression(spec, make_target("lipschitz_trig", spec, 2), 600, seed=3)


@pytest.fixture(scope="module")
def classification():
    return make_classification(ManifoldSpec(m=2, n=12), 3, 600, seed=1, layout="clusters")


def test_default_k():
    assert default_k(2000) == math.ceil(8 * math.log(2000)) == 61
    assert default_k(1) == 1
    assert default_k(5) == 5


class TestTransformer:
    def test_params_round_trip(self):
        est = ExpandSparsify(n_components=100, k=5, mode="topk")
        assert est.get_params()["k"] == 5
        assert clone(est).set_params(k=7).k == 7

    def test_topk_exact_cardinality(self, regression):
        Z = ExpandSparsify(n_components=200, k=9, mode="topk").fit(regression.inputs).transform(regression.inputs)
        assert np.all(Z.sum(axis=1) == 9)

    def test_threshold_mean_sparsity(self, regression):
        Z = ExpandSparsify(n_components=300, k=12).fit(regression.inputs).transform(regression.inputs)
        assert abs(Z.sum(axis=1).mean() - 12) <= 1

    def test_relu_values_positive(self, regression):
        Z = ExpandSparsify(n_components=100, k=10, mode="threshold_relu").fit(regression.inputs).transform(
            regression.inputs)
        assert np.all(Z >= 0) and np.any(Z > 0)

    def test_sparse_output(self, regression):
        est = ExpandSparsify(n_components=50, k=5, sparse_output=True).fit(regression.inputs)
        assert sparse.issparse(est.transform(regression.inputs[:5]))

    def test_codes(self, regression):
        est = ExpandSparsify(n_components=50, k=5).fit(regression.inputs)
        codes = est.codes(regression.inputs[:3])
        dense = est.transform(regression.inputs[:3])
        for code, row in zip(codes, dense):
            assert code.active.tolist() == np.flatnonzero(row).tolist()

    def test_dropout_seeded(self, regression):
        est = ExpandSparsify(n_components=100, k=20, dropout_rate=0.5).fit(regression.inputs)
        a = est.transform(regression.inputs, dropout_seed=1)
        assert np.array_equal(a, est.transform(regression.inputs, dropout_seed=1))
        assert a.sum() < ExpandSparsify(n_components=100, k=20).fit(regression.inputs).transform(
            regression.inputs).sum()

    def test_feature_mismatch(self, regression):
        est = ExpandSparsify(n_components=20, k=3).fit(regression.inputs)
        with pytest.raises(ValueError):
            est.transform(np.ones((2, 3)))

    def test_unknown_mode(self, regression):
        with pytest.raises(ConfigurationError):
            ExpandSparsify(mode="softmax").fit(regression.inputs)

    def test_k_above_width(self, regression):
        with pytest.raises(ConfigurationError):
            ExpandSparsify(n_components=10, k=11).fit(regression.inputs)

    def test_pipeline(self, classification):
        pipe = make_pipeline(ExpandSparsify(n_components=300, k=16), LogisticRegression(max_iter=500))
        pipe.fit(classification.inputs, classification.targets)
        assert pipe.score(classification.inputs, classification.targets) > 0.9

    def test_feature_names(self, regression):
        est = ExpandSparsify(n_components=3, k=1).fit(regression.inputs)
        assert est.get_feature_names_out().tolist() == ["unit0", "unit1", "unit2"]


class TestRegressor:
    def test_matches_functional_core(self, regression):
        est = EasRegressor(n_components=300, k=16, random_state=4).fit(regression.inputs, regression.targets)
        pred, _ = predict_batch(est.model_, regression.inputs, fallback="global_mean")
        assert np.array_equal(est.predict(regression.inputs), pred)

    def test_reproducible(self, regression):
        a = EasRegressor(n_components=200, k=8, random_state=3).fit(regression.inputs, regression.targets)
        b = clone(a).fit(regression.inputs, regression.targets)
        assert np.array_equal(a.predict(regression.inputs), b.predict(regression.inputs))

    def test_score(self, regression):
        est = EasRegressor(n_components=1000, k=16).fit(regression.inputs, regression.targets)
        assert est.score(regression.inputs, regression.targets) > 0.5
        assert est.score_errors(regression.inputs, regression.targets)["no_active_count"] == 0

    def test_prune_keeps_predictions(self, regression):
        X, y = regression.inputs, regression.targets
        est = EasRegressor(n_components=2000, k=2).fit(X[:50], y[:50], calibration=X)
        before = est.predict(X[:50])
        removed = est.prune(X[:50])
        assert removed > 0 and est.model_.d == 2000 - removed
        assert np.array_equal(est.predict(X[:50]), before)

    def test_dead_units(self, regression):
        X, y = regression.inputs, regression.targets
        est = EasRegressor(n_components=2000, k=2).fit(X[:20], y[:20], calibration=X)
        assert est.dead_units_ > 0

    def test_fallback_error(self, regression):
        from expand_sparsify.exceptions import NoActiveUnitsError
        est = EasRegressor(n_components=10, k=1, fallback="error").fit(regression.inputs, regression.targets)
        U = np.random.default_rng(0).normal(size=(2000, 10))
        silent = U[~est.model_.codes(U).any(axis=1)]
        assert len(silent)
        with pytest.raises(NoActiveUnitsError):
            est.predict(silent[:1])


class TestClassifier:
    def test_fit_predict(self, classification):
        clf = EasClassifier(n_components=1000, k=16).fit(classification.inputs, classification.targets)
        assert clf.score(classification.inputs, classification.targets) > 0.9
        proba = clf.predict_proba(classification.inputs)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)

    def test_string_labels(self, classification):
        labels = np.array(["a", "b", "c"])[classification.targets]
        clf = EasClassifier(n_components=500, k=16).fit(classification.inputs, labels)
        assert set(clf.predict(classification.inputs).tolist()) <= {"a", "b", "c"}
        assert clf.classes_.tolist() == ["a", "b", "c"]
