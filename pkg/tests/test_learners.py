import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import log_loss_direct
from visjit.evaluation import auc
from visjit.learners import (
    COMBOS,
    KINDS,
    EmptyFeatureSet,
    FeatureCombo,
    LearnerKind,
    MissingFeature,
    SingleClass,
    TrainedModel,
    combo_features,
    predict_proba,
    train,
    train_matrix,
)
from visjit.learners.linear import fit_logistic, logistic_loss_and_grad
from visjit.learners.tree import grow_classifier, grow_regressor
from visjit.metrics import FEATURE_NAMES

XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
XOR_Y = np.array([0, 1, 1, 0])


def blobs(n=40, seed=0, margin=1.0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-3, -margin / 2, size=(n, 2))
    b = rng.uniform(margin / 2, 3, size=(n, 2))
    return np.vstack([a, b]), np.array([0] * n + [1] * n)


def noisy(n=80, d=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] - X[:, 1] + rng.normal(scale=1.0, size=n) > 0).astype(int)
    return X, y


NAMES4 = ["f0", "f1", "f2", "f3"]


class TestFit:
    def test_lr_separable_blobs(self):
        X, y = blobs()
        m = train("LR", X, y, ["a", "b"])
        assert auc(m.predict_proba_matrix(X), y) == 1.0

    def test_dt_solves_xor(self):
        m = train("DT", XOR_X, XOR_Y, ["a", "b"])
        assert (m.predict(XOR_X) == XOR_Y).all()

    @pytest.mark.parametrize("kind", KINDS)
    def test_single_class(self, kind):
        with pytest.raises(SingleClass):
            train(kind, XOR_X, np.ones(4), ["a", "b"])

    def test_empty_features(self):
        with pytest.raises(EmptyFeatureSet):
            train("LR", np.zeros((4, 0)), XOR_Y, [])

    @pytest.mark.parametrize("kind", KINDS)
    def test_probabilities_in_range(self, kind):
        X, y = noisy()
        p = train(kind, X, y, NAMES4, n_estimators=10) if kind in ("RF", "GBM", "XGB") else train(kind, X, y, NAMES4)
        proba = p.predict_proba_matrix(X)
        assert proba.shape == (80,) and ((proba >= 0) & (proba <= 1)).all()

    @pytest.mark.parametrize("kind", KINDS)
    def test_learns_signal(self, kind):
        X, y = noisy(200, seed=1)
        Xt, yt = noisy(200, seed=2)
        assert auc(train(kind, X, y, NAMES4, seed=3).predict_proba_matrix(Xt), yt) > 0.7


class TestPrediction:
    def test_zero_lr_is_half(self):
        m = TrainedModel(LearnerKind.LR, ["a", "b"], {"coef": np.zeros(2), "intercept": 0.0})
        assert predict_proba(m, {"a": 3.0, "b": -7.0}) == 0.5

    def test_rf_all_positive_votes(self):
        X, y = noisy()
        rf = train("RF", X, y, NAMES4, n_estimators=5)
        for t in rf.params["trees"]:
            t.value[:] = 1.0
        assert (rf.predict_proba_matrix(X) == 1.0).all()

    def test_gbm_without_trees_is_base_rate(self):
        X, y = noisy()
        m = train("GBM", X, y, NAMES4, n_estimators=0)
        np.testing.assert_allclose(m.predict_proba_matrix(X), y.mean(), rtol=1e-12)

    def test_missing_feature(self):
        m = train("LR", *blobs(), ["a", "b"])
        with pytest.raises(MissingFeature):
            predict_proba(m, {"a": 1.0})

    def test_rf_one_tree_equals_dt(self):
        X, y = noisy(120, seed=4)
        dt = train("DT", X, y, NAMES4)
        rf = train("RF", X, y, NAMES4, n_estimators=1, max_features=4, bootstrap=False)
        np.testing.assert_array_equal(dt.predict_proba_matrix(X), rf.predict_proba_matrix(X))


class TestLogistic:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(15, 3))
        y = (rng.random(15) < 0.5).astype(float)
        params = rng.normal(size=4)
        _, g = logistic_loss_and_grad(params, X, y)
        h = 1e-6
        fd = np.array([
            (logistic_loss_and_grad(params + h * e, X, y)[0] - logistic_loss_and_grad(params - h * e, X, y)[0]) / (2 * h)
            for e in np.eye(4)
        ])
        assert np.linalg.norm(fd - g) <= 1e-4 * max(1.0, np.linalg.norm(g))

    def test_converges(self):
        X, y = noisy(100)
        coef, b, n_iter = fit_logistic(X, y.astype(float))
        _, g = logistic_loss_and_grad(np.append(coef, b), X, y.astype(float))
        assert np.linalg.norm(g) < 1e-6 and n_iter < 50


class TestBoosting:
    @pytest.mark.parametrize("kind", ["GBM", "XGB"])
    @pytest.mark.parametrize("seed", range(5))
    def test_loss_non_increasing(self, kind, seed):
        X, y = noisy(150, seed=seed)
        losses = train(kind, X, y, NAMES4).meta["train_log_loss"]
        assert len(losses) == 101
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_recorded_loss_matches_direct(self):
        X, y = noisy(60)
        m = train("GBM", X, y, NAMES4, n_estimators=7)
        p = m.predict_proba_matrix(X)
        assert m.meta["train_log_loss"][-1] == pytest.approx(log_loss_direct(y, p), rel=1e-9)

    def test_regressor_depth(self):
        X, y = noisy(100)
        t = grow_regressor(X, y - 0.5, np.full(100, 0.25), max_depth=3)
        assert t.depth() <= 3


class TestTrees:
    def test_pure_node_is_leaf(self):
        t = grow_classifier(XOR_X, np.zeros(4))
        assert t.n_nodes == 1

    def test_max_depth(self):
        X, y = noisy(200)
        assert grow_classifier(X, y.astype(float), max_depth=2).depth() <= 2

    def test_fits_training_data(self):
        X, y = noisy(100, seed=9)
        t = grow_classifier(X, y.astype(float))
        np.testing.assert_array_equal(t.predict(X), y)


class TestSerialization:
    @pytest.mark.parametrize("kind", KINDS)
    def test_roundtrip_and_determinism(self, kind):
        X, y = noisy(60)
        opts = {"n_estimators": 8} if kind in ("RF", "GBM", "XGB") else {}
        a = train(kind, X, y, NAMES4, seed=5, combo="Base", project="p", **opts)
        b = train(kind, X, y, NAMES4, seed=5, combo="Base", project="p", **opts)
        assert a.dumps() == b.dumps()
        back = TrainedModel.loads(a.dumps())
        np.testing.assert_array_equal(back.predict_proba_matrix(X), a.predict_proba_matrix(X))
        assert back.dumps() == a.dumps()

    def test_seed_changes_stochastic_learners(self):
        X, y = noisy(60)
        a = train("RF", X, y, NAMES4, seed=1, n_estimators=5)
        b = train("RF", X, y, NAMES4, seed=2, n_estimators=5)
        assert a.dumps() != b.dumps()

    def test_rejects_unknown_format(self):
        with pytest.raises(ValueError):
            TrainedModel.from_dict({"format": "other", "version": 1})


class TestMatrix:
    def test_combo_features(self):
        kept = ["num_developers", "is_fix", "lines_added", "nodes_added"]
        assert combo_features(FeatureCombo.BASE, kept) == ["num_developers", "is_fix"]
        assert combo_features("Textual", kept) == ["num_developers", "is_fix", "lines_added"]
        assert combo_features("Visual", kept) == ["num_developers", "is_fix", "nodes_added"]
        assert combo_features("Combined", kept) == kept

    def test_24_cells(self):
        rng = np.random.default_rng(0)
        names = ["num_developers", "is_fix", "lines_added", "nodes_added"]
        X = rng.normal(size=(40, 4))
        y = (X[:, 0] > 0).astype(int)
        cells = train_matrix(X, y, names, n_estimators=5)
        assert len(cells) == 24 and all(c.model is not None for c in cells)
        assert {(c.kind, c.combo) for c in cells} == {(k, c) for k in KINDS for c in COMBOS}

    def test_empty_combo_recorded(self):
        rng = np.random.default_rng(0)
        names = ["num_developers", "lines_added"]
        X = rng.normal(size=(30, 2))
        y = (X[:, 0] > 0).astype(int)
        cells = train_matrix(X, y, names, kinds=[LearnerKind.LR])
        errors = {c.combo: c.error for c in cells}
        assert errors[FeatureCombo.VISUAL] is None  # falls back to the process features
        cells = train_matrix(X[:, 1:], y, names[1:], kinds=[LearnerKind.LR])
        failed = {c.combo for c in cells if c.error}
        assert failed == {FeatureCombo.BASE, FeatureCombo.VISUAL}
        assert all("EmptyFeatureSet" in c.error for c in cells if c.error)

    def test_feature_names_cover_all_categories(self):
        assert len(combo_features("Combined", FEATURE_NAMES)) == 20
