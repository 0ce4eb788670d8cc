import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import split_gains_entropy, split_gains_gradient
from visjit import kernels
from visjit.learners import train
from visjit.learners.tree import grow_classifier

BACKENDS = kernels.available_backends()


def data(seed, n=30, d=3, levels=6):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, size=(n, d)).astype(float)
    y = (rng.random(n) < 0.4).astype(float)
    return X, y


@pytest.mark.parametrize("name", sorted(BACKENDS))
class TestBackend:
    def test_backend_label(self, name):
        assert BACKENDS[name].BACKEND == name

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), min_leaf=st.integers(1, 4))
    def test_entropy_matches_oracle(self, name, seed, min_leaf):
        X, y = data(seed)
        idx = np.arange(0, 30, 2 if seed % 2 else 1)
        f, t, gain = BACKENDS[name].best_split_entropy(X, y, idx, np.arange(3), min_leaf)
        gains = split_gains_entropy(X, y, idx, min_leaf)
        if not gains:
            assert f == -1
            return
        assert gain == pytest.approx(max(gains.values()), abs=1e-12)
        assert gains[(f, t)] == pytest.approx(gain, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), reg=st.sampled_from([0.0, 1.0]))
    def test_gradient_matches_oracle(self, name, seed, reg):
        X, y = data(seed)
        p = np.random.default_rng(seed + 1).uniform(0.1, 0.9, size=30)
        g, h = p - y, p * (1 - p)
        idx = np.arange(30)
        f, t, gain = BACKENDS[name].best_split_gradient(X, g, h, idx, np.arange(3), reg)
        gains = split_gains_gradient(X, g, h, idx, reg)
        assert gain == pytest.approx(max(gains.values()), rel=1e-9, abs=1e-12)
        assert gains[(f, t)] == pytest.approx(gain, rel=1e-9, abs=1e-12)

    def test_constant_features_have_no_split(self, name):
        X = np.ones((5, 2))
        y = np.array([0, 1, 0, 1, 0], dtype=float)
        assert BACKENDS[name].best_split_entropy(X, y, np.arange(5), np.arange(2))[0] == -1

    def test_single_sample(self, name):
        X, y = data(0)
        assert BACKENDS[name].best_split_entropy(X, y, np.array([3]), np.arange(3))[0] == -1

    def test_first_feature_wins_ties(self, name):
        X = np.array([[0, 0], [1, 1]], dtype=float)
        y = np.array([0, 1], dtype=float)
        assert BACKENDS[name].best_split_entropy(X, y, np.arange(2), np.array([1, 0]))[:2] == (1, 0.5)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
class TestEquivalence:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_same_split(self, seed):
        X, y = data(seed, n=40, d=4, levels=10)
        feats = np.random.default_rng(seed).permutation(4)
        a = BACKENDS["python"].best_split_entropy(X, y, np.arange(40), feats, 2)
        b = BACKENDS["cython"].best_split_entropy(X, y, np.arange(40), feats, 2)
        assert a[:2] == b[:2] and a[2] == pytest.approx(b[2], abs=1e-12)

    @pytest.mark.parametrize("kind", ["DT", "RF", "GBM"])
    def test_same_models(self, monkeypatch, kind):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(120, 4)).round(2)
        y = (X[:, 0] + rng.normal(size=120) > 0).astype(int)
        names = ["a", "b", "c", "d"]
        dumps = {}
        for name, mod in BACKENDS.items():
            monkeypatch.setattr(kernels, "best_split_entropy", mod.best_split_entropy)
            monkeypatch.setattr(kernels, "best_split_gradient", mod.best_split_gradient)
            m = train(kind, X, y, names, seed=1, n_estimators=10) if kind != "DT" else train(kind, X, y, names)
            dumps[name] = m.predict_proba_matrix(X)
        np.testing.assert_allclose(dumps["python"], dumps["cython"], rtol=0, atol=1e-12)

    def test_tree_structure(self, monkeypatch):
        X, y = data(11, n=80, d=4, levels=20)
        shapes = []
        for mod in BACKENDS.values():
            monkeypatch.setattr(kernels, "best_split_entropy", mod.best_split_entropy)
            t = grow_classifier(X, y)
            shapes.append((t.feature.tolist(), t.threshold.tolist()))
        assert shapes[0] == shapes[1]
