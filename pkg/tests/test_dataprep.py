import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import spearman_rank_difference, vif_from_inverse_correlation
from visjit.dataprep import (
    Dataset,
    MinorityTooSmall,
    SingleClass,
    TooFewRows,
    ZeroVariance,
    autospearman,
    smote,
    spearman_matrix,
    spearman_rho,
    time_split,
    vif,
)


def dataset(n, seed=0, shuffle=True):
    rng = np.random.default_rng(seed)
    ts = np.arange(n) * 10
    order = rng.permutation(n) if shuffle else np.arange(n)
    return Dataset(["a", "b"], rng.normal(size=(n, 2)), (np.arange(n) % 3 == 0).astype(int)[order],
                   [f"h{i:03d}" for i in order], ts[order])


class TestTimeSplit:
    def test_hundred_rows(self):
        train, test = time_split(dataset(100))
        assert (len(train), len(test)) == (80, 20)
        assert train.timestamps.max() <= test.timestamps.min()

    def test_ten_rows(self):
        train, test = time_split(dataset(10))
        assert (len(train), len(test)) == (8, 2)

    def test_too_few(self):
        with pytest.raises(TooFewRows):
            time_split(dataset(4))

    def test_hash_tiebreak(self):
        d = Dataset(["a"], np.zeros((6, 1)), np.zeros(6, int), ["f", "e", "d", "c", "b", "a"], np.zeros(6, int))
        train, test = time_split(d, 0.5)
        assert train.hashes == ["a", "b", "c"]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(5, 60), st.floats(0.05, 0.95), st.integers(0, 10**6))
    def test_never_test_before_train(self, n, frac, seed):
        rng = np.random.default_rng(seed)
        ts = rng.integers(0, 5, size=n)
        d = Dataset(["a"], rng.normal(size=(n, 1)), np.zeros(n, int), [f"{i:03d}" for i in range(n)], ts)
        train, test = time_split(d, frac)
        assert len(train) == math.floor(frac * n)
        if len(train) and len(test):
            last = max(zip(train.timestamps, train.hashes))
            first = min(zip(test.timestamps, test.hashes))
            assert last < first


class TestSpearman:
    def test_examples(self):
        assert spearman_rho([1, 2, 3], [10, 20, 30]) == 1.0
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1.0
        assert spearman_rho([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)

    def test_constant(self):
        with pytest.raises(ZeroVariance):
            spearman_rho([1, 1, 1], [1, 2, 3])

    def test_matches_rank_difference_formula(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            x, y = rng.permutation(12), rng.permutation(12)
            assert spearman_rho(x, y) == pytest.approx(spearman_rank_difference(list(x), list(y)), abs=1e-12)

    def test_matrix_zeroes_constant_columns(self):
        X = np.column_stack([np.arange(5), np.ones(5), np.arange(5)[::-1]])
        C = spearman_matrix(X)
        assert C[0, 2] == pytest.approx(-1.0)
        assert C[0, 1] == 0.0 and C[1, 1] == 1.0


class TestVif:
    def test_orthogonal(self):
        X = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
        assert vif(0, X) == pytest.approx(1.0, abs=1e-12)

    def test_duplicate_is_infinite(self):
        x = np.random.default_rng(0).normal(size=20)
        assert vif(1, np.column_stack([x, x])) == math.inf

    def test_linear_combination_is_infinite(self):
        rng = np.random.default_rng(1)
        x1, x2 = rng.normal(size=30), rng.normal(size=30)
        assert vif(2, np.column_stack([x1, x2, x1 + x2])) == math.inf

    def test_matches_inverse_correlation_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            X = rng.normal(size=(40, 4))
            X[:, 3] += 0.8 * X[:, 0]
            oracle = vif_from_inverse_correlation(X)
            for j in range(4):
                assert vif(j, X) == pytest.approx(oracle[j], rel=1e-9)


def _gaussian_fixture(seed=0, n=200):
    rng = np.random.default_rng(seed)
    x1, x2 = rng.normal(size=n), rng.normal(size=n)
    return np.column_stack([x1, x2, x1 + x2])


def assert_thresholds(X, names, sel, rho=0.7, vif_max=5.0):
    idx = [names.index(k) for k in sel.kept]
    C = np.abs(spearman_matrix(X[:, idx]))
    np.fill_diagonal(C, 0)
    assert (C < rho).all()
    if len(idx) >= 2:
        assert all(vif(j, X[:, idx]) < vif_max for j in range(len(idx)))


class TestAutoSpearman:
    def test_duplicate_column(self):
        rng = np.random.default_rng(0)
        x, z = rng.normal(size=50), rng.normal(size=50)
        sel = autospearman(np.column_stack([x, x, z]), ["a", "b", "c"])
        assert sel.kept == ["a", "c"]
        assert sel.dropped == [("b", "correlation", "a")]

    def test_independent_kept(self):
        X = np.random.default_rng(1).normal(size=(100, 4))
        assert autospearman(X, list("abcd")).kept == list("abcd")

    def test_linear_combination_dropped_by_vif(self):
        X = _gaussian_fixture()
        C = np.abs(spearman_matrix(X))
        np.fill_diagonal(C, 0)
        assert (C < 0.7).all()
        sel = autospearman(X, ["x1", "x2", "x3"])
        assert sel.kept == ["x1", "x2"]
        assert [(f, r) for f, r, _ in sel.dropped] == [("x3", "vif")]

    def test_category_floor_restores_member(self):
        rng = np.random.default_rng(3)
        x, z = rng.normal(size=80), rng.normal(size=80)
        # v1 tracks p1 closely and also leans on p2, so it is the one stage 1 drops
        X = np.column_stack([x, z, 0.9 * x + 0.45 * z + 0.05 * rng.normal(size=80)])
        names = ["p1", "p2", "v1"]
        plain = autospearman(X, names)
        assert "v1" not in plain.kept
        sel = autospearman(X, names, {"p1": "process", "p2": "process", "v1": "visual"})
        assert "v1" in sel.kept and sel.restored == ["v1"]

    def test_deterministic(self):
        X = np.random.default_rng(4).normal(size=(60, 6))
        X[:, 5] = X[:, 0] * 2 + X[:, 1]
        names = list("abcdef")
        assert autospearman(X, names).to_dict() == autospearman(X, names).to_dict()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.integers(2, 8))
    def test_thresholds_hold(self, seed, d):
        rng = np.random.default_rng(seed)
        n = 40
        X = rng.normal(size=(n, d))
        mix = rng.normal(size=(d, d)) * (rng.random((d, d)) < 0.3)
        X = X + X @ mix
        names = [f"f{i}" for i in range(d)]
        assert_thresholds(X, names, autospearman(X, names))


class TestSmote:
    def _data(self, n_maj=10, n_min=4, seed=0):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(size=(n_maj, 3)), rng.normal(3, 1, size=(n_min, 3))])
        y = np.array([0] * n_maj + [1] * n_min)
        return X, y

    def test_balances(self):
        X, y = self._data()
        res = smote(X, y)
        assert np.bincount(res.y).tolist() == [10, 10]
        assert res.synthetic.sum() == 6
        np.testing.assert_array_equal(res.X[:14], X)

    def test_balanced_unchanged(self):
        X, y = self._data(5, 5)
        res = smote(X, y)
        np.testing.assert_array_equal(res.X, X)
        assert not res.synthetic.any()

    def test_two_point_segment(self):
        X = np.array([[0, 0], [1, 1], [5, 9], [6, 2], [7, 7]], dtype=float)
        y = np.array([1, 1, 0, 0, 0])
        res = smote(X, y, k=1)
        syn = res.X[res.synthetic]
        np.testing.assert_allclose(syn[:, 0], syn[:, 1], atol=1e-12)
        assert ((syn >= 0) & (syn <= 1)).all()

    def test_convex_combinations(self):
        X, y = self._data(30, 7, seed=2)
        res = smote(X, y, k=3, seed=11)
        mean, scale = X.mean(0), X.std(0)
        Z = (res.X - mean) / scale
        for row, (b, m, u) in zip(np.nonzero(res.synthetic)[0], res.origins):
            assert y[b] == y[m] == 1 and b != m
            expected = Z[b] + u * (Z[m] - Z[b])
            assert np.abs(Z[row] - expected).max() < 1e-9

    def test_reproducible(self):
        X, y = self._data(20, 6)
        a, b = smote(X, y, seed=4), smote(X, y, seed=4)
        assert a.X.tobytes() == b.X.tobytes()
        assert smote(X, y, seed=5).X.tobytes() != a.X.tobytes()

    def test_boolean_columns_rounded(self):
        X, y = self._data(12, 4)
        X[:, 2] = [0, 1] * 8
        res = smote(X, y, boolean_columns=[2])
        assert set(np.unique(res.X[:, 2])) <= {0.0, 1.0}

    def test_errors(self):
        X, y = self._data(5, 1)
        with pytest.raises(MinorityTooSmall):
            smote(X, y)
        with pytest.raises(SingleClass):
            smote(X, np.zeros(6, int))

    def test_k_capped_by_minority(self):
        X, y = self._data(10, 3)
        res = smote(X, y, k=50)
        assert np.bincount(res.y).tolist() == [10, 10]
