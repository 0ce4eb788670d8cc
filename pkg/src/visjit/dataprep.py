"""Time-ordered splitting, AutoSpearman feature selection and SMOTE."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

CORRELATION_THRESHOLD = 0.7
VIF_THRESHOLD = 5.0


class TooFewRows(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class SingleClass(ValueError):
    pass


class MinorityTooSmall(ValueError):
    pass


@dataclass
class Dataset:
    """Feature matrix with per-row commit identity and time."""

    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    hashes: list[str]
    timestamps: np.ndarray

    def __len__(self) -> int:
        return int(self.y.size)

    def take(self, rows: Sequence[int]) -> Dataset:
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            list(self.feature_names),
            self.X[rows],
            self.y[rows],
            [self.hashes[i] for i in rows],
            self.timestamps[rows],
        )

    def columns(self, names: Sequence[str]) -> Dataset:
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(list(names), self.X[:, idx], self.y, list(self.hashes), self.timestamps)

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping], feature_names: Sequence[str], label: str) -> Dataset:
        return cls(
            list(feature_names),
            np.array([[float(r[f]) for f in feature_names] for r in rows], dtype=np.float64).reshape(
                len(rows), len(feature_names)
            ),
            np.array([int(r[label]) for r in rows], dtype=np.int64),
            [r["hash"] for r in rows],
            np.array([int(r["timestamp"]) for r in rows], dtype=np.int64),
        )


def time_split(data: Dataset, train_fraction: float = 0.8) -> tuple[Dataset, Dataset]:
    """Oldest ⌊fraction·n⌋ rows train, the rest test; order is (timestamp, hash)."""
    n = len(data)
    if n < 5:
        raise TooFewRows(f"need at least 5 rows, got {n}")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    order = sorted(range(n), key=lambda i: (int(data.timestamps[i]), data.hashes[i]))
    cut = math.floor(train_fraction * n)
    return data.take(order[:cut]), data.take(order[cut:])


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of mid-ranks."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    rx, ry = rankdata(x), rankdata(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise ZeroVariance("constant input, correlation undefined")
    return float(np.clip(rx @ ry / denom, -1.0, 1.0))


def spearman_matrix(X: np.ndarray) -> np.ndarray:
    """|ρ| matrix; pairs involving a constant column count as 0."""
    X = np.asarray(X, dtype=np.float64)
    R = np.apply_along_axis(rankdata, 0, X) if X.size else X
    R = R - R.mean(axis=0)
    norms = np.sqrt((R * R).sum(axis=0))
    ok = norms > 0
    R[:, ok] = R[:, ok] / norms[ok]
    C = np.clip(R.T @ R, -1.0, 1.0)
    C[~ok, :] = 0.0
    C[:, ~ok] = 0.0
    np.fill_diagonal(C, 1.0)
    return C


def vif(feature_index: int, matrix: np.ndarray) -> float:
    """1/(1−R²) of an OLS fit of one column on the others; exact fits give +inf."""
    M = np.asarray(matrix, dtype=np.float64)
    target = M[:, feature_index]
    others = np.delete(M, feature_index, axis=1)
    A = np.column_stack([np.ones(M.shape[0]), others])
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    resid = target - A @ coef
    sst = float(((target - target.mean()) ** 2).sum())
    ssr = float(resid @ resid)
    if sst == 0.0 or ssr <= 1e-10 * sst:
        return math.inf
    return max(1.0, sst / ssr)


@dataclass
class FeatureSelection:
    kept: list[str]
    dropped: list[tuple[str, str, str | float]] = field(default_factory=list)
    restored: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kept": list(self.kept),
            "dropped": [
                {"feature": f, "reason": r, "partner_or_score": p if not isinstance(p, float) or math.isfinite(p) else "inf"}
                for f, r, p in self.dropped
            ],
            "restored_for_category_floor": list(self.restored),
        }


def _eliminate(
    names: list[str],
    X: np.ndarray,
    active: list[int],
    protected: set[int],
    rho: float,
    vif_max: float,
    dropped: list,
) -> list[int]:
    corr = np.abs(spearman_matrix(X))
    active = list(active)
    exempt: set[tuple[int, int]] = set()
    # correlation stage
    while True:
        best = None
        for a_pos, a in enumerate(active):
            for b in active[a_pos + 1:]:
                if (a, b) in exempt:
                    continue
                if corr[a, b] >= rho and (best is None or corr[a, b] > corr[best[0], best[1]]):
                    best = (a, b)
        if best is None:
            break
        a, b = best
        others = [k for k in active if k not in best]

        def mean_corr(i: int) -> float:
            return float(np.mean(corr[i, others])) if others else 0.0

        # drop the member with the higher mean |ρ|; ties drop the later column
        drop, keep = (a, b) if mean_corr(a) > mean_corr(b) else (b, a)
        if drop in protected:
            drop, keep = keep, drop
        if drop in protected:
            exempt.add(best)
            continue
        active.remove(drop)
        dropped.append((names[drop], "correlation", names[keep]))
    # multicollinearity stage
    while len(active) >= 2:
        scores = [vif(j, X[:, active]) for j in range(len(active))]
        # highest VIF goes first; ties drop the later column
        candidates = [(s, j) for j, s in enumerate(scores) if s >= vif_max and active[j] not in protected]
        if not candidates:
            break
        s, j = max(candidates)
        drop = active[j]
        active.remove(drop)
        dropped.append((names[drop], "vif", float(s)))
    return active


def autospearman(
    X: np.ndarray,
    feature_names: Sequence[str],
    categories: Mapping[str, str] | None = None,
    rho: float = CORRELATION_THRESHOLD,
    vif_max: float = VIF_THRESHOLD,
) -> FeatureSelection:
    """Drop correlated, then multicollinear, features from the training matrix.

    With ``categories`` (feature -> category), any category emptied by the
    two stages gets its least-correlated member back, and elimination is
    rerun around the restored features.
    """
    names = list(feature_names)
    X = np.asarray(X, dtype=np.float64)
    dropped: list = []
    active = _eliminate(names, X, list(range(len(names))), set(), rho, vif_max, dropped)
    restored: list[int] = []
    if categories:
        corr = np.abs(spearman_matrix(X))
        kept_cats = {categories.get(names[i]) for i in active}
        for cat in dict.fromkeys(categories[n] for n in names if n in categories):
            if cat in kept_cats:
                continue
            members = [i for i, n in enumerate(names) if categories.get(n) == cat]
            base = active + restored

            def score(i: int) -> float:
                return float(np.mean(corr[i, base])) if base else 0.0

            restored.append(min(members, key=lambda i: (score(i), i)))
        if restored:
            protected = set(restored)
            dropped = [d for d in dropped if names.index(d[0]) not in protected]
            start = sorted(set(active) | protected)
            active = _eliminate(names, X, start, protected, rho, vif_max, dropped)
    active.sort()
    return FeatureSelection([names[i] for i in active], dropped, [names[i] for i in sorted(restored)])


@dataclass
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray  # bool mask of generated rows
    # for each synthetic row: (base row, neighbour row, u) indices into the input
    origins: list[tuple[int, int, float]]


def smote(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    seed: int = 0,
    boolean_columns: Sequence[int] = (),
) -> SmoteResult:
    """Oversample the minority class by k-NN interpolation until classes balance.

    Neighbours are searched in train-standardized space; synthetic points are
    mapped back to the original scale and boolean columns rounded to {0, 1}.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise SingleClass("SMOTE needs both classes")
    minority = classes[np.argmin(counts)]
    n_min, n_maj = counts.min(), counts.max()
    if n_min == n_maj:
        return SmoteResult(X.copy(), y.copy(), np.zeros(y.size, dtype=bool), [])
    if n_min < 2:
        raise MinorityTooSmall("minority class needs at least 2 rows")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    min_rows = np.nonzero(y == minority)[0]
    Zm = Z[min_rows]
    kk = min(k, n_min - 1)
    d2 = ((Zm[:, None, :] - Zm[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :kk]

    rng = np.random.default_rng(seed)
    need = int(n_maj - n_min)
    base = rng.integers(0, n_min, size=need)
    pick = rng.integers(0, kk, size=need)
    u = rng.random(need)
    nb = neighbours[base, pick]
    Zs = Zm[base] + u[:, None] * (Zm[nb] - Zm[base])
    Xs = Zs * scale + mean
    for c in boolean_columns:
        Xs[:, c] = np.clip(np.round(Xs[:, c]), 0, 1)
    origins = [(int(min_rows[b]), int(min_rows[m]), float(t)) for b, m, t in zip(base, nb, u)]
    return SmoteResult(
        np.vstack([X, Xs]),
        np.concatenate([y, np.full(need, minority, dtype=y.dtype)]),
        np.concatenate([np.zeros(y.size, dtype=bool), np.ones(need, dtype=bool)]),
        origins,
    )
