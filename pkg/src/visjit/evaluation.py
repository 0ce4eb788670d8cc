"""Model scoring and non-parametric comparison of treatments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

ALPHA = 0.05
NEGLIGIBLE_DELTA = 0.147
EXACT_MAX_N = 20


class SingleClass(ValueError):
    pass


@dataclass(frozen=True)
class Score:
    auc: float | None
    mcc: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def confusion(self) -> tuple[int, int, int, int]:
        return self.tp, self.fp, self.tn, self.fn


def auc(probabilities: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney estimate of the area under the ROC curve (ties count ½)."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(p)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def confusion(probabilities: Sequence[float], labels: Sequence[int], threshold: float = 0.5):
    pred = np.asarray(probabilities) >= threshold
    y = np.asarray(labels).astype(bool)
    return (
        int((pred & y).sum()),
        int((pred & ~y).sum()),
        int((~pred & ~y).sum()),
        int((~pred & y).sum()),
    )


def mcc(tp: int, fp: int, tn: int, fn: int) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return float((tp * tn - fp * fn) / math.sqrt(denom))


def score(probabilities: Sequence[float], labels: Sequence[int], threshold: float = 0.5) -> Score:
    tp, fp, tn, fn = confusion(probabilities, labels, threshold)
    try:
        a = auc(probabilities, labels)
    except SingleClass:
        a = None
    return Score(a, mcc(tp, fp, tn, fn), tp, fp, tn, fn)


# -- rank-sum test -------------------------------------------------------------

def _rank_sum_distribution(doubled_ranks: Sequence[int], m: int) -> dict[int, int]:
    """Counts of every achievable sum of ``m`` of the (doubled) ranks."""
    # ways[j][s]: subsets of size j with doubled-rank sum s
    ways: list[dict[int, int]] = [dict() for _ in range(m + 1)]
    ways[0][0] = 1
    for r in doubled_ranks:
        for j in range(m, 0, -1):
            prev = ways[j - 1]
            cur = ways[j]
            for s, c in prev.items():
                cur[s + r] = cur.get(s + r, 0) + c
    return ways[m]


@dataclass(frozen=True)
class RankSumResult:
    u: float
    p_value: float
    method: str

    def reject(self, alpha: float = ALPHA) -> bool:
        return self.p_value < alpha


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> RankSumResult:
    """Two-sided Wilcoxon rank-sum / Mann-Whitney test; ``u`` is U of ``a``.

    Uses the exact permutation distribution of the mid-rank sum (ties kept)
    when the combined size is at most 20, otherwise the tie-corrected normal
    approximation with continuity correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = a.size, b.size
    if m == 0 or n == 0:
        raise ValueError("both samples must be non-empty")
    ranks = rankdata(np.concatenate([a, b]))
    r_a = float(ranks[:m].sum())
    u = r_a - m * (m + 1) / 2.0
    mu = m * n / 2.0
    N = m + n
    if N <= EXACT_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        dist = _rank_sum_distribution(doubled, m)
        total = sum(dist.values())
        # compare |2R − 2E[R]| on the doubled integer scale
        center = m * (N + 1)
        obs = abs(int(round(2 * r_a)) - center)
        extreme = sum(c for s, c in dist.items() if abs(s - center) >= obs)
        return RankSumResult(u, min(1.0, extreme / total), "exact")
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float((counts**3 - counts).sum())
    var = m * n / 12.0 * ((N + 1) - tie_term / (N * (N - 1)))
    if var <= 0:
        return RankSumResult(u, 1.0, "normal")
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    p = 2.0 * norm.sf(max(z, 0.0))
    return RankSumResult(u, min(1.0, float(p)), "normal")


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    # counts via sorted search keeps this O((m+n) log n)
    bs = np.sort(b)
    greater = np.searchsorted(bs, a, side="left").sum()
    less = (b.size - np.searchsorted(bs, a, side="right")).sum()
    return float((greater - less) / (a.size * b.size))


def is_negligible(delta: float) -> bool:
    return abs(delta) < NEGLIGIBLE_DELTA


# -- Scott-Knott ESD (non-parametric) -----------------------------------------

@dataclass
class RankGroups:
    groups: list[tuple[int, list[str]]] = field(default_factory=list)

    def rank_of(self, name: str) -> int:
        for rank, members in self.groups:
            if name in members:
                return rank
        raise KeyError(name)

    def to_dict(self) -> list[dict]:
        return [{"rank": r, "treatments": list(m)} for r, m in self.groups]


def _best_split(medians: Sequence[float]) -> int:
    """Cut index maximizing the between-group sum of squares of medians."""
    meds = np.asarray(medians, dtype=np.float64)
    grand = meds.mean()
    best_k, best_ss = 1, -math.inf
    for k in range(1, meds.size):
        left, right = meds[:k], meds[k:]
        ss = left.size * (left.mean() - grand) ** 2 + right.size * (right.mean() - grand) ** 2
        if ss > best_ss + 1e-12:
            best_k, best_ss = k, ss
    return best_k


def npsk_rank(treatments: Mapping[str, Sequence[float]], alpha: float = ALPHA) -> RankGroups:
    """Partition treatments into ranked groups by their medians.

    Treatments are ordered by median (descending, then name). A segment is
    split where the between-group sum of squares of medians peaks, and the
    split is kept only if the pooled sides differ under the rank-sum test
    and their Cliff's delta is not negligible.
    """
    if not treatments:
        raise ValueError("need at least one treatment")
    data = {k: np.asarray(v, dtype=np.float64) for k, v in treatments.items()}
    if any(v.size == 0 for v in data.values()):
        raise ValueError("every treatment needs at least one value")
    order = sorted(data, key=lambda k: (-float(np.median(data[k])), k))
    medians = [float(np.median(data[k])) for k in order]

    segments: list[list[str]] = []

    def recurse(lo: int, hi: int) -> None:
        if hi - lo < 2:
            segments.append(order[lo:hi])
            return
        k = lo + _best_split(medians[lo:hi])
        left = np.concatenate([data[t] for t in order[lo:k]])
        right = np.concatenate([data[t] for t in order[k:hi]])
        distinct = wilcoxon_rank_sum(left, right).p_value < alpha
        if distinct and not is_negligible(cliffs_delta(left, right)):
            recurse(lo, k)
            recurse(k, hi)
        else:
            segments.append(order[lo:hi])

    recurse(0, len(order))
    return RankGroups([(i + 1, seg) for i, seg in enumerate(segments)])


def group_scores(rows: Iterable[Mapping], by: str, metric: str) -> dict[str, list[float]]:
    """Collect ``metric`` values per ``by`` column (skipping missing values)."""
    out: dict[str, list[float]] = {}
    for r in rows:
        v = r.get(metric)
        if v is None or v == "" or (isinstance(v, float) and math.isnan(v)):
            continue
        out.setdefault(str(r[by]), []).append(float(v))
    return out
