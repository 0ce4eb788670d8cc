"""The six classifier families and the (learner × feature combination) matrix.

All learners are implemented here on numpy with fixed defaults so that a
(data, seed) pair always yields bit-identical parameters.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import expit

from ..metrics import CATEGORIES
from .boosting import decision_function, fit_boosting
from .linear import fit_logistic
from .mlp import fit_mlp, mlp_proba
from .tree import Tree, grow_classifier

MODEL_FORMAT = "visjit-model"
MODEL_VERSION = 1
THRESHOLD = 0.5


class LearnerKind(str, Enum):
    LR = "LR"
    DT = "DT"
    RF = "RF"
    GBM = "GBM"
    XGB = "XGB"
    NN = "NN"


class FeatureCombo(str, Enum):
    BASE = "Base"
    TEXTUAL = "Textual"
    VISUAL = "Visual"
    COMBINED = "Combined"


KINDS = tuple(LearnerKind)
COMBOS = tuple(FeatureCombo)
_COMBO_CATEGORIES = {
    FeatureCombo.BASE: ("process",),
    FeatureCombo.TEXTUAL: ("process", "textual"),
    FeatureCombo.VISUAL: ("process", "visual"),
    FeatureCombo.COMBINED: ("process", "textual", "visual"),
}

DEFAULTS: dict[LearnerKind, dict[str, Any]] = {
    LearnerKind.LR: {"C": 1.0, "tol": 1e-6, "max_iter": 1000},
    LearnerKind.DT: {"min_samples_split": 2, "min_samples_leaf": 1, "max_depth": None},
    LearnerKind.RF: {"n_estimators": 100, "max_features": "sqrt", "bootstrap": True},
    LearnerKind.GBM: {"n_estimators": 100, "learning_rate": 0.1, "max_depth": 3},
    LearnerKind.XGB: {
        "n_estimators": 100, "learning_rate": 0.1, "max_depth": 3, "reg_lambda": 1.0, "min_child_weight": 1.0,
    },
    LearnerKind.NN: {"hidden": 100, "epochs": 200, "lr": 1e-3, "alpha": 1e-4, "batch_size": 200},
}


class SingleClass(ValueError):
    pass


class EmptyFeatureSet(ValueError):
    pass


class MissingFeature(KeyError):
    pass


def combo_features(combo: FeatureCombo | str, available: Sequence[str]) -> list[str]:
    """Columns of ``available`` belonging to the combination's categories, in order."""
    cats = _COMBO_CATEGORIES[FeatureCombo(combo)]
    wanted = {f for c in cats for f in CATEGORIES[c]}
    return [f for f in available if f in wanted]


def derive_rng(seed: int, kind: LearnerKind | str = "", combo: FeatureCombo | str = "", project: str = ""):
    kind = LearnerKind(kind).value if kind else ""
    combo = FeatureCombo(combo).value if combo else ""
    key = [int(seed)] + [zlib.crc32(s.encode()) for s in (kind, combo, project)]
    return np.random.default_rng(np.random.SeedSequence(key))


@dataclass
class TrainedModel:
    kind: LearnerKind
    feature_names: list[str]
    params: dict[str, Any]
    seed: int = 0
    combo: FeatureCombo | None = None
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def _prep(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.mean is not None:
            X = (X - self.mean) / self.scale
        return X

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        """P(defect-inducing) for each row of ``X`` (columns in ``feature_names`` order)."""
        X = self._prep(X)
        k, p = self.kind, self.params
        if k is LearnerKind.LR:
            out = expit(X @ p["coef"] + p["intercept"])
        elif k is LearnerKind.DT:
            out = p["tree"].predict(X)
        elif k is LearnerKind.RF:
            out = np.mean([t.predict(X) for t in p["trees"]], axis=0)
        elif k in (LearnerKind.GBM, LearnerKind.XGB):
            out = expit(decision_function(p["init"], p["trees"], p["learning_rate"], X))
        else:
            out = mlp_proba(p, X)
        return np.clip(out, 0.0, 1.0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba_matrix(X) >= THRESHOLD).astype(int)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        p = self.params
        if self.kind is LearnerKind.LR:
            params = {"coef": p["coef"].tolist(), "intercept": p["intercept"]}
        elif self.kind is LearnerKind.DT:
            params = {"tree": p["tree"].to_dict()}
        elif self.kind is LearnerKind.RF:
            params = {"trees": [t.to_dict() for t in p["trees"]]}
        elif self.kind in (LearnerKind.GBM, LearnerKind.XGB):
            params = {
                "init": p["init"],
                "learning_rate": p["learning_rate"],
                "trees": [t.to_dict() for t in p["trees"]],
            }
        else:
            params = {k: v.tolist() for k, v in p.items()}
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind.value,
            "combo": self.combo.value if self.combo else None,
            "feature_names": list(self.feature_names),
            "seed": self.seed,
            "preprocessing": None
            if self.mean is None
            else {"mean": self.mean.tolist(), "scale": self.scale.tolist()},
            "params": params,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> TrainedModel:
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model format {d.get('format')}/{d.get('version')}")
        kind = LearnerKind(d["kind"])
        raw = d["params"]
        if kind is LearnerKind.LR:
            params = {"coef": np.asarray(raw["coef"], dtype=np.float64), "intercept": float(raw["intercept"])}
        elif kind is LearnerKind.DT:
            params = {"tree": Tree.from_dict(raw["tree"])}
        elif kind is LearnerKind.RF:
            params = {"trees": [Tree.from_dict(t) for t in raw["trees"]]}
        elif kind in (LearnerKind.GBM, LearnerKind.XGB):
            params = {
                "init": float(raw["init"]),
                "learning_rate": float(raw["learning_rate"]),
                "trees": [Tree.from_dict(t) for t in raw["trees"]],
            }
        else:
            params = {k: np.asarray(v, dtype=np.float64) for k, v in raw.items()}
        pre = d.get("preprocessing")
        return cls(
            kind=kind,
            feature_names=list(d["feature_names"]),
            params=params,
            seed=int(d["seed"]),
            combo=FeatureCombo(d["combo"]) if d.get("combo") else None,
            mean=None if pre is None else np.asarray(pre["mean"], dtype=np.float64),
            scale=None if pre is None else np.asarray(pre["scale"], dtype=np.float64),
            meta=dict(d.get("meta", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> TrainedModel:
        return cls.from_dict(json.loads(text))


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def train(
    kind: LearnerKind | str,
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    seed: int = 0,
    combo: FeatureCombo | str | None = None,
    project: str = "",
    **overrides: Any,
) -> TrainedModel:
    """Fit one learner with its default parameters (``overrides`` replace them)."""
    kind = LearnerKind(kind)
    combo = FeatureCombo(combo) if combo else None
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.float64)
    if X.ndim != 2 or X.shape[1] == 0 or not feature_names:
        raise EmptyFeatureSet(f"{kind.value}/{combo.value if combo else '-'}: no features")
    if X.shape[1] != len(feature_names):
        raise ValueError("feature_names does not match X columns")
    if np.unique(y).size < 2:
        raise SingleClass("training labels contain a single class")

    opts = {**DEFAULTS[kind], **overrides}
    rng = derive_rng(seed, kind, combo or "", project)
    model = TrainedModel(kind, list(feature_names), {}, seed, combo)

    if kind in (LearnerKind.LR, LearnerKind.NN):
        model.mean, model.scale = _standardize(X)
        Xs = (X - model.mean) / model.scale
    if kind is LearnerKind.LR:
        coef, intercept, n_iter = fit_logistic(Xs, y, opts["C"], opts["tol"], opts["max_iter"])
        model.params = {"coef": coef, "intercept": intercept}
        model.meta["n_iter"] = n_iter
    elif kind is LearnerKind.DT:
        model.params = {
            "tree": grow_classifier(
                X, y,
                max_depth=opts["max_depth"],
                min_samples_split=opts["min_samples_split"],
                min_samples_leaf=opts["min_samples_leaf"],
            )
        }
    elif kind is LearnerKind.RF:
        n, d = X.shape
        mf = opts["max_features"]
        if mf == "sqrt":
            mf = max(1, int(math.sqrt(d)))
        trees = []
        for _ in range(opts["n_estimators"]):
            idx = rng.integers(0, n, size=n) if opts["bootstrap"] else None
            trees.append(grow_classifier(X, y, idx=idx, max_features=mf, rng=rng))
        model.params = {"trees": trees}
    elif kind in (LearnerKind.GBM, LearnerKind.XGB):
        second = kind is LearnerKind.XGB
        init, trees, losses = fit_boosting(
            X, y,
            n_estimators=opts["n_estimators"],
            learning_rate=opts["learning_rate"],
            max_depth=opts["max_depth"],
            second_order=second,
            reg_lambda=opts.get("reg_lambda", 0.0) if second else 0.0,
            min_child_weight=opts.get("min_child_weight", 0.0) if second else 0.0,
        )
        model.params = {"init": init, "learning_rate": float(opts["learning_rate"]), "trees": trees}
        model.meta["train_log_loss"] = losses
    else:
        model.params = fit_mlp(
            Xs, y, rng,
            hidden=opts["hidden"], epochs=opts["epochs"], lr=opts["lr"],
            alpha=opts["alpha"], batch_size=opts["batch_size"],
        )
    return model


def predict_proba(model: TrainedModel, row: Mapping[str, float]) -> float:
    """P(defect-inducing) for one feature mapping."""
    missing = [f for f in model.feature_names if f not in row]
    if missing:
        raise MissingFeature(", ".join(missing))
    x = np.array([float(row[f]) for f in model.feature_names])
    return float(model.predict_proba_matrix(x)[0])


@dataclass
class MatrixCell:
    kind: LearnerKind
    combo: FeatureCombo
    model: TrainedModel | None = None
    error: str | None = None


def train_matrix(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    seed: int = 0,
    project: str = "",
    kinds: Sequence[LearnerKind] = KINDS,
    combos: Sequence[FeatureCombo] = COMBOS,
    **overrides: Any,
) -> list[MatrixCell]:
    """Train every (learner, feature combination) cell; failures are kept, not raised."""
    X = np.asarray(X, dtype=np.float64)
    cells = []
    for combo in combos:
        cols = combo_features(combo, feature_names)
        sel = [list(feature_names).index(c) for c in cols]
        for kind in kinds:
            cell = MatrixCell(LearnerKind(kind), FeatureCombo(combo))
            try:
                cell.model = train(
                    kind, X[:, sel], y, cols, seed=seed, combo=combo, project=project,
                    **overrides.get(LearnerKind(kind).value, {}),
                )
            except (EmptyFeatureSet, SingleClass) as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
            cells.append(cell)
    return cells
