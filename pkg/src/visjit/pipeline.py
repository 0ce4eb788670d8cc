"""End-to-end orchestration: every stage reads and writes plain artifacts.

Layout under the output directory::

    <project>/commits.jsonl  labels.jsonl  eligibility.json  features.csv
    <project>/selection.json split.json  train_balanced.csv  train_status.json
    <project>/evaluation.csv ranks.json  report.json
    models/<project>/<learner>_<combo>.json
    evaluation.csv  ranks.json  summary.json  errors.json

Artifacts carry no wall-clock times or absolute paths, so reruns with the
same inputs and seeds are byte-identical.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import dataprep, evaluation, labeling, learners, metrics, mining
from .mining import TEXTUAL, VISUAL, COMBO_ORDER, CommitRecord, commit_file_combo
from .vcs import GitRepository

log = logging.getLogger(__name__)

MORE_VISUAL = "more-visual"
MORE_TEXTUAL = "more-textual"
EVALUATION_COLUMNS = ("project", "kind", "combo", "auc", "mcc", "tp", "fp", "tn", "fn", "status")
METRICS = ("auc", "mcc")


class EmptyGroup(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, error: BaseException):
        super().__init__(f"{stage}: {type(error).__name__}: {error}")
        self.stage, self.error = stage, error


@dataclass
class RepoSpec:
    path: str
    branch: str = "main"
    name: str | None = None


@dataclass
class RunConfig:
    repos: list[RepoSpec] = field(default_factory=list)
    out_dir: str = "out"
    strategy: str = "keywords"
    keywords: tuple[str, ...] = labeling.DEFAULT_KEYWORDS
    issues_csv: str | None = None
    textual_extensions: tuple[str, ...] = mining.DEFAULT_TEXTUAL_EXTENSIONS
    count_position_changes: bool = False
    vc_strategy: str = labeling.FULL_CHAIN
    min_commits: int = 200
    rho: float = dataprep.CORRELATION_THRESHOLD
    vif: float = dataprep.VIF_THRESHOLD
    train_fraction: float = 0.8
    smote_k: int = 5
    smote_seed: int = 0
    seed: int = 0
    pool: str = "scores"
    jobs: int = 1

    def __post_init__(self) -> None:
        self.repos = [r if isinstance(r, RepoSpec) else RepoSpec(**r) for r in self.repos]
        self.keywords = tuple(self.keywords)
        self.textual_extensions = tuple(self.textual_extensions)
        if not (self.rho > 0 and self.vif > 0):
            raise ValueError("thresholds must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.smote_k < 1:
            raise ValueError("smote_k must be >= 1")
        if self.pool not in ("scores", "medians"):
            raise ValueError("pool must be 'scores' or 'medians'")
        if self.vc_strategy not in (labeling.FULL_CHAIN, labeling.MOST_RECENT):
            raise labeling.UnknownStrategy(self.vc_strategy)

    @classmethod
    def from_file(cls, path: str | os.PathLike, **overrides: Any) -> RunConfig:
        data = json.loads(Path(path).read_text())
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def project_names(self) -> list[str]:
        names, seen = [], {}
        for r in self.repos:
            base = r.name or Path(r.path).resolve().name
            seen[base] = seen.get(base, 0) + 1
            names.append(base if seen[base] == 1 else f"{base}-{seen[base]}")
        return names


# -- artifact helpers -----------------------------------------------------------

def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text())


def _num(v: float | int | None) -> str:
    if v is None:
        return ""
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


@dataclass(frozen=True)
class ProjectPaths:
    out: Path
    name: str

    @property
    def dir(self) -> Path:
        return self.out / self.name

    @property
    def models(self) -> Path:
        return self.out / "models" / self.name

    def __getattr__(self, item: str) -> Path:
        files = {
            "commits": "commits.jsonl",
            "labels": "labels.jsonl",
            "eligibility": "eligibility.json",
            "features": "features.csv",
            "selection": "selection.json",
            "split": "split.json",
            "train_balanced": "train_balanced.csv",
            "train_status": "train_status.json",
            "evaluation": "evaluation.csv",
            "ranks": "ranks.json",
            "report": "report.json",
        }
        if item in files:
            return self.dir / files[item]
        raise AttributeError(item)

    def load_commits(self) -> list[CommitRecord]:
        with open(self.commits, encoding="utf-8") as fh:
            return mining.load_commits(fh)

    def load_labels(self) -> labeling.LabelSet:
        with open(self.labels, encoding="utf-8") as fh:
            return labeling.load_labels(fh)


# -- stages ---------------------------------------------------------------------

def mine_stage(repo: RepoSpec, paths: ProjectPaths, cfg: RunConfig) -> mining.EligibilityReport:
    history = mining.walk_history(
        repo.path, repo.branch, cfg.textual_extensions, count_position_changes=cfg.count_position_changes
    )
    paths.dir.mkdir(parents=True, exist_ok=True)
    with open(paths.commits, "w", encoding="utf-8") as fh:
        mining.dump_commits(history, fh)
    report = mining.check_eligibility(history, min_commits=cfg.min_commits)
    write_json(paths.eligibility, report.to_dict())
    return report


def label_stage(repo: RepoSpec, paths: ProjectPaths, cfg: RunConfig) -> mining.EligibilityReport:
    history = paths.load_commits()
    issues = None
    if cfg.issues_csv:
        with open(cfg.issues_csv, encoding="utf-8") as fh:
            issues = labeling.load_issues(fh)
    fixes = labeling.identify_fix_commits(history, cfg.strategy, cfg.keywords, issues)
    with GitRepository(repo.path) as git:
        labels = labeling.label_commits(history, fixes, git, cfg.vc_strategy)
    with open(paths.labels, "w", encoding="utf-8") as fh:
        labeling.dump_labels(labels, history, fh)
    report = mining.check_eligibility(history, labels, min_commits=cfg.min_commits)
    write_json(paths.eligibility, report.to_dict())
    return report


def features_stage(paths: ProjectPaths) -> int:
    history = paths.load_commits()
    labels = paths.load_labels()
    vectors = metrics.extract_features(history, labels.fix_commits, labels.inducing_commits)
    with open(paths.features, "w", encoding="utf-8", newline="") as fh:
        metrics.write_features_csv(vectors, fh)
    return len(vectors)


def load_dataset(paths: ProjectPaths) -> dataprep.Dataset:
    with open(paths.features, encoding="utf-8", newline="") as fh:
        rows = metrics.read_features_csv(fh)
    stamps = {c.hash: c.timestamp for c in paths.load_commits()}
    for r in rows:
        r["timestamp"] = stamps[r["hash"]]
    return dataprep.Dataset.from_rows(rows, metrics.FEATURE_NAMES, metrics.LABEL)


def prepare_stage(paths: ProjectPaths, cfg: RunConfig) -> dataprep.FeatureSelection:
    data = load_dataset(paths)
    train, test = dataprep.time_split(data, cfg.train_fraction)
    categories = {f: metrics.category_of(f) for f in metrics.FEATURE_NAMES}
    selection = dataprep.autospearman(train.X, train.feature_names, categories, cfg.rho, cfg.vif)
    write_json(paths.selection, selection.to_dict())
    write_json(paths.split, {"train": train.hashes, "test": test.hashes})

    kept = train.columns(selection.kept)
    bools = [i for i, f in enumerate(kept.feature_names) if f in metrics.BOOLEAN_FEATURES]
    res = dataprep.smote(kept.X, kept.y, k=cfg.smote_k, seed=cfg.smote_seed, boolean_columns=bools)
    with open(paths.train_balanced, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(kept.feature_names) + [metrics.LABEL, "synthetic"])
        for x, label, syn in zip(res.X, res.y, res.synthetic):
            w.writerow([repr(float(v)) for v in x] + [int(label), int(syn)])
    return selection


def _read_balanced(paths: ProjectPaths) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(paths.train_balanced, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    names = header[:-2]
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(len(rows) - 1, len(header))
    return names, body[:, : len(names)], body[:, len(names)].astype(int)


def model_filename(kind: str, combo: str) -> str:
    return f"{kind}_{combo}.json"


def train_stage(paths: ProjectPaths, cfg: RunConfig) -> list[learners.MatrixCell]:
    names, X, y = _read_balanced(paths)
    cells = learners.train_matrix(X, y, names, seed=cfg.seed, project=paths.name)
    paths.models.mkdir(parents=True, exist_ok=True)
    for old in paths.models.glob("*.json"):
        old.unlink()
    status = []
    for cell in cells:
        entry = {"kind": cell.kind.value, "combo": cell.combo.value, "error": cell.error}
        if cell.model is not None:
            (paths.models / model_filename(cell.kind.value, cell.combo.value)).write_text(cell.model.dumps() + "\n")
        status.append(entry)
    write_json(paths.train_status, status)
    return cells


def evaluate_stage(paths: ProjectPaths) -> list[dict]:
    data = load_dataset(paths)
    test_hashes = read_json(paths.split)["test"]
    pos = {h: i for i, h in enumerate(data.hashes)}
    test = data.take([pos[h] for h in test_hashes])
    status = read_json(paths.train_status)
    rows = []
    for entry in status:
        row = {"project": paths.name, "kind": entry["kind"], "combo": entry["combo"]}
        if entry["error"]:
            row.update(auc=None, mcc=None, tp=None, fp=None, tn=None, fn=None, status=entry["error"])
        else:
            model = learners.TrainedModel.loads(
                (paths.models / model_filename(entry["kind"], entry["combo"])).read_text()
            )
            proba = model.predict_proba_matrix(test.columns(model.feature_names).X)
            s = evaluation.score(proba, test.y)
            row.update(auc=s.auc, mcc=s.mcc, tp=s.tp, fp=s.fp, tn=s.tn, fn=s.fn, status="ok")
        rows.append(row)
    write_evaluation_csv(paths.evaluation, rows)
    return rows


def write_evaluation_csv(path: Path, rows: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVALUATION_COLUMNS)
        for r in rows:
            w.writerow([r["project"], r["kind"], r["combo"]] + [_num(r[k]) for k in EVALUATION_COLUMNS[3:9]] + [r["status"]])


def read_evaluation_csv(path: Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            row: dict = dict(rec)
            for k in ("auc", "mcc"):
                row[k] = float(rec[k]) if rec[k] else None
            for k in ("tp", "fp", "tn", "fn"):
                row[k] = int(rec[k]) if rec[k] else None
            out.append(row)
    return out


def rank_rows(rows: Sequence[Mapping], pool: str = "scores") -> dict:
    """NPSK groups of feature combinations and of learners for each metric.

    With ``pool="medians"`` each project contributes one median per treatment
    instead of all its model scores.
    """
    out: dict = {}
    for by, key in (("combo", "by_combo"), ("kind", "by_learner")):
        out[key] = {}
        for metric in METRICS:
            if pool == "medians":
                per_project: dict[tuple[str, str], list[float]] = {}
                for r in rows:
                    if r[metric] is not None:
                        per_project.setdefault((r[by], r["project"]), []).append(float(r[metric]))
                treatments: dict[str, list[float]] = {}
                for (t, _), vals in sorted(per_project.items()):
                    treatments.setdefault(t, []).append(float(np.median(vals)))
            else:
                treatments = evaluation.group_scores(rows, by, metric)
            out[key][metric] = evaluation.npsk_rank(treatments).to_dict() if treatments else []
    return out


def rank_stage(paths: ProjectPaths) -> dict:
    ranks = rank_rows(read_evaluation_csv(paths.evaluation))
    write_json(paths.ranks, ranks)
    return ranks


# -- reports ----------------------------------------------------------------------

def _combo_table(commits: Sequence[CommitRecord]) -> dict:
    counts = {c.value: 0 for c in COMBO_ORDER}
    for c in commits:
        counts[commit_file_combo(c).value] += 1
    total = len(commits)
    return {
        "total": total,
        "counts": counts,
        "percent": {k: (100.0 * v / total if total else 0.0) for k, v in counts.items()},
    }


def majority_tag(history: Sequence[CommitRecord]) -> str:
    """``more-visual`` only if strictly more commits contain visual than textual code."""
    vis = sum(1 for c in history if VISUAL in c.classes())
    txt = sum(1 for c in history if TEXTUAL in c.classes())
    return MORE_VISUAL if vis > txt else MORE_TEXTUAL


def file_type_report(histories: Mapping[str, tuple[Sequence[CommitRecord], Iterable[str]]]) -> dict:
    """Per-project and pooled distributions of commits over the 7 file-type combinations."""
    projects = {}
    pooled_all: list[CommitRecord] = []
    pooled_fix: list[CommitRecord] = []
    for name in sorted(histories):
        history, fixes = histories[name]
        fixes = set(fixes)
        fix_commits = [c for c in history if c.hash in fixes]
        projects[name] = {
            "all": _combo_table(history),
            "fix": _combo_table(fix_commits),
            "majority": majority_tag(history),
        }
        pooled_all += list(history)
        pooled_fix += fix_commits
    return {"projects": projects, "aggregate": {"all": _combo_table(pooled_all), "fix": _combo_table(pooled_fix)}}


def group_compare(reports: Sequence[Mapping], metric: str, alpha: float = evaluation.ALPHA) -> dict:
    """Rank-sum test of pooled model scores between more-visual and more-textual projects."""
    groups: dict[str, list[float]] = {MORE_VISUAL: [], MORE_TEXTUAL: []}
    for rep in reports:
        vals = [float(r[metric]) for r in rep.get("evaluation", []) if r.get(metric) is not None]
        groups[rep["majority"]].extend(vals)
    empty = [g for g, v in groups.items() if not v]
    if empty:
        raise EmptyGroup(f"no {metric} scores for group(s): {', '.join(empty)}")
    res = evaluation.wilcoxon_rank_sum(groups[MORE_VISUAL], groups[MORE_TEXTUAL])
    return {
        "metric": metric,
        "n": {g: len(v) for g, v in groups.items()},
        "median": {g: float(np.median(v)) for g, v in groups.items()},
        "u": res.u,
        "p_value": res.p_value,
        "method": res.method,
        "alpha": alpha,
        "reject": res.reject(alpha),
    }


def report_stage(paths: ProjectPaths, halted: str | None = None) -> dict:
    history = paths.load_commits()
    labels = paths.load_labels() if paths.labels.exists() else None
    fixes = labels.fix_commits if labels else set()
    table = file_type_report({paths.name: (history, fixes)})["projects"][paths.name]
    report: dict = {
        "project": paths.name,
        "eligibility": read_json(paths.eligibility),
        "halted_at": halted,
        "combo_distribution": {"all": table["all"], "fix": table["fix"]},
        "majority": table["majority"],
        "label_counts": {
            "commits": len(history),
            "fix": len(fixes),
            "inducing": len(labels.inducing_commits) if labels else 0,
        },
    }
    if paths.selection.exists() and halted is None:
        report["selection"] = read_json(paths.selection)
    if paths.evaluation.exists() and halted is None:
        report["evaluation"] = read_evaluation_csv(paths.evaluation)
        report["ranks"] = read_json(paths.ranks)
    write_json(paths.report, report)
    return report


# -- drivers --------------------------------------------------------------------

def run_project(repo: RepoSpec, name: str, cfg: RunConfig) -> dict:
    """All stages for one repository; raises StageError on failure."""
    paths = ProjectPaths(Path(cfg.out_dir), name)

    def stage(label: str, fn, *args):
        try:
            return fn(*args)
        except Exception as exc:  # recorded per project by the caller
            raise StageError(label, exc) from exc

    elig = stage("mine", mine_stage, repo, paths, cfg)
    if not elig.pre_label_ok:
        return stage("report", report_stage, paths, "eligibility")
    elig = stage("label", label_stage, repo, paths, cfg)
    if not elig.eligible:
        return stage("report", report_stage, paths, "eligibility")
    stage("features", features_stage, paths)
    stage("prepare", prepare_stage, paths, cfg)
    stage("train", train_stage, paths, cfg)
    stage("evaluate", evaluate_stage, paths)
    stage("rank", rank_stage, paths)
    return stage("report", report_stage, paths)


def _run_one(args: tuple[RepoSpec, str, RunConfig]) -> tuple[str, dict | None, dict | None]:
    repo, name, cfg = args
    try:
        return name, run_project(repo, name, cfg), None
    except StageError as exc:
        log.error("project %s failed at %s: %s", name, exc.stage, exc.error)
        return name, None, {
            "project": name,
            "stage": exc.stage,
            "error": type(exc.error).__name__,
            "message": str(exc.error),
        }


def summarize(out: Path, reports: Mapping[str, dict], errors: Sequence[dict], pool: str = "scores") -> dict:
    """Write the cross-project evaluation table, pooled ranks, summary and error log."""
    rows = [r for name in sorted(reports) for r in reports[name].get("evaluation", [])]
    write_evaluation_csv(out / "evaluation.csv", rows)
    write_json(out / "ranks.json", rank_rows(rows, pool) if rows else {})
    histories = {}
    for name in sorted(reports):
        p = ProjectPaths(out, name)
        fixes = p.load_labels().fix_commits if p.labels.exists() else set()
        histories[name] = (p.load_commits(), fixes)
    comparisons = {}
    evaluated = [reports[n] for n in sorted(reports) if "evaluation" in reports[n]]
    for metric in METRICS:
        try:
            comparisons[metric] = group_compare(evaluated, metric)
        except EmptyGroup as exc:
            comparisons[metric] = {"metric": metric, "error": "EmptyGroup", "message": str(exc)}
    summary = {
        "projects": {
            n: {"eligible": reports[n]["eligibility"]["eligible"], "halted_at": reports[n]["halted_at"],
                "majority": reports[n]["majority"]}
            for n in sorted(reports)
        },
        "failed": sorted(e["project"] for e in errors),
        "file_types": file_type_report(histories) if histories else {},
        "group_comparison": comparisons,
        "pool": pool,
    }
    write_json(out / "summary.json", summary)
    write_json(out / "errors.json", sorted(errors, key=lambda e: e["project"]))
    return summary


def run_pipeline(cfg: RunConfig) -> tuple[dict[str, dict], list[dict]]:
    """Run every configured repository; one failure does not stop the others."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(repo, name, cfg) for repo, name in zip(cfg.repos, cfg.project_names())]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    reports = {name: rep for name, rep, _ in results if rep is not None}
    errors = [err for _, _, err in results if err is not None]
    summarize(out, reports, errors, cfg.pool)
    return reports, errors


__all__ = [
    "EmptyGroup", "RepoSpec", "RunConfig", "ProjectPaths", "StageError",
    "mine_stage", "label_stage", "features_stage", "prepare_stage", "train_stage",
    "evaluate_stage", "rank_stage", "report_stage", "run_project", "run_pipeline",
    "file_type_report", "group_compare", "majority_tag", "rank_rows", "summarize",
]
