"""Commit-level process, textual and visual features."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import PurePosixPath
from typing import IO, Iterable, Mapping, Sequence

from .mining import TEXTUAL, VISUAL, CommitRecord

PROCESS_FEATURES = (
    "total_modified_file_size",
    "avg_modified_file_size",
    "num_unique_dirs",
    "avg_dir_depth",
    "num_files_modified",
    "avg_age_days",
    "avg_revisions_per_file",
    "num_developers",
    "num_unique_changes",
    "developer_experience",
    "is_fix",
)
TEXTUAL_FEATURES = ("lines_added", "lines_deleted", "loc_before", "code_entropy")
VISUAL_FEATURES = ("nodes_added", "nodes_modified", "nodes_deleted", "nodes_before", "node_entropy")
FEATURE_NAMES = PROCESS_FEATURES + TEXTUAL_FEATURES + VISUAL_FEATURES
LABEL = "is_defect_inducing"
CSV_COLUMNS = ("hash",) + FEATURE_NAMES + (LABEL,)
CATEGORIES = {
    "process": PROCESS_FEATURES,
    "textual": TEXTUAL_FEATURES,
    "visual": VISUAL_FEATURES,
}
BOOLEAN_FEATURES = ("is_fix",)
_INT_FEATURES = {
    "total_modified_file_size", "num_unique_dirs", "num_files_modified", "num_developers",
    "num_unique_changes", "developer_experience", "lines_added", "lines_deleted", "loc_before",
    "nodes_added", "nodes_modified", "nodes_deleted", "nodes_before",
}

SECONDS_PER_DAY = 86400.0


class AllZeroWeights(ValueError):
    pass


def category_of(feature: str) -> str:
    for cat, names in CATEGORIES.items():
        if feature in names:
            return cat
    raise KeyError(feature)


def shannon_entropy_normalized(weights: Sequence[float]) -> float:
    """Shannon entropy of the change distribution, scaled to [0, 1].

    Normalized by log2 of the number of entries with positive weight, so a
    single changed file scores 0 and an even spread scores 1.
    """
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    positive = [float(w) for w in weights if w > 0]
    if not positive:
        raise AllZeroWeights("at least one weight must be positive")
    n = len(positive)
    if n == 1:
        return 0.0
    total = math.fsum(positive)
    probs = [w / total for w in positive]
    # a positive weight can still underflow to p == 0 against a huge total
    h = -math.fsum(p * math.log2(p) for p in probs if p > 0)
    return min(1.0, max(0.0, h / math.log2(n)))


def _entropy_or_zero(weights: Sequence[float]) -> float:
    try:
        return shannon_entropy_normalized(weights)
    except AllZeroWeights:
        return 0.0


@dataclass
class _FileEvent:
    hash: str
    timestamp: int
    author: str


class HistoryIndex:
    """Per-file change log of code files, fed commit by commit in history order."""

    def __init__(self) -> None:
        self.files: dict[str, list[_FileEvent]] = defaultdict(list)
        self.author_commits: dict[str, int] = defaultdict(int)

    def add(self, commit: CommitRecord) -> None:
        for ch in commit.changes:
            if not ch.is_code:
                continue
            if ch.change_kind == "renamed" and ch.old_path and ch.old_path in self.files:
                self.files[ch.path] = self.files.pop(ch.old_path) + self.files.get(ch.path, [])
            self.files[ch.path].append(_FileEvent(commit.hash, commit.timestamp, commit.author_id))
        self.author_commits[commit.author_id] += 1

    def prior(self, change) -> list[_FileEvent]:
        key = change.old_path if change.change_kind == "renamed" and change.old_path in self.files else change.path
        return self.files.get(key, [])


def _dir_of(path: str) -> str:
    parent = str(PurePosixPath(path).parent)
    return "" if parent == "." else parent


def process_metrics(commit: CommitRecord, index: HistoryIndex, is_fix: bool = False) -> dict[str, float]:
    code = [c for c in commit.changes if c.is_code]
    n = len(code)
    sizes = [0 if c.change_kind == "deleted" else c.size_after for c in code]
    ages, revisions = [], []
    authors: set[str] = set()
    prior_commits: set[str] = set()
    for c in code:
        events = index.prior(c)
        revisions.append(len(events))
        if events:
            ages.append(max(0.0, (commit.timestamp - events[-1].timestamp) / SECONDS_PER_DAY))
        authors.update(e.author for e in events)
        prior_commits.update(e.hash for e in events)
    return {
        "total_modified_file_size": sum(sizes),
        "avg_modified_file_size": sum(sizes) / n if n else 0.0,
        "num_unique_dirs": len({_dir_of(c.path) for c in code}),
        "avg_dir_depth": sum(c.path.count("/") for c in code) / n if n else 0.0,
        "num_files_modified": n,
        "avg_age_days": sum(ages) / len(ages) if ages else 0.0,
        "avg_revisions_per_file": sum(revisions) / n if n else 0.0,
        "num_developers": len(authors),
        "num_unique_changes": len(prior_commits),
        "developer_experience": index.author_commits.get(commit.author_id, 0),
        "is_fix": int(bool(is_fix)),
    }


def textual_metrics(commit: CommitRecord) -> dict[str, float]:
    files = [c for c in commit.changes if c.file_class == TEXTUAL]
    return {
        "lines_added": sum(c.lines_added for c in files),
        "lines_deleted": sum(c.lines_deleted for c in files),
        "loc_before": sum(c.lines_before for c in files),
        "code_entropy": _entropy_or_zero([c.lines_added + c.lines_deleted for c in files]),
    }


def visual_metrics(commit: CommitRecord) -> dict[str, float]:
    diffs = [c.graph_diff for c in commit.changes if c.file_class == VISUAL and c.graph_diff is not None]
    return {
        "nodes_added": sum(len(d.added) for d in diffs),
        "nodes_modified": sum(len(d.modified) for d in diffs),
        "nodes_deleted": sum(len(d.deleted) for d in diffs),
        "nodes_before": sum(d.nodes_before for d in diffs),
        "node_entropy": _entropy_or_zero([d.changed for d in diffs]),
    }


@dataclass
class FeatureVector:
    commit_hash: str
    process: dict[str, float]
    textual: dict[str, float]
    visual: dict[str, float]
    is_defect_inducing: bool

    def values(self) -> dict[str, float]:
        return {**self.process, **self.textual, **self.visual}

    def row(self) -> dict:
        return {"hash": self.commit_hash, **self.values(), LABEL: int(self.is_defect_inducing)}


def extract_features(
    history: Sequence[CommitRecord],
    fix_commits: Iterable[str] = (),
    inducing_commits: Iterable[str] = (),
) -> list[FeatureVector]:
    """Feature vectors for every commit, in history order."""
    fixes, inducing = set(fix_commits), set(inducing_commits)
    index = HistoryIndex()
    out = []
    for commit in history:
        out.append(
            FeatureVector(
                commit.hash,
                process_metrics(commit, index, commit.hash in fixes),
                textual_metrics(commit),
                visual_metrics(commit),
                commit.hash in inducing,
            )
        )
        index.add(commit)
    return out


def _fmt(name: str, value) -> str:
    if name in _INT_FEATURES or name in BOOLEAN_FEATURES or name == LABEL:
        return str(int(value))
    return repr(float(value))


def write_features_csv(vectors: Iterable[FeatureVector], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for v in vectors:
        row = v.row()
        writer.writerow([row["hash"]] + [_fmt(k, row[k]) for k in CSV_COLUMNS[1:]])


def read_features_csv(fh: IO[str]) -> list[dict]:
    """Rows as dicts: ``hash`` str, features float, label int."""
    rows = []
    for rec in csv.DictReader(fh):
        row: dict = {"hash": rec["hash"], LABEL: int(rec[LABEL])}
        row.update({k: float(rec[k]) for k in FEATURE_NAMES})
        rows.append(row)
    return rows


def feature_groups(vector: Mapping[str, float]) -> dict[str, dict[str, float]]:
    return {cat: {k: vector[k] for k in names} for cat, names in CATEGORIES.items()}
