"""Defect-fixing commit detection and SZZ tracing for lines and nodes."""
from __future__ import annotations

import csv
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import PurePosixPath
from typing import IO, Iterable, Mapping, Sequence

from .mining import TEXTUAL, VISUAL, CommitRecord
from .vcs import GitRepository, VCSError

log = logging.getLogger(__name__)

DEFAULT_KEYWORDS = ("fix", "bug", "defect", "error", "fail", "patch", "wrong")
DEFAULT_ISSUE_PATTERN = r"\b[A-Z][A-Z0-9]+-\d+\b"

FULL_CHAIN = "full-chain"
MOST_RECENT = "most-recent"

_COMMENT_PREFIXES = {
    ".py": ("#",),
    ".rb": ("#",),
    ".lua": ("--",),
    ".php": ("//", "#"),
}
_C_LIKE = ("//",)


class UnknownStrategy(ValueError):
    pass


@dataclass(frozen=True)
class Issue:
    key: str
    is_defect: bool
    fix_commit: str | None = None


def load_issues(fh: IO[str]) -> dict[str, Issue]:
    """Read ``issues.csv`` with columns issue_key, is_defect, fix_commit_hash."""
    issues = {}
    for row in csv.DictReader(fh):
        flag = str(row.get("is_defect", "")).strip().lower() in {"1", "true", "yes", "y"}
        fix = (row.get("fix_commit_hash") or "").strip() or None
        issues[row["issue_key"].strip()] = Issue(row["issue_key"].strip(), flag, fix)
    return issues


def identify_fix_commits(
    history: Sequence[CommitRecord],
    strategy: str = "keywords",
    keywords: Sequence[str] = DEFAULT_KEYWORDS,
    issues: Mapping[str, Issue] | None = None,
    issue_pattern: str = DEFAULT_ISSUE_PATTERN,
) -> set[str]:
    if strategy == "keywords":
        words = "|".join(re.escape(k.lower()) for k in keywords)
        rx = re.compile(rf"\b(?:{words})\b")
        return {c.hash for c in history if rx.search(c.message.lower())}
    if strategy == "issue-links":
        issues = issues or {}
        rx = re.compile(issue_pattern)
        linked = {i.fix_commit for i in issues.values() if i.is_defect and i.fix_commit}
        fixes = set()
        for c in history:
            keys = rx.findall(c.message)
            if c.hash in linked or any(k in issues and issues[k].is_defect for k in keys):
                fixes.add(c.hash)
        return fixes
    raise UnknownStrategy(strategy)


def is_noise_line(path: str, line: str) -> bool:
    """Blank or line-comment-only lines are ignored when blaming."""
    text = line.strip()
    if not text:
        return True
    prefixes = _COMMENT_PREFIXES.get(PurePosixPath(path).suffix.lower(), _C_LIKE)
    return text.startswith(prefixes)


class _Index:
    def __init__(self, history: Sequence[CommitRecord]):
        self.history = history
        self.pos = {c.hash: i for i, c in enumerate(history)}

    def before(self, fix: CommitRecord, candidate: str) -> bool:
        i = self.pos.get(candidate)
        return i is not None and candidate != fix.hash and self.history[i].timestamp < fix.timestamp


def trace_textual(
    fix: CommitRecord, history: Sequence[CommitRecord], repo: GitRepository
) -> dict[str, list[str]]:
    """Inducing commit -> evidence (``path:line`` on the parent side)."""
    if not fix.parent_hashes:
        return {}
    parent = fix.parent_hashes[0]
    index = _Index(history)
    found: dict[str, list[str]] = defaultdict(list)
    for change in fix.changes:
        if change.file_class != TEXTUAL or change.change_kind == "added":
            continue
        old_path = change.old_path or change.path
        content = repo.read(parent, old_path)
        if content is None or b"\x00" in content[:8000]:
            continue
        old_lines = content.decode("utf-8", errors="replace").splitlines()
        if change.change_kind == "deleted":
            targets = list(range(1, len(old_lines) + 1))
        else:
            targets = repo.deleted_lines(fix.hash, parent, change.path, change.old_path)
        targets = [n for n in targets if n <= len(old_lines) and not is_noise_line(old_path, old_lines[n - 1])]
        if not targets:
            continue
        try:
            owners = repo.blame(old_path, parent)
        except VCSError as exc:
            log.warning("blame failed for %s@%s: %s", old_path, parent, exc)
            continue
        for n in targets:
            if n <= len(owners) and index.before(fix, owners[n - 1]):
                found[owners[n - 1]].append(f"{old_path}:{n}")
    return dict(found)


def szz_textual(fix: CommitRecord, history: Sequence[CommitRecord], repo: GitRepository) -> set[str]:
    return set(trace_textual(fix, history, repo))


def trace_visual(
    fix: CommitRecord,
    history: Sequence[CommitRecord],
    strategy: str = FULL_CHAIN,
    skipped: list[str] | None = None,
) -> dict[str, list[str]]:
    """Inducing commit -> evidence (``path#node``) for deleted/modified nodes.

    ``full-chain`` collects every earlier commit that added or modified the
    node back to the one that introduced it; ``most-recent`` keeps only the
    latest such commit.
    """
    if strategy not in (FULL_CHAIN, MOST_RECENT):
        raise UnknownStrategy(strategy)
    index = _Index(history)
    start = index.pos.get(fix.hash, len(history))
    found: dict[str, list[str]] = defaultdict(list)
    for change in fix.changes:
        if change.file_class != VISUAL:
            continue
        if change.graph_diff is None or change.parse_error in ("old", "both"):
            if change.change_kind != "added" and skipped is not None:
                skipped.append(f"{fix.hash}:{change.path}")
            continue
        pending = set(change.graph_diff.deleted | change.graph_diff.modified)
        path = change.old_path or change.path
        for commit in reversed(history[:start]):
            if not pending:
                break
            touched = next((c for c in commit.changes if c.path == path and c.file_class == VISUAL), None)
            if touched is None:
                continue
            diff = touched.graph_diff
            if diff is not None:
                for node in sorted(pending & (diff.added | diff.modified)):
                    if index.before(fix, commit.hash):
                        found[commit.hash].append(f"{change.path}#{node}")
                    if strategy == MOST_RECENT or node in diff.added:
                        pending.discard(node)
            if touched.change_kind == "added":
                break
            if touched.change_kind == "renamed" and touched.old_path:
                path = touched.old_path
    return dict(found)


def szz_vc(fix: CommitRecord, history: Sequence[CommitRecord], strategy: str = FULL_CHAIN) -> set[str]:
    return set(trace_visual(fix, history, strategy))


@dataclass
class LabelSet:
    fix_commits: set[str] = field(default_factory=set)
    inducing_commits: set[str] = field(default_factory=set)
    # inducing commit -> [{"fix": hash, "method": textual|visual, "evidence": ...}]
    provenance: dict[str, list[dict]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def methods_by_inducing(self) -> dict[str, set[str]]:
        return {h: {p["method"] for p in entries} for h, entries in self.provenance.items()}

    def rows(self, history: Iterable[CommitRecord]) -> list[dict]:
        return [
            {
                "hash": c.hash,
                "is_fix": c.hash in self.fix_commits,
                "is_defect_inducing": c.hash in self.inducing_commits,
                "provenance": self.provenance.get(c.hash, []),
            }
            for c in history
        ]


def label_commits(
    history: Sequence[CommitRecord],
    fixes: Iterable[str],
    repo: GitRepository,
    vc_strategy: str = FULL_CHAIN,
) -> LabelSet:
    fixes = set(fixes)
    labels = LabelSet(fix_commits=fixes)
    prov: dict[str, list[dict]] = defaultdict(list)
    for fix in history:
        if fix.hash not in fixes:
            continue
        for method, traced in (
            ("textual", trace_textual(fix, history, repo)),
            ("visual", trace_visual(fix, history, vc_strategy, labels.skipped)),
        ):
            for inducing, evidence in traced.items():
                prov[inducing].append({"fix": fix.hash, "method": method, "evidence": sorted(evidence)})
    order = {c.hash: i for i, c in enumerate(history)}
    labels.provenance = {
        h: sorted(entries, key=lambda e: (order.get(e["fix"], -1), e["method"]))
        for h, entries in prov.items()
    }
    labels.inducing_commits = set(labels.provenance)
    return labels


def dump_labels(labels: LabelSet, history: Iterable[CommitRecord], fh: IO[str]) -> None:
    for row in labels.rows(history):
        fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_labels(fh: IO[str]) -> LabelSet:
    labels = LabelSet()
    for line in fh:
        if not line.strip():
            continue
        row = json.loads(line)
        if row["is_fix"]:
            labels.fix_commits.add(row["hash"])
        if row["is_defect_inducing"]:
            labels.inducing_commits.add(row["hash"])
            labels.provenance[row["hash"]] = row["provenance"]
    return labels
