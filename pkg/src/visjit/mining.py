"""History mining: commit records with classified, graph-diffed file changes."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import PurePosixPath
from typing import IO, Iterable, Mapping, Sequence

from .graph import GraphDiff, MalformedPatch, VisualGraph, diff_graphs, parse_patch
from .vcs import EmptyHistory, GitRepository

log = logging.getLogger(__name__)

TEXTUAL = "textual_code"
VISUAL = "visual_code"
NON_CODE = "non_code"

VISUAL_EXTENSIONS = (".maxpat", ".maxhelp")

# C, C++, C#, Java, JavaScript, Lua, Objective-C, PHP, Python, Ruby, Swift, TypeScript
DEFAULT_TEXTUAL_EXTENSIONS = (
    ".c", ".h",
    ".cpp", ".cc", ".cxx", ".c++", ".hpp", ".hh", ".hxx",
    ".cs",
    ".java",
    ".js", ".jsx", ".mjs",
    ".lua",
    ".m", ".mm",
    ".php",
    ".py",
    ".rb",
    ".swift",
    ".ts", ".tsx",
)

_KIND = {"A": "added", "M": "modified", "T": "modified", "D": "deleted", "R": "renamed", "C": "added"}


class FileTypeCombo(str, Enum):
    ONLY_NON_CODE = "only-non-code"
    ONLY_TEXTUAL = "only-textual"
    ONLY_VISUAL = "only-visual"
    TEXTUAL_NON_CODE = "textual+non-code"
    VISUAL_NON_CODE = "visual+non-code"
    TEXTUAL_VISUAL = "textual+visual"
    TEXTUAL_VISUAL_NON_CODE = "textual+visual+non-code"


COMBO_ORDER = tuple(FileTypeCombo)


@dataclass
class FileChange:
    path: str
    change_kind: str
    file_class: str
    size_after: int = 0
    lines_added: int = 0
    lines_deleted: int = 0
    lines_before: int = 0
    old_path: str | None = None
    graph_diff: GraphDiff | None = None
    parse_error: str | None = None

    @property
    def is_code(self) -> bool:
        return self.file_class in (TEXTUAL, VISUAL)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["graph_diff"] = self.graph_diff.to_dict() if self.graph_diff is not None else None
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> FileChange:
        d = dict(d)
        if d.get("graph_diff") is not None:
            d["graph_diff"] = GraphDiff.from_dict(d["graph_diff"])
        return cls(**d)


@dataclass
class CommitRecord:
    hash: str
    parent_hashes: list[str]
    author_id: str
    timestamp: int
    message: str
    changes: list[FileChange] = field(default_factory=list)

    def classes(self) -> set[str]:
        return {c.file_class for c in self.changes}

    def to_dict(self) -> dict:
        return {
            "hash": self.hash,
            "parent_hashes": list(self.parent_hashes),
            "author_id": self.author_id,
            "timestamp": self.timestamp,
            "message": self.message,
            "changes": [c.to_dict() for c in self.changes],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> CommitRecord:
        return cls(
            hash=d["hash"],
            parent_hashes=list(d["parent_hashes"]),
            author_id=d["author_id"],
            timestamp=int(d["timestamp"]),
            message=d["message"],
            changes=[FileChange.from_dict(c) for c in d["changes"]],
        )


def normalize_author(name: str, email: str) -> str:
    email = (email or "").strip().lower()
    return email if email else (name or "").strip()


def classify_file(
    path: str,
    probe: bytes | None,
    textual_extensions: Sequence[str] = DEFAULT_TEXTUAL_EXTENSIONS,
) -> str:
    """``visual_code``, ``textual_code`` or ``non_code`` for one path.

    ``probe`` is the file content (or a prefix of it); None means it could
    not be read and the extension alone decides.
    """
    ext = PurePosixPath(path).suffix.lower()
    if ext in VISUAL_EXTENSIONS:
        if probe is None or b'"patcher"' in probe:
            return VISUAL
        return NON_CODE
    if ext in {e.lower() for e in textual_extensions}:
        return TEXTUAL
    return NON_CODE


def commit_file_combo(commit: CommitRecord) -> FileTypeCombo:
    classes = commit.classes()
    t, v, n = TEXTUAL in classes, VISUAL in classes, NON_CODE in classes
    if t and v:
        return FileTypeCombo.TEXTUAL_VISUAL_NON_CODE if n else FileTypeCombo.TEXTUAL_VISUAL
    if t:
        return FileTypeCombo.TEXTUAL_NON_CODE if n else FileTypeCombo.ONLY_TEXTUAL
    if v:
        return FileTypeCombo.VISUAL_NON_CODE if n else FileTypeCombo.ONLY_VISUAL
    return FileTypeCombo.ONLY_NON_CODE


def count_lines(data: bytes | None) -> int:
    if not data or b"\x00" in data[:8000]:
        return 0
    return data.count(b"\n") + (0 if data.endswith(b"\n") else 1)


def _try_parse(data: bytes | None) -> tuple[VisualGraph | None, str | None]:
    if data is None:
        return VisualGraph(), None
    try:
        return parse_patch(data), None
    except MalformedPatch as exc:
        return None, str(exc)


def _build_change(
    repo: GitRepository,
    commit: str,
    parent: str | None,
    raw,
    textual_extensions: Sequence[str],
    count_position_changes: bool,
) -> FileChange:
    kind = _KIND.get(raw.status, "modified")
    old_path = raw.old_path if kind == "renamed" else None
    before_path = old_path or raw.path
    after = None if kind == "deleted" else repo.read(commit, raw.path)
    before = None
    if parent is not None and kind != "added":
        before = repo.read(parent, before_path)

    probe = after if kind != "deleted" else before
    file_class = classify_file(raw.path, probe, textual_extensions)
    change = FileChange(
        path=raw.path,
        change_kind=kind,
        file_class=file_class,
        size_after=len(after) if after is not None else 0,
        old_path=old_path,
    )
    if file_class == TEXTUAL:
        change.lines_added = raw.added or 0
        change.lines_deleted = raw.deleted or 0
        change.lines_before = count_lines(before) if raw.added is not None else 0
    elif file_class == VISUAL:
        old_g, old_err = _try_parse(before)
        new_g, new_err = _try_parse(after)
        if old_g is None and new_g is None:
            change.parse_error = "both"
        else:
            if old_err:
                change.parse_error = "old"
            elif new_err:
                change.parse_error = "new"
            change.graph_diff = diff_graphs(
                old_g or VisualGraph(), new_g or VisualGraph(), count_position_changes
            )
    return change


def walk_history(
    repo_path: str | os.PathLike | GitRepository,
    branch: str = "main",
    textual_extensions: Sequence[str] = DEFAULT_TEXTUAL_EXTENSIONS,
    count_position_changes: bool = False,
) -> list[CommitRecord]:
    """First-parent history of ``branch``, oldest first, with classified changes."""
    if not isinstance(repo_path, GitRepository):
        with GitRepository(repo_path) as repo:
            return walk_history(repo, branch, textual_extensions, count_position_changes)
    repo = repo_path
    hashes = repo.first_parent_history(branch)
    records = []
    for meta in repo.commit_meta(hashes):
        parent = meta.parents[0] if meta.parents else None
        changes = [
            _build_change(repo, meta.hash, parent, raw, textual_extensions, count_position_changes)
            for raw in repo.changes(meta.hash, parent)
        ]
        changes.sort(key=lambda c: c.path)
        records.append(
            CommitRecord(
                hash=meta.hash,
                parent_hashes=list(meta.parents),
                author_id=normalize_author(meta.author_name, meta.author_email),
                timestamp=meta.timestamp,
                message=meta.message,
                changes=changes,
            )
        )
    if not records:
        raise EmptyHistory(str(repo_path))
    log.info("mined %d commits from %s@%s", len(records), repo.path, branch)
    return records


def split_order(commits: Iterable[CommitRecord]) -> list[CommitRecord]:
    """Commits ordered by (timestamp, hash), the order used for time splits."""
    return sorted(commits, key=lambda c: (c.timestamp, c.hash))


@dataclass
class EligibilityReport:
    num_commits: int
    enough_commits: bool
    has_visual_commit: bool
    has_textual_commit: bool
    has_fix_commit: bool | None = None
    has_visual_inducing: bool | None = None
    has_textual_inducing: bool | None = None

    @property
    def eligible(self) -> bool:
        flags = [self.enough_commits, self.has_visual_commit, self.has_textual_commit]
        flags += [f for f in (self.has_fix_commit, self.has_visual_inducing, self.has_textual_inducing)]
        return all(bool(f) for f in flags if f is not None)

    @property
    def pre_label_ok(self) -> bool:
        return self.enough_commits and self.has_visual_commit and self.has_textual_commit

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eligible"] = self.eligible
        return d


def check_eligibility(history: Sequence[CommitRecord], labels=None, min_commits: int = 200) -> EligibilityReport:
    """Project eligibility; label-based criteria stay None until ``labels`` is given."""
    report = EligibilityReport(
        num_commits=len(history),
        enough_commits=len(history) >= min_commits,
        has_visual_commit=any(VISUAL in c.classes() for c in history),
        has_textual_commit=any(TEXTUAL in c.classes() for c in history),
    )
    if labels is not None:
        methods = labels.methods_by_inducing()
        report.has_fix_commit = bool(labels.fix_commits)
        report.has_visual_inducing = any("visual" in m for m in methods.values())
        report.has_textual_inducing = any("textual" in m for m in methods.values())
    return report


def dump_commits(history: Iterable[CommitRecord], fh: IO[str]) -> None:
    for c in history:
        fh.write(json.dumps(c.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def load_commits(fh: IO[str]) -> list[CommitRecord]:
    return [CommitRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
