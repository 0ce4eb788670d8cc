"""Read-only access to a local Git repository through the ``git`` CLI.

Everything the miner and the SZZ tracers need from version control goes
through :class:`GitRepository`, so another VCS can be slotted in by
providing the same methods.
"""
from __future__ import annotations

import os
import re
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path

_HUNK = re.compile(rb"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_SHA = re.compile(r"^[0-9a-f]{40}$")


class VCSError(RuntimeError):
    pass


class RepoNotFound(VCSError):
    pass


class BranchNotFound(VCSError):
    pass


class EmptyHistory(VCSError):
    pass


class PathNotFound(VCSError):
    pass


class LineOutOfRange(VCSError):
    pass


@dataclass(frozen=True)
class CommitMeta:
    hash: str
    parents: tuple[str, ...]
    author_name: str
    author_email: str
    timestamp: int
    message: str


@dataclass(frozen=True)
class RawChange:
    status: str  # A, M, D, R, T, C
    path: str
    old_path: str | None
    added: int | None  # None for binary files
    deleted: int | None


class GitRepository:
    """Thin adapter over a local Git repository."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        if not self.path.exists():
            raise RepoNotFound(f"no such repository: {self.path}")
        try:
            self._git("rev-parse", "--git-dir")
        except VCSError as exc:
            raise RepoNotFound(f"not a git repository: {self.path}") from exc
        self._batch: subprocess.Popen | None = None
        self._lock = threading.Lock()

    # -- plumbing ---------------------------------------------------------
    def _git(self, *args: str, input: bytes | None = None) -> bytes:
        proc = subprocess.run(
            ["git", "-c", "core.quotepath=off", *args],
            cwd=self.path,
            input=input,
            capture_output=True,
        )
        if proc.returncode != 0:
            raise VCSError(f"git {' '.join(args)} failed: {proc.stderr.decode(errors='replace').strip()}")
        return proc.stdout

    def close(self) -> None:
        if self._batch is not None:
            self._batch.stdin.close()
            self._batch.wait()
            self._batch = None

    def __enter__(self) -> GitRepository:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    # -- history ----------------------------------------------------------
    def first_parent_history(self, branch: str) -> list[str]:
        """Commit ids of ``branch`` along first parents, oldest first."""
        try:
            self._git("rev-parse", "--verify", "--quiet", f"{branch}^{{commit}}")
        except VCSError as exc:
            raise BranchNotFound(f"branch not found: {branch}") from exc
        out = self._git("rev-list", "--first-parent", "--reverse", branch).decode().split()
        if not out:
            raise EmptyHistory(f"branch {branch} has no commits")
        return out

    def commit_meta(self, hashes: list[str]) -> list[CommitMeta]:
        fmt = "%H%x00%P%x00%an%x00%ae%x00%at%x00%B%x1e"
        out = self._git(
            "log", "--no-walk=unsorted", "--stdin", f"--format={fmt}",
            input=("\n".join(hashes) + "\n").encode(),
        )
        metas = {}
        for rec in out.decode("utf-8", errors="replace").split("\x1e"):
            rec = rec.lstrip("\n")
            if not rec:
                continue
            h, parents, name, email, ts, body = rec.split("\x00", 5)
            metas[h] = CommitMeta(h, tuple(parents.split()), name, email, int(ts), body.rstrip("\n"))
        return [metas[h] for h in hashes]

    def changes(self, commit: str, parent: str | None) -> list[RawChange]:
        """Files changed by ``commit`` relative to ``parent`` (root diff if None)."""
        base = [parent, commit] if parent else ["--root", commit]
        status = self._git("diff-tree", "-r", "-z", "-M", "--no-commit-id", "--name-status", *base)
        numstat = self._git("diff-tree", "-r", "-z", "-M", "--no-commit-id", "--numstat", *base)

        entries = []
        toks = status.decode("utf-8", errors="surrogateescape").split("\x00")
        i = 0
        while i < len(toks) and toks[i]:
            code = toks[i]
            if code[0] in "RC":
                entries.append((code[0], toks[i + 2], toks[i + 1]))
                i += 3
            else:
                entries.append((code[0], toks[i + 1], None))
                i += 2

        counts: dict[str, tuple[int | None, int | None]] = {}
        toks = numstat.decode("utf-8", errors="surrogateescape").split("\x00")
        i = 0
        while i < len(toks) and toks[i]:
            added, deleted, path = toks[i].split("\t", 2)
            if path == "":
                path = toks[i + 2]
                i += 3
            else:
                i += 1
            counts[path] = (
                None if added == "-" else int(added),
                None if deleted == "-" else int(deleted),
            )
        return [
            RawChange(code, path, old, *counts.get(path, (0, 0)))
            for code, path, old in entries
        ]

    def deleted_lines(self, commit: str, parent: str, path: str, old_path: str | None = None) -> list[int]:
        """1-based parent-side line numbers removed or rewritten by ``commit``."""
        old_path = old_path or path
        out = self._git(
            "diff", "-U0", "--no-color", "--no-ext-diff", "-M", parent, commit, "--", old_path, path
        )
        lines: list[int] = []
        for raw in out.splitlines():
            m = _HUNK.match(raw)
            if m:
                start = int(m.group(1))
                count = 1 if m.group(2) is None else int(m.group(2))
                lines.extend(range(start, start + count))
        return lines

    # -- content ----------------------------------------------------------
    def read(self, rev: str, path: str) -> bytes | None:
        """File content at ``rev``, or None if it does not exist there."""
        with self._lock:
            if self._batch is None:
                self._batch = subprocess.Popen(
                    ["git", "cat-file", "--batch"],
                    cwd=self.path,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
            self._batch.stdin.write(f"{rev}:{path}\n".encode("utf-8", errors="surrogateescape"))
            self._batch.stdin.flush()
            header = self._batch.stdout.readline().split()
            if len(header) != 3:
                return None
            size = int(header[2])
            data = self._batch.stdout.read(size)
            self._batch.stdout.read(1)
            return data if header[1] == b"blob" else None

    def blame(self, path: str, at: str) -> list[str]:
        """Commit id that last touched each line of ``path`` as of ``at``."""
        try:
            out = self._git("blame", "--porcelain", "--first-parent", at, "--", path)
        except VCSError as exc:
            raise PathNotFound(f"{path} not found at {at}") from exc
        owners: dict[int, str] = {}
        for raw in out.decode("utf-8", errors="replace").splitlines():
            if raw.startswith("\t"):
                continue
            parts = raw.split(" ")
            if len(parts) >= 3 and _SHA.match(parts[0]):
                owners[int(parts[2])] = parts[0]
        return [owners[i] for i in range(1, len(owners) + 1)]

    def blame_line(self, path: str, line_no: int, at: str) -> str:
        owners = self.blame(path, at)
        if not 1 <= line_no <= len(owners):
            raise LineOutOfRange(f"{path}:{line_no} outside 1..{len(owners)} at {at}")
        return owners[line_no - 1]
