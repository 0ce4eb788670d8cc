from __future__ import annotations

import pytest

from visjit.fixtures import RepoBuilder


@pytest.fixture
def builder() -> RepoBuilder:
    return RepoBuilder()


@pytest.fixture
def write_repo(tmp_path):
    """Materialize a RepoBuilder under tmp_path; returns (path, commit ids)."""
    counter = {"n": 0}

    def _write(b: RepoBuilder):
        counter["n"] += 1
        dest = tmp_path / f"repo{counter['n']}"
        return str(dest), b.write(dest)

    return _write


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import lines

    out = lines()
    if out:
        terminalreporter.section("acceptance criteria")
        for line in out:
            terminalreporter.write_line(line)
