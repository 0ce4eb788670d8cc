"""Deterministic synthetic repositories with planted defects.

Histories are written with ``git fast-import`` using fixed identities and
timestamps, so the same seed always reproduces the same commit ids. The
generator records which commits it planted as defect-inducing, which gives
an independent ground truth for the labeling code.
"""
from __future__ import annotations

import json
import os
import random
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

AUTHORS = (
    ("Ada Byron", "ada@example.org"),
    ("Ben Okafor", "ben@example.org"),
    ("Chloe Martin", "chloe@example.org"),
    ("Dev Patel", "dev@example.org"),
)
BASE_TIME = 1_600_000_000
STEP = 3600

_NOISE_MESSAGES = (
    "update documentation",
    "add helper module",
    "tidy layout of the synth",
    "tune parameters",
    "refactor naming",
    "extend presets",
    "improve readme",
    "add new sequencer voice",
)


@dataclass
class _Commit:
    message: str
    author: tuple[str, str]
    timestamp: int
    writes: dict[str, bytes | None]
    branch: str = "main"
    parent: int | None = None
    merge: int | None = None


class RepoBuilder:
    """Accumulate commits in memory and materialize them as a Git repository."""

    def __init__(self, start: int = BASE_TIME, step: int = STEP):
        self.commits: list[_Commit] = []
        self.start, self.step = start, step
        self._heads: dict[str, int] = {}

    def commit(
        self,
        message: str,
        writes: dict[str, bytes | str | None],
        author: tuple[str, str] = AUTHORS[0],
        timestamp: int | None = None,
        branch: str = "main",
        merge: int | None = None,
    ) -> int:
        ts = self.start + self.step * len(self.commits) if timestamp is None else timestamp
        data = {p: (v.encode() if isinstance(v, str) else v) for p, v in writes.items()}
        self.commits.append(_Commit(message, author, ts, data, branch, self._heads.get(branch), merge))
        idx = len(self.commits) - 1
        self._heads[branch] = idx
        return idx

    def branch_from(self, name: str, source: str = "main") -> None:
        self._heads[name] = self._heads[source]

    def stream(self) -> bytes:
        out = bytearray()
        for i, c in enumerate(self.commits):
            msg = c.message.encode()
            ident = f"{c.author[0]} <{c.author[1]}> {c.timestamp} +0000".encode()
            out += b"commit refs/heads/" + c.branch.encode() + b"\n"
            out += b"mark :%d\n" % (i + 1)
            out += b"author " + ident + b"\ncommitter " + ident + b"\n"
            out += b"data %d\n" % len(msg) + msg + b"\n"
            if c.parent is not None:
                out += b"from :%d\n" % (c.parent + 1)
            if c.merge is not None:
                out += b"merge :%d\n" % (c.merge + 1)
            for path, content in sorted(c.writes.items()):
                if content is None:
                    out += b"D " + path.encode() + b"\n"
                else:
                    out += b"M 100644 inline " + path.encode() + b"\n"
                    out += b"data %d\n" % len(content) + content + b"\n"
            out += b"\n"
        return bytes(out)

    def write(self, dest: str | os.PathLike) -> list[str]:
        """Create the repository at ``dest``; returns commit ids by creation index."""
        dest = Path(dest).resolve()
        dest.mkdir(parents=True, exist_ok=True)
        env = {**os.environ, "GIT_CONFIG_NOSYSTEM": "1", "HOME": str(dest)}
        subprocess.run(["git", "init", "-q", "-b", "main", str(dest)], check=True, env=env)
        marks = dest / ".git" / "fixture-marks"
        subprocess.run(
            ["git", "fast-import", "--quiet", f"--export-marks={marks}"],
            cwd=dest, input=self.stream(), check=True, env=env,
        )
        ids = {}
        for line in marks.read_text().splitlines():
            mark, sha = line.split()
            ids[int(mark[1:]) - 1] = sha
        marks.unlink()
        subprocess.run(["git", "reset", "-q", "--hard", "main"], cwd=dest, check=True, env=env)
        return [ids[i] for i in range(len(self.commits))]


# -- patch helpers --------------------------------------------------------------

def box(node_id: str, maxclass: str = "newobj", text: str | None = None, rect=(10.0, 10.0, 50.0, 22.0), **extra):
    b = {"id": node_id, "maxclass": maxclass, "patching_rect": list(rect), **extra}
    if text is not None:
        b["text"] = text
    return b


def make_patch(boxes: list[dict], lines: list[tuple[str, int, str, int]] = ()) -> bytes:
    doc = {
        "patcher": {
            "fileversion": 1,
            "boxes": [{"box": b} for b in boxes],
            "lines": [
                {"patchline": {"source": [s, sp], "destination": [d, dp]}} for s, sp, d, dp in lines
            ],
        }
    }
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()


# -- planted scenarios --------------------------------------------------------

Step = Callable[[], tuple[str, dict, str]]  # -> (message, writes, role)


@dataclass
class Scenario:
    name: str
    steps: list[Step]
    author: tuple[str, str]
    # step indices (within the scenario) planted as inducing / fixing
    inducing: set[int] = field(default_factory=set)
    fixes: set[int] = field(default_factory=set)


def _lines(rng: random.Random, tag: str, n: int, start: int = 0) -> list[str]:
    return [f"{tag}_{i} = {rng.randint(0, 10**6)}" for i in range(start, start + n)]


def _text(lines: list[str]) -> str:
    return "\n".join(lines) + "\n"


def _textual_scenarios(rng: random.Random, k: int, ext: str) -> list[Scenario]:
    sep = ";" if ext in (".c", ".js") else ""
    path = f"src/mod{k}{ext}"
    tag = f"v{k}"
    out = []
    kind = k % 6
    body = [ln + sep for ln in _lines(rng, tag, 6)]
    state = {"lines": list(body)}

    def add():
        return f"add module {k}", {path: _text(state["lines"])}, "plain"

    def edit(idx: list[int], msg: str):
        def step():
            for i in idx:
                state["lines"][i] = f"{tag}_{i} = {rng.randint(10**6, 10**7)}{sep}"
            return msg, {path: _text(state["lines"])}, "plain"

        return step

    def delete(i: int, msg: str):
        def step():
            del state["lines"][i]
            return msg, {path: _text(state["lines"])}, "plain"

        return step

    def append(n: int, msg: str):
        def step():
            state["lines"] += [ln + sep for ln in _lines(rng, tag + "x", n, len(state["lines"]))]
            return msg, {path: _text(state["lines"])}, "plain"

        return step

    if kind == 0:  # fix deletes a line from the adding commit
        out.append(Scenario(f"text-delete-{k}", [add, delete(2, f"fix crash in module {k}")], AUTHORS[k % 4], {0}, {1}))
    elif kind == 1:  # the fix rewrites a line last changed by an intermediate commit
        out.append(Scenario(
            f"text-modify-{k}",
            [add, edit([1], f"tweak module {k} values"), edit([1], f"fix wrong value in module {k}")],
            AUTHORS[k % 4], {1}, {2},
        ))
    elif kind == 2:  # two blamed lines from two commits
        out.append(Scenario(
            f"text-two-sources-{k}",
            [add, append(2, f"extend module {k}"), edit([2, 6], f"bug in module {k} resolved")],
            AUTHORS[k % 4], {0, 1}, {2},
        ))
    elif kind == 3:  # pure-addition fix blames nothing
        out.append(Scenario(f"text-add-only-{k}", [add, append(3, f"fix missing guard in module {k}")], AUTHORS[k % 4], set(), {1}))
    elif kind == 4:  # fix only removes a comment line
        comment = "#" if ext in (".py", ".rb") else ("--" if ext == ".lua" else "//")
        state["lines"].insert(3, f"{comment} note about module {k}")

        out.append(Scenario(f"text-comment-{k}", [add, delete(3, f"fix typo in module {k} notes")], AUTHORS[k % 4], set(), {1}))
    else:  # a fix that itself plants the next defect
        out.append(Scenario(
            f"text-fix-induces-{k}",
            [add, edit([4], f"fix overflow in module {k}"), edit([4], f"fix regression in module {k}")],
            AUTHORS[k % 4], {0, 1}, {1, 2},
        ))
    return out


def _visual_scenarios(rng: random.Random, k: int) -> list[Scenario]:
    path = f"patches/synth{k}.maxpat"
    kind = k % 6
    nodes = {f"obj-{i}": box(f"obj-{i}", "newobj", f"osc~ {rng.randint(100, 900)}") for i in range(1, 5)}
    edges = [("obj-1", 0, "obj-2", 0), ("obj-2", 0, "obj-3", 0)]
    state = {"nodes": nodes, "edges": edges}

    def patch():
        return make_patch(list(state["nodes"].values()), state["edges"])

    def add():
        return f"add synth {k} patcher", {path: patch()}, "plain"

    def set_text(node: str, msg: str):
        def step():
            state["nodes"][node] = box(node, "newobj", f"osc~ {rng.randint(1000, 9000)}", state["nodes"][node]["patching_rect"])
            return msg, {path: patch()}, "plain"

        return step

    def move(node: str, msg: str):
        def step():
            b = dict(state["nodes"][node])
            b["patching_rect"] = [b["patching_rect"][0] + 40.0, b["patching_rect"][1] + 15.0, 50.0, 22.0]
            state["nodes"][node] = b
            return msg, {path: patch()}, "plain"

        return step

    def remove(node: str, msg: str):
        def step():
            del state["nodes"][node]
            state["edges"] = [e for e in state["edges"] if node not in (e[0], e[2])]
            return msg, {path: patch()}, "plain"

        return step

    def insert(node: str, msg: str):
        def step():
            state["nodes"][node] = box(node, "message", f"{rng.randint(0, 127)}")
            return msg, {path: patch()}, "plain"

        return step

    if kind == 0:  # multi-hop chain ending in a deletion
        steps = [add, set_text("obj-3", f"retune synth {k}"), set_text("obj-3", f"retune synth {k} again"),
                 remove("obj-3", f"fix feedback loop in synth {k}")]
        return [Scenario(f"vis-chain-delete-{k}", steps, AUTHORS[(k + 1) % 4], {0, 1, 2}, {3})]
    if kind == 1:  # node added in the immediately preceding commit
        steps = [add, insert("obj-7", f"add trigger to synth {k}"), set_text("obj-7", f"fix trigger in synth {k}")]
        return [Scenario(f"vis-recent-{k}", steps, AUTHORS[(k + 1) % 4], {1}, {2})]
    if kind == 2:  # cosmetic move in between is not part of the chain
        steps = [add, move("obj-2", f"tidy synth {k}"), set_text("obj-2", f"fix wrong oscillator in synth {k}")]
        return [Scenario(f"vis-move-{k}", steps, AUTHORS[(k + 1) % 4], {0}, {2})]
    if kind == 3:  # add-only fix
        steps = [add, insert("obj-8", f"fix missing output in synth {k}")]
        return [Scenario(f"vis-add-only-{k}", steps, AUTHORS[(k + 1) % 4], set(), {1})]
    if kind == 4:  # nested subpatcher chain
        def sub(text: str):
            inner = [box("obj-1", "inlet"), box("obj-2", "newobj", text)]
            return box("obj-9", "newobj", "p voice", patcher={
                "boxes": [{"box": b} for b in inner], "lines": [{"patchline": {"source": ["obj-1", 0], "destination": ["obj-2", 0]}}],
            })

        def add_sub():
            state["nodes"]["obj-9"] = sub("filter~ 200")
            return f"add voice subpatcher to synth {k}", {path: patch()}, "plain"

        def edit_sub():
            state["nodes"]["obj-9"] = sub(f"filter~ {rng.randint(300, 900)}")
            return f"retune voice in synth {k}", {path: patch()}, "plain"

        def drop_child():
            b = dict(state["nodes"]["obj-9"])
            b["patcher"] = {"boxes": [b["patcher"]["boxes"][0]], "lines": []}
            state["nodes"]["obj-9"] = b
            return f"fix voice routing in synth {k}", {path: patch()}, "plain"

        return [Scenario(f"vis-subpatcher-{k}", [add, add_sub, edit_sub, drop_child], AUTHORS[(k + 1) % 4], {1, 2}, {3})]
    # long chain: five edits then a modifying fix
    steps = [add] + [set_text("obj-4", f"adjust synth {k} step {j}") for j in range(4)]
    steps.append(set_text("obj-4", f"fix detune bug in synth {k}"))
    return [Scenario(f"vis-long-chain-{k}", steps, AUTHORS[(k + 1) % 4], {0, 1, 2, 3, 4}, {5})]


def _mixed_scenario(rng: random.Random, k: int) -> Scenario:
    tpath, vpath = f"src/bridge{k}.js", f"patches/bridge{k}.maxpat"
    lines = [ln + ";" for ln in _lines(rng, f"b{k}", 5)]
    nodes = [box("obj-1", "newobj", "js bridge.js"), box("obj-2", "newobj", "route a b")]

    def s0():
        return f"add bridge {k} script", {tpath: _text(lines)}, "plain"

    def s1():
        return f"add bridge {k} patcher", {vpath: make_patch(nodes, [("obj-1", 0, "obj-2", 0)])}, "plain"

    def s2():
        lines[2] = f"b{k}_2 = {rng.randint(10**6, 10**7)};"
        nodes[1] = box("obj-2", "newobj", "route a b c")
        return f"fix bridge {k} message routing", {tpath: _text(lines), vpath: make_patch(nodes, [("obj-1", 0, "obj-2", 0)])}, "plain"

    return Scenario(f"mixed-{k}", [s0, s1, s2], AUTHORS[k % 4], {0, 1}, {2})


@dataclass
class PlantedRepo:
    builder: RepoBuilder
    inducing: set[int]
    fixes: set[int]
    scenarios: dict[str, list[int]]
    hashes: list[str] = field(default_factory=list)

    def write(self, dest: str | os.PathLike) -> PlantedRepo:
        self.hashes = self.builder.write(dest)
        return self

    @property
    def inducing_hashes(self) -> set[str]:
        return {self.hashes[i] for i in self.inducing}

    @property
    def fix_hashes(self) -> set[str]:
        return {self.hashes[i] for i in self.fixes}


def planted_repo(seed: int = 0, n_textual: int = 12, n_visual: int = 12, n_mixed: int = 2, min_commits: int = 0,
                 noise_rate: float = 0.5) -> PlantedRepo:
    """Interleave planted scenarios with unrelated noise commits.

    Noise commits never touch scenario files and never use defect keywords,
    so the planted sets are the complete truth.
    """
    rng = random.Random(seed)
    exts = (".py", ".c", ".lua", ".js", ".rb", ".cpp")
    scenarios = [s for k in range(n_textual) for s in _textual_scenarios(rng, k, exts[k % len(exts)])]
    scenarios += [s for k in range(n_visual) for s in _visual_scenarios(rng, k)]
    scenarios += [_mixed_scenario(rng, k) for k in range(n_mixed)]

    builder = RepoBuilder()
    noise = {"count": 0, "doc": [], "helper": [], "nodes": []}

    def noise_commit() -> None:
        n = noise["count"]
        noise["count"] += 1
        author = AUTHORS[rng.randrange(4)]
        msg = f"{_NOISE_MESSAGES[rng.randrange(len(_NOISE_MESSAGES))]} ({n})"
        choice = n % 4
        if choice == 0:
            noise["doc"].append(f"* note {n}: {rng.randint(0, 99999)}")
            writes = {"README.md": "# Demo\n" + "\n".join(noise["doc"]) + "\n"}
        elif choice == 1:
            noise["helper"].append(f"h_{n} = {rng.randint(0, 99999)}")
            writes = {f"tools/helpers{n % 3}.py": "\n".join(noise["helper"][-(n % 7 + 1):]) + "\n"}
        elif choice == 2:
            noise["nodes"].append(box(f"obj-{n + 1}", "newobj", f"metro {rng.randint(10, 999)}"))
            writes = {"patches/noise.maxpat": make_patch(noise["nodes"]), "docs/changes.txt": f"{n}\n"}
        else:
            writes = {f"assets/sample{n}.txt": f"sample {n}\n", "tools/run.py": f"RUNS = {n}\n"}
        builder.commit(msg, writes, author)

    positions = {s.name: [] for s in scenarios}
    cursors = {s.name: 0 for s in scenarios}
    live = list(scenarios)
    for _ in range(3):
        noise_commit()
    while live:
        if rng.random() < noise_rate:
            noise_commit()
            continue
        s = live[rng.randrange(len(live))]
        message, writes, _ = s.steps[cursors[s.name]]()
        positions[s.name].append(builder.commit(message, writes, s.author))
        cursors[s.name] += 1
        if cursors[s.name] == len(s.steps):
            live.remove(s)
    while len(builder.commits) < min_commits:
        noise_commit()

    inducing = {positions[s.name][i] for s in scenarios for i in s.inducing}
    fixes = {positions[s.name][i] for s in scenarios for i in s.fixes}
    return PlantedRepo(builder, inducing, fixes, positions)


def pipeline_fixture(dest: str | os.PathLike, seed: int = 7) -> PlantedRepo:
    """The bundled end-to-end fixture: 200+ commits with both code kinds."""
    return planted_repo(seed=seed, n_textual=18, n_visual=18, n_mixed=4, min_commits=220, noise_rate=0.55).write(dest)
