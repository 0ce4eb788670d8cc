"""Command-line interface: one subcommand per stage plus ``run`` for all of them."""
from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__, fixtures, labeling, pipeline
from .pipeline import ProjectPaths, RepoSpec, RunConfig


def _fail(stage: str, exc: BaseException, project: str | None = None) -> None:
    err = {"project": project, "stage": stage, "error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(err, sort_keys=True), err=True)
    sys.exit(1)


def _config(ctx_opts: dict, repos: list[RepoSpec] | None = None) -> RunConfig:
    """Build a RunConfig from ``--config`` plus explicit flags (flags win)."""
    config_file = ctx_opts.pop("config", None)
    overrides = {k: v for k, v in ctx_opts.items() if v is not None and v != ()}
    if repos:
        overrides["repos"] = [r.__dict__ for r in repos]
    if config_file:
        return RunConfig.from_file(config_file, **overrides)
    return RunConfig(**overrides)


def common_options(fn):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON RunConfig file."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def mining_options(fn):
    opts = [
        click.option("--textual-ext", "textual_extensions", multiple=True, help="Textual code extension (repeatable)."),
        click.option("--count-position-changes/--ignore-position-changes", default=None,
                     help="Treat node moves as modifications."),
        click.option("--min-commits", type=int, help="Eligibility threshold on history length."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def labeling_options(fn):
    opts = [
        click.option("--strategy", type=click.Choice(["keywords", "issue-links"]), help="Fix-commit identification."),
        click.option("--keyword", "keywords", multiple=True, help="Fix keyword (repeatable)."),
        click.option("--issues", "issues_csv", type=click.Path(exists=True, dir_okay=False),
                     help="issues.csv for the issue-links strategy."),
        click.option("--vc-strategy", type=click.Choice([labeling.FULL_CHAIN, labeling.MOST_RECENT]),
                     help="Visual tracing depth."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def model_options(fn):
    opts = [
        click.option("--rho", type=float, help="Spearman correlation threshold."),
        click.option("--vif", type=float, help="VIF threshold."),
        click.option("--train-fraction", type=float, help="Share of oldest commits used for training."),
        click.option("--smote-k", type=int, help="SMOTE neighbours."),
        click.option("--smote-seed", type=int, help="SMOTE seed."),
        click.option("--seed", type=int, help="Learner seed."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _project(cfg: RunConfig, project: str | None, repo: str | None = None) -> ProjectPaths:
    name = project or (Path(repo).resolve().name if repo else None)
    if not name:
        raise click.UsageError("--project is required")
    return ProjectPaths(Path(cfg.out_dir), name)


def _stage(name: str):
    """Run the wrapped stage, turning any failure into a JSON error and exit 1."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except click.ClickException:
                raise
            except Exception as exc:
                _fail(name, exc, kwargs.get("project"))

        return wrapper

    return deco


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="More logging.")
def main(verbose: int) -> None:
    """Just-in-time defect prediction for repositories mixing visual and textual code."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("repo", type=click.Path(exists=True, file_okay=False))
@click.option("--branch", default="main", show_default=True)
@click.option("--project", help="Project name (defaults to the repository directory name).")
@common_options
@mining_options
@_stage("mine")
def mine(repo, branch, project, **opts):
    """Walk the first-parent history of REPO into commits.jsonl."""
    cfg = _config(opts)
    paths = _project(cfg, project, repo)
    report = pipeline.mine_stage(RepoSpec(repo, branch), paths, cfg)
    click.echo(json.dumps(report.to_dict(), sort_keys=True))


@main.command()
@click.argument("repo", type=click.Path(exists=True, file_okay=False))
@click.option("--project")
@common_options
@mining_options
@labeling_options
@_stage("label")
def label(repo, project, **opts):
    """Find fix commits and trace them to defect-inducing commits."""
    cfg = _config(opts)
    paths = _project(cfg, project, repo)
    report = pipeline.label_stage(RepoSpec(repo), paths, cfg)
    click.echo(json.dumps(report.to_dict(), sort_keys=True))


@main.command()
@click.option("--project", required=True)
@common_options
@_stage("features")
def features(project, **opts):
    """Compute per-commit features into features.csv."""
    cfg = _config(opts)
    n = pipeline.features_stage(_project(cfg, project))
    click.echo(f"{n} feature rows")


@main.command()
@click.option("--project", required=True)
@common_options
@model_options
@_stage("prepare")
def prepare(project, **opts):
    """Time split, feature selection and oversampling of the training set."""
    cfg = _config(opts)
    sel = pipeline.prepare_stage(_project(cfg, project), cfg)
    click.echo(json.dumps(sel.to_dict(), sort_keys=True))


@main.command()
@click.option("--project", required=True)
@common_options
@model_options
@_stage("train")
def train(project, **opts):
    """Train the learner x feature-combination matrix."""
    cfg = _config(opts)
    cells = pipeline.train_stage(_project(cfg, project), cfg)
    ok = sum(c.model is not None for c in cells)
    click.echo(f"{ok}/{len(cells)} models trained")


@main.command()
@click.option("--project", required=True)
@common_options
@_stage("evaluate")
def evaluate(project, **opts):
    """Score every trained model on the held-out split."""
    cfg = _config(opts)
    rows = pipeline.evaluate_stage(_project(cfg, project))
    click.echo(f"{len(rows)} evaluation rows")


@main.command()
@click.option("--project", required=True)
@common_options
@_stage("rank")
def rank(project, **opts):
    """Rank feature combinations and learners with NPSK."""
    cfg = _config(opts)
    ranks = pipeline.rank_stage(_project(cfg, project))
    click.echo(json.dumps(ranks, sort_keys=True))


@main.command()
@click.option("--project", required=True)
@common_options
@_stage("report")
def report(project, **opts):
    """Assemble report.json for one project."""
    cfg = _config(opts)
    rep = pipeline.report_stage(_project(cfg, project))
    click.echo(json.dumps({k: rep[k] for k in ("project", "majority", "label_counts")}, sort_keys=True))


@main.command()
@click.argument("repos", nargs=-1, type=click.Path())
@click.option("--branch", default=None, help="Branch for repositories given on the command line.")
@click.option("--pool", type=click.Choice(["scores", "medians"]), help="Cross-project pooling for ranks.")
@click.option("--jobs", type=int, help="Projects processed in parallel.")
@common_options
@mining_options
@labeling_options
@model_options
def run(repos, branch, **opts):
    """Run every stage for each repository (from REPOS or --config)."""
    specs = [RepoSpec(r, branch or "main") for r in repos] or None
    try:
        cfg = _config(opts, specs)
    except (ValueError, TypeError, OSError) as exc:
        _fail("config", exc)
    if not cfg.repos:
        raise click.UsageError("no repositories given")
    reports, errors = pipeline.run_pipeline(cfg)
    for name in sorted(reports):
        r = reports[name]
        state = "halted at " + r["halted_at"] if r["halted_at"] else "ok"
        click.echo(f"{name}: {state}")
    for e in errors:
        click.echo(json.dumps(e, sort_keys=True), err=True)
    if errors:
        sys.exit(1)


@main.command("make-fixture")
@click.argument("dest", type=click.Path(file_okay=False))
@click.option("--seed", default=7, show_default=True)
def make_fixture(dest, seed):
    """Write the bundled synthetic repository to DEST."""
    planted = fixtures.pipeline_fixture(dest, seed=seed)
    click.echo(json.dumps({
        "commits": len(planted.hashes),
        "fix_commits": sorted(planted.fix_hashes),
        "inducing_commits": sorted(planted.inducing_hashes),
    }, sort_keys=True))


if __name__ == "__main__":  # pragma: no cover
    main()
