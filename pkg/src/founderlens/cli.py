"""Command-line front end: full runs, single stages, synthetic data."""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from .config import load_config
from .errors import FounderLensError, InputFormatError, SampleSizeError, ValidationError
from .pipeline import STAGES, run_pipeline
from .simulate import PipelineScenario, generate_synthetic

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_BAD_INPUT = 2
EXIT_VALIDATION = 3


def _configure_logging() -> None:
    level_name = os.environ.get("FOUNDERLENS_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


@click.group()
def cli():
    """Founder-personality analytics over community event logs."""


def config_options(fn):
    options = [
        click.option("--config", "config_path", required=True,
                     type=click.Path(), help="TOML run configuration."),
        click.option("--seed", type=int, default=None, help="Override the root seed."),
        click.option("--output", type=click.Path(), default=None,
                     help="Override the output directory."),
        click.option("--jobs", type=int, default=None, help="Worker bound within stages."),
        click.option("--min-words", "min_words", type=int, default=None),
        click.option("--alpha", type=float, default=None),
        click.option("--kfolds", type=int, default=None),
        click.option("--force", is_flag=True, default=False,
                     help="Recompute even when cached artifacts are intact."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _execute(config_path, force, stages=None, **overrides):
    config = load_config(config_path, overrides)
    manifest = run_pipeline(config, stages=stages, force=force)
    for name in STAGES:
        record = manifest["stages"][name]
        status = record.get("status", "?")
        counts = record.get("counts", {})
        summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        click.echo(f"{name}: {status}" + (f" ({summary})" if summary else ""))
    click.echo(f"manifest: {Path(config.output) / 'manifest.json'}")
    return EXIT_OK


@cli.command()
@config_options
def run(config_path, force, **overrides):
    """Run every stage of the pipeline."""
    return _execute(config_path, force, stages=None, **overrides)


def _register_stage(name: str):
    @config_options
    def command(config_path, force, **overrides):
        return _execute(config_path, force, stages=[name], **overrides)

    command.__name__ = name
    command.__doc__ = f"Run only the {name} stage."
    cli.command(name=name)(command)


for _name in STAGES:
    _register_stage(_name)


_CONFIG_TEMPLATE = """\
seed = {seed}

[paths]
lexicons = "lexicons"
norms = "norms.csv"
calibration = "calibration.csv"
events = "events.jsonl"
output = "out"

[thresholds]
min_words = {min_words}
bigram_min_users = {bigram_min_users}

[grids.random_forest]
trees = [60]
max_features = ["third"]

[grids.gradient_boosting]
trees = [120]
depth = [2]
learning_rate = [0.1]

[grids.support_vector]
c = [1.0]
epsilon = [0.1]
"""


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for the generated dataset.")
@click.option("--seed", type=int, default=0)
@click.option("--communities", type=int, default=220)
@click.option("--calibration-users", "calibration_users", type=int, default=240)
@click.option("--docs-per-user", "docs_per_user", type=int, default=2)
@click.option("--words-per-doc", "words_per_doc", type=int, default=180)
@click.option("--emit-config/--no-emit-config", default=True,
              help="Also write a ready-to-run config.toml beside the data.")
def simulate(out_dir, seed, communities, calibration_users, docs_per_user,
             words_per_doc, emit_config):
    """Generate a synthetic dataset with planted ground-truth effects."""
    scenario = PipelineScenario(
        n_calibration_users=calibration_users,
        n_communities=communities,
        docs_per_user=docs_per_user,
        words_per_doc=words_per_doc,
    )
    dataset = generate_synthetic(scenario, seed, out_dir)
    click.echo(f"events: {dataset.events_path}")
    click.echo(f"calibration: {dataset.calibration_path}")
    click.echo(f"ground truth: {dataset.groundtruth_path}")
    if emit_config:
        # generous floor: every generated user shares the common collocations
        min_words = min(150, docs_per_user * words_per_doc // 2)
        config_path = Path(out_dir) / "config.toml"
        config_path.write_text(
            _CONFIG_TEMPLATE.format(
                seed=seed,
                min_words=min_words,
                bigram_min_users=max(10, calibration_users // 3),
            ),
            encoding="utf-8",
        )
        click.echo(f"config: {config_path}")
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    try:
        result = cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return EXIT_BAD_INPUT
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_INTERNAL
    except InputFormatError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_BAD_INPUT
    except (ValidationError, SampleSizeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except FounderLensError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
