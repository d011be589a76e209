"""Command-line interface.

Subcommands: build-datasets, train, evaluate, curve, predict. Every flag
overrides its config-file key. Exit codes: 0 success, 2 validation error,
3 data error, 4 internal error.
"""

from __future__ import annotations

import functools
import logging
import sys

import click

from . import pipeline
from .config import load_config
from .errors import DataError, ValidationError
from .ingest import CATEGORIES


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(3)
        except click.exceptions.Exit:
            raise
        except Exception as exc:  # noqa: BLE001 - boundary of the CLI
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(4)

    return wrapper


def _cap_options(fn):
    for name in reversed(CATEGORIES):
        fn = click.option(
            f"--cap-{name}",
            type=int,
            default=None,
            help=f"Subsample cap for the {name} category.",
        )(fn)
    return fn


def _load(config_path, out, seed, caps=None, which="train_caps", **overrides):
    config = load_config(config_path)
    if out is not None:
        config.output_dir = out
    if seed is not None:
        config.seed = seed
    if caps and any(v is not None for v in caps.values()):
        merged = dict(getattr(config, which))
        for name, value in caps.items():
            if value is not None:
                merged[name] = value
        setattr(config, which, merged)
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    return config


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    """Boosted kernel-mixture intrusion detection pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command("build-datasets")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", type=int, default=None)
@click.option("--train-file", default=None, help="Source training CSV.")
@_cap_options
@_exit_codes
def build_datasets_cmd(config_path, out, seed, train_file, **caps):
    """Build the normal pool, intrusion clusters, and incremental sets."""
    caps = {name: caps.pop(f"cap_{name}") for name in CATEGORIES}
    config = _load(config_path, out, seed, caps, train_file=train_file)
    paths = pipeline.build_datasets(config)
    click.echo(f"datasets written under {paths['norm'].rsplit('/', 1)[0]}")
    with open(paths["summary_text"], encoding="ascii") as fh:
        click.echo(fh.read(), nl=False)


@main.command("train")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option(
    "--mode", type=click.Choice(["misuse", "anomaly"]), required=True
)
@click.option(
    "--dataset",
    required=True,
    help="Built dataset id (d13, norm, c07, ...) or a CSV path.",
)
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", type=int, default=None)
@click.option("--rounds", type=int, default=None, help="Boosting rounds.")
@_exit_codes
def train_cmd(config_path, mode, dataset, out, seed, rounds):
    """Train a misuse (boosted) or anomaly (density) model."""
    config = _load(config_path, out, seed, rounds=rounds)
    paths = pipeline.train_model(config, mode, dataset)
    click.echo(f"model: {paths['model']}")
    click.echo(f"log:   {paths['log']}")


@main.command("evaluate")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--test", "test_path", default=None, type=click.Path())
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", type=int, default=None)
@_cap_options
@_exit_codes
def evaluate_cmd(config_path, model_path, test_path, out, seed, **caps):
    """Evaluate a saved model against a labeled test file."""
    caps = {name: caps.pop(f"cap_{name}") for name in CATEGORIES}
    config = _load(config_path, out, seed, caps, which="test_caps")
    paths = pipeline.evaluate_model(config, model_path, test_path)
    with open(paths["text"], encoding="ascii") as fh:
        click.echo(fh.read(), nl=False)
    click.echo(f"report files: {', '.join(sorted(paths.values()))}")


@main.command("curve")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", type=int, default=None)
@click.option("--rounds", type=int, default=None, help="Boosting rounds.")
@click.option(
    "--stages",
    default=None,
    help="Comma-separated stage list (default 1..13).",
)
@_exit_codes
def curve_cmd(config_path, out, seed, rounds, stages):
    """Detection-rate curve across the incremental training sets."""
    config = _load(config_path, out, seed, rounds=rounds)
    stage_list = None
    if stages:
        try:
            stage_list = [int(s) for s in stages.split(",")]
        except ValueError:
            raise ValidationError(f"bad --stages value {stages!r}") from None
    paths = pipeline.build_curve(config, stage_list)
    click.echo(f"curve files: {', '.join(sorted(paths.values()))}")


@main.command("predict")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "output_path", default=None, type=click.Path())
@_exit_codes
def predict_cmd(config_path, model_path, input_path, output_path):
    """Score raw records: one 'class,scores...' line per input record."""
    config = load_config(config_path)
    count = pipeline.predict_records(config, model_path, input_path, output_path)
    if output_path is not None:
        click.echo(f"{count} records scored to {output_path}")


if __name__ == "__main__":
    main()
