import functools
import json
import os
from typing import Any
from typing import Callable
from typing import Optional
from typing import Tuple

import click
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console

from prgauge.domain import build_curves
from prgauge.domain import build_report
from prgauge.domain import combine_scores
from prgauge.domain import evaluate_cmi
from prgauge.domain import generate_corpus
from prgauge.domain import generate_data
from prgauge.domain import measure_invariance
from prgauge.domain import plot_curves
from prgauge.domain import score_models
from prgauge.domain import time_curves
from prgauge.entities import RunConfig
from prgauge.errors import ConfigError
from prgauge.errors import InsufficientModelsError
from prgauge.errors import MissingPrerequisiteError
from prgauge.errors import PrgaugeError
from prgauge.logging_utils import init_logging
from prgauge.parallel import worker_count
from prgauge.repository import score_repository

EXIT_CONFIG_ERROR = 2
EXIT_PARTIAL_FAILURE = 3
EXIT_MISSING_PREREQUISITE = 4


class ConfigException(click.ClickException):
    exit_code = EXIT_CONFIG_ERROR


class PartialFailureException(click.ClickException):
    exit_code = EXIT_PARTIAL_FAILURE


class MissingPrerequisiteException(click.ClickException):
    exit_code = EXIT_MISSING_PREREQUISITE


def _handle_errors(command: Callable) -> Callable:
    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except (ConfigError, InsufficientModelsError) as e:
            raise ConfigException(str(e))
        except ValidationError as e:
            raise ConfigException(f"Invalid configuration: {e}")
        except MissingPrerequisiteError as e:
            raise MissingPrerequisiteException(str(e))
        except PrgaugeError as e:
            raise click.ClickException(str(e))

    return wrapper


def load_config(path: str, seed: Optional[int] = None, output_dir: Optional[str] = None) -> RunConfig:
    """Reads a JSON run configuration; --seed and --output-dir override the file."""
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as file:
        try:
            document = json.load(file)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}")
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    if seed is not None:
        document["seed"] = seed
    if output_dir is not None:
        document["output_dir"] = output_dir
    return RunConfig.model_validate(document)


def config_options(command: Callable) -> Callable:
    command = click.option("--output-dir", type=click.Path(file_okay=False), help="Overrides the config output directory")(command)
    command = click.option("--seed", type=int, help="Overrides the config seed")(command)
    command = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="JSON run configuration")(command)
    return command


@click.group(
    help="""
prgauge: perturbation response curves and generalization measures for small neural networks.

Typical pipeline:
  prgauge gen-corpus --config configs/generalization.json
  prgauge prcurve    --config configs/generalization.json
  prgauge score      --config configs/generalization.json
  prgauge cmi        --config configs/generalization.json
"""
)
@click.option("--debug", is_flag=True, default=False, help="Verbose logging")
def prgauge(debug: bool) -> None:
    load_dotenv(dotenv_path=os.path.join(os.getcwd(), ".env"))
    init_logging(debug)


@prgauge.command("gen-data")
@config_options
@_handle_errors
def gen_data(config_path: str, seed: Optional[int], output_dir: Optional[str]) -> None:
    """Generate and store the synthetic datasets of a run."""
    config = load_config(config_path, seed, output_dir)
    for path in generate_data.execute(config):
        click.echo(path)


@prgauge.command("gen-corpus")
@config_options
@_handle_errors
def gen_corpus(config_path: str, seed: Optional[int], output_dir: Optional[str]) -> None:
    """Train every grid cell of the corpus; completed cells are skipped."""
    config = load_config(config_path, seed, output_dir)
    result = generate_corpus.execute(config, workers=worker_count())
    click.echo(json.dumps(generate_corpus.summary(result), sort_keys=True))
    if result.failures:
        failed = ", ".join(failure.model_id for failure in result.failures)
        raise PartialFailureException(f"{len(result.failures)} corpus cells failed: {failed}")


@prgauge.command("prcurve")
@config_options
@click.option("--reuse", is_flag=True, default=False, help="Keep stored curves built with the same settings")
@_handle_errors
def prcurve(config_path: str, seed: Optional[int], output_dir: Optional[str], reuse: bool) -> None:
    """Build the PR curves every configured measure needs."""
    config = load_config(config_path, seed, output_dir)
    paths = build_curves.execute(config, workers=worker_count(), rebuild=not reuse)
    click.echo(f"Wrote {len(paths)} curves")


@prgauge.command("score")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run configuration")
@click.option("--seed", type=int, help="Overrides the config seed")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Overrides the config output directory")
@click.option("--curve", "curve_paths", multiple=True, type=click.Path(dir_okay=False), help="Score standalone curve files")
@click.option("--output", default="scores.csv", type=click.Path(dir_okay=False), help="Score table for --curve mode")
@click.option("--pal-mode", type=click.Choice(["literal", "cumulative"]), default="literal")
@_handle_errors
def score(
    config_path: Optional[str],
    seed: Optional[int],
    output_dir: Optional[str],
    curve_paths: Tuple[str, ...],
    output: str,
    pal_mode: str,
) -> None:
    """Score the corpus models, or standalone curve files given with --curve."""
    if curve_paths:
        values = score_models.score_curve_files(curve_paths, pal_mode=pal_mode)  # type: ignore[arg-type]
        score_repository.save_scores(output, os.path.splitext(output)[0] + ".json", values)
        click.echo(f"Wrote {output}")
        return
    if config_path is None:
        raise ConfigError("score needs --config or at least one --curve")
    config = load_config(config_path, seed, output_dir)
    values = score_models.execute(config, workers=worker_count())
    click.echo(f"Wrote {len(values)} scores")


@prgauge.command("combine")
@config_options
@click.option("--combination", "labels", multiple=True, help="method:measure+measure, e.g. pca:gi_intra_l0+mixup_l0")
@_handle_errors
def combine(config_path: str, seed: Optional[int], output_dir: Optional[str], labels: Tuple[str, ...]) -> None:
    """Add combined measure columns to the score table."""
    config = load_config(config_path, seed, output_dir)
    combine_scores.execute(config, labels=list(labels) or None)
    click.echo("Updated score table")


@prgauge.command("cmi")
@config_options
@_handle_errors
def cmi(config_path: str, seed: Optional[int], output_dir: Optional[str]) -> None:
    """Conditional mutual information of every scored measure with the generalization gap."""
    config = load_config(config_path, seed, output_dir)
    reports = evaluate_cmi.execute(config, workers=worker_count())
    Console().print(evaluate_cmi.render_table(reports, title=f"CMI ({config.output_dir})"))


@prgauge.command("invariance")
@config_options
@_handle_errors
def invariance(config_path: str, seed: Optional[int], output_dir: Optional[str]) -> None:
    """Compare Gi against the augmented-subset and mean-PR baselines on augmented corpora."""
    config = load_config(config_path, seed, output_dir)
    reports = measure_invariance.execute(config, workers=worker_count())
    Console().print(measure_invariance.render_table(reports))


@prgauge.command("timing")
@config_options
@_handle_errors
def timing(config_path: str, seed: Optional[int], output_dir: Optional[str]) -> None:
    """Time PR curve construction as a function of the number of batches."""
    config = load_config(config_path, seed, output_dir)
    rows = time_curves.execute(config, workers=worker_count())
    click.echo(f"Timed {len(rows)} batch counts")


@prgauge.command("plot")
@click.option("--curve", "curve_paths", multiple=True, required=True, type=click.Path(dir_okay=False), help="Curve CSV file")
@click.option("--output", default="prcurve.svg", type=click.Path(dir_okay=False), help="SVG file to write")
@_handle_errors
def plot(curve_paths: Tuple[str, ...], output: str) -> None:
    """Plot PR and PCD curves to a two-panel SVG."""
    plot_curves.execute(curve_paths, output)
    click.echo(f"Wrote {output}")


@prgauge.command("report")
@config_options
@click.option("--task", "task_dirs", multiple=True, type=click.Path(file_okay=False), help="Other run directories to average CMI over")
@_handle_errors
def report(config_path: str, seed: Optional[int], output_dir: Optional[str], task_dirs: Tuple[str, ...]) -> None:
    """Bundle every artifact of a run into report.json and report.md."""
    config = load_config(config_path, seed, output_dir)
    build_report.execute(config, task_dirs)
    click.echo(f"Wrote {os.path.join(config.output_dir, build_report.REPORT_JSON)}")
