"""Command line runner of the workbench."""

import sys
from pathlib import Path
from typing import Optional

import typer

from . import __version__, pkg_res
from . import config as c
from .errors import InternalConsistencyError, KacbenchError
from .experiment import (
    EXPERIMENT_SCHEMA_FILE,
    Command,
    ExperimentError,
    example_file,
    load_experiment,
    run_experiment,
)
from .util import ExitCode, critical_exit

app = typer.Typer()


@app.command()
def version() -> None:
    """Print current version."""
    print(__version__)


@app.command()
def default_conf() -> None:
    """
    Output a default kacbench.toml settings file.

    It contains all available settings.
    """
    print(open(c.DEF_CONFIG_FILE, "r").read(), end="")


@app.command()
def schema() -> None:
    """Output the JSON Schema of experiment files."""
    print(open(pkg_res(EXPERIMENT_SCHEMA_FILE), "r").read(), end="")


@app.command()
def example(command: Command) -> None:
    """Output the example experiment file of a command."""
    print(open(example_file(command), "r").read(), end="")


@app.command()
def run(
    config: Path = typer.Option(..., help="Experiment file to run."),
    out: Path = typer.Option(Path("."), help="Directory for the report files."),
    seed: Optional[int] = typer.Option(None, help="Override the seed of the experiment."),
    samples: Optional[int] = typer.Option(None, help="Override the Monte Carlo samples."),
    budget: Optional[int] = typer.Option(None, help="Override the per-point budget."),
    quiet: bool = typer.Option(False, help="Only log warnings and errors."),
    settings: Optional[Path] = typer.Option(None, help="Workbench settings file."),
) -> None:
    """
    Run an experiment and write its report into the output directory.

    Exit codes: 0 if all verdicts pass, 1 if one fails, 2 for invalid input,
    3 if the run abstained (budget exhausted or cells not certified),
    4 if an internal invariant failed.
    """
    c.init_conf(settings, quiet=quiet)
    try:
        cfg = load_experiment(config).with_overrides(seed, samples, budget)
    except ExperimentError as err:
        critical_exit(f"Invalid experiment: {err}")
    except ValueError as err:  # overrides out of range
        critical_exit(f"Invalid override: {err}")

    cmdline = " ".join(["kacbench"] + sys.argv[1:])
    try:
        code, report = run_experiment(cfg, out, cmdline)
    except InternalConsistencyError as err:
        critical_exit(f"Internal error while running {config}: {err}", ExitCode.INTERNAL)
    except KacbenchError as err:
        critical_exit(f"Cannot run {config}: {err}")
    print(f"{report.body.status.value}: {out / (cfg.stem + '.json')}")
    raise typer.Exit(code=int(code))


if __name__ == "__main__":  # pragma: no cover
    app()
