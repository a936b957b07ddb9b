"""Command-line entry point.

Three subcommands: ``fit`` runs the full pipeline on a CSV file, ``simulate``
drives the Monte Carlo harness, and ``combine`` replays the master side from
previously written worker envelopes.  Exit codes: 0 success, 2 input error,
3 numerical failure, 4 configuration error.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .exceptions import (
    ConfigError,
    DimensionMismatch,
    InputError,
    NonConvergence,
    NonPositiveDefinite,
    ScenarioAborted,
    SingularHessian,
    TooFewRows,
)
from .families import ModelFamily
from .ingest import TableSchema
from .partition import parse_strategy
from .pipeline import RunConfig, run_pipeline
from .simulate import EXAMPLE_ORDER, ScenarioSpec

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

_FAMILY_CHOICES = ("linear", "logistic", "poisson", "cox", "ordered-probit")


@click.group(name="dlsa")
def cli():
    """One-round distributed regression with shrinkage selection."""


@cli.command("fit")
@click.option("--family", type=click.Choice(_FAMILY_CHOICES), required=True)
@click.option("--input", "input_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--schema", "schema_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--k", type=int, required=True, help="number of worker partitions")
@click.option("--partition", "strategy", default="contiguous",
              help="contiguous | round-robin | by-column:<col>")
@click.option("--no-shrink", is_flag=True, default=False)
@click.option("--penalize", multiple=True,
              help="feature names to penalize (default: all but intercept)")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--jobs", type=int, default=None,
              help="worker pool size (default: hardware threads)")
@click.option("--seed", type=int, default=0)
def fit_cmd(family, input_path, schema_path, k, strategy, no_shrink, penalize,
            out_dir, jobs, seed):
    """Partition a CSV, fit the workers, combine and select on the master."""
    jobs = jobs or max(1, os.cpu_count() or 1)
    parse_strategy(strategy)
    schema = TableSchema.from_json(schema_path)
    if family == "ordered-probit":
        if schema.num_cutpoints == 0:
            raise ConfigError("ordered-probit needs an ordinal response column")
        fam = ModelFamily.ordered_probit(schema.num_cutpoints)
    else:
        fam = ModelFamily(family)
    config = RunConfig(
        mode="file", out_dir=out_dir, family=fam, input_path=input_path,
        schema=schema, k=k, strategy=strategy,
        penalize=tuple(penalize) or None, shrink=not no_shrink,
        jobs=jobs, seed=seed,
    )
    result = run_pipeline(config)
    click.echo(f"wrote {len(result.artifacts)} artifacts to {result.out_dir}")


@cli.command("simulate")
@click.option("--example", type=click.IntRange(1, 5), required=True,
              help="1 linear, 2 logistic, 3 poisson, 4 cox, 5 ordered-probit")
@click.option("--setting", type=click.IntRange(1, 2), default=1,
              help="1 iid covariates, 2 heterogeneous covariates")
@click.option("--n", "n_total", type=int, default=10000)
@click.option("--k", type=int, default=5)
@click.option("--r", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--jobs", type=int, default=None,
              help="replication pool size (default: hardware threads)")
@click.option("--no-shrink", is_flag=True, default=False)
@click.option("--full-grid", is_flag=True, default=False,
              help="run the full benchmark grid (N=10k/20k/100k with "
                   "K=5/5/10 and R=500) instead of a single cell")
def simulate_cmd(example, setting, n_total, k, r, seed, out_dir, jobs,
                 no_shrink, full_grid):
    """Run replicated benchmark scenarios and write the metric tables."""
    jobs = jobs or max(1, os.cpu_count() or 1)
    example_name = EXAMPLE_ORDER[example - 1]
    setting_name = "iid" if setting == 1 else "heterogeneous"
    if full_grid:
        cells = [(10_000, 5), (20_000, 5), (100_000, 10)]
        for n_cell, k_cell in cells:
            spec = ScenarioSpec(example=example_name, setting=setting_name,
                                n_total=n_cell, k=k_cell, r=500, seed=seed)
            config = RunConfig(mode="simulate",
                               out_dir=out_dir / f"n{n_cell}_k{k_cell}",
                               scenario=spec, shrink=not no_shrink, jobs=jobs)
            result = run_pipeline(config)
            click.echo(f"n={n_cell} k={k_cell}: wrote {result.out_dir}")
        return
    spec = ScenarioSpec(example=example_name, setting=setting_name,
                        n_total=n_total, k=k, r=r, seed=seed)
    config = RunConfig(mode="simulate", out_dir=out_dir, scenario=spec,
                       shrink=not no_shrink, jobs=jobs)
    result = run_pipeline(config)
    click.echo((result.out_dir / "report.txt").read_text().rstrip())


@cli.command("combine")
@click.option("--summaries", "summaries_dir", type=click.Path(path_type=Path),
              required=True, help="directory of .envelope worker summaries")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--no-shrink", is_flag=True, default=False)
def combine_cmd(summaries_dir, out_dir, no_shrink):
    """Master-only mode: combine pre-computed worker envelopes."""
    config = RunConfig(mode="combine", out_dir=out_dir,
                       summaries_dir=summaries_dir, shrink=not no_shrink)
    result = run_pipeline(config)
    click.echo(f"wrote {len(result.artifacts)} artifacts to {result.out_dir}")


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and translate failures into the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return EXIT_CONFIG
    except click.exceptions.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except (ConfigError,) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (InputError, TooFewRows) as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_INPUT
    except (NonConvergence, SingularHessian, NonPositiveDefinite,
            DimensionMismatch, ScenarioAborted) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
