import sys
import logging
import functools
from pathlib import Path
import click
from facetflow.exceptions import FacetflowError
from facetflow.config import parse_config, float_list
from facetflow.orchestrate import (
    VERIFY_TARGETS,
    cmd_solve,
    cmd_sweep,
    cmd_verify,
    cmd_analyze,
)

logger = logging.getLogger("facetflow")

LOG_LEVELS = ("debug", "info", "warning", "error")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class FacetflowGroup(click.Group):
    "Reports usage errors with exit code 1, keeping 2 for solver nonconvergence"

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            e.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = 1
            raise


def exits_with_code(command):
    "Turns the return value of a command into its exit code, errors into theirs"

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            code = command(*args, **kwargs)
        except FacetflowError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
        sys.exit(code)

    return wrapper


@click.group(cls=FacetflowGroup, help="Regularised parabolic (1,p)-Laplace laboratory")
@click.option(
    "--loglevel",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="warning",
    help="level of the messages printed to stderr",
)
def cli(loglevel):
    logger.setLevel(loglevel.upper())
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)


def _parse_cylinder(ctx, param, value):
    if value is None:
        return None
    try:
        return float_list(value)
    except ValueError:
        raise click.BadParameter(f"'{value}' is not a comma-separated list of numbers")


config_option = click.option(
    "--config",
    "config_path",
    required=True,
    help="path to the INI file of the experiment",
)

runs_dir_option = click.option(
    "--runs-dir",
    default="runs",
    show_default=True,
    help="directory the run directories are created in",
)


@cli.command(
    help="""Solves the configured problem at the eps of [mollifier] and writes
manifest.json, series.csv and snapshot_<k>.csv to <runs-dir>/<name>"""
)
@config_option
@runs_dir_option
@exits_with_code
def solve(config_path, runs_dir):
    return cmd_solve(parse_config(config_path), Path(runs_dir))


@cli.command(
    help="""Solves the problem once per entry of [experiment] eps_list and writes the
runs, the gradient difference matrix and the sweep reports to <runs-dir>/<name>"""
)
@config_option
@runs_dir_option
@exits_with_code
def sweep(config_path, runs_dir):
    return cmd_sweep(parse_config(config_path), Path(runs_dir))


@cli.command(
    help="""Runs the sampling certificates of the structural inequalities
(structure), of the composite functions (composites) or of the iteration lemmata
(lemmas). Exits with 3 if any of them fails.

WHICH is one of structure, composites or lemmas"""
)
@click.argument("which", type=click.Choice(VERIFY_TARGETS))
@config_option
@click.option("--seed", type=int, default=None, help="overrides [experiment] seed")
@click.option(
    "--out",
    default=None,
    help="directory of report.csv/report.json [runs/<name>/verify_<which>]",
)
@exits_with_code
def verify(which, config_path, seed, out):
    return cmd_verify(
        parse_config(config_path), which, seed, Path(out) if out else None
    )


@cli.command(
    help="""Runs the regularity checks on a stored run, or on every run of a stored
sweep, and writes report.csv and report.json. Settings not given on the command
line are taken from the configuration stored with the runs. Exits with 3 if any
check fails."""
)
@click.option("--run", "run_dir", required=True, help="run or sweep directory")
@click.option("--delta", type=float, default=None, help="truncation level")
@click.option(
    "--cylinder",
    default=None,
    callback=_parse_cylinder,
    help="comma-separated cx[,cy[,cz]],ct,R",
)
@click.option("--s", "s", type=float, default=None, help="exponent of the sup estimate")
@click.option("--q", "q", type=float, default=None, help="exponent of the V estimates")
@click.option("--seed", type=int, default=None, help="seed of the Hölder pair sample")
@click.option("--pairs", type=int, default=None, help="number of Hölder pairs")
@click.option("--out", default=None, help="directory of the reports [the run dir]")
@exits_with_code
def analyze(run_dir, delta, cylinder, s, q, seed, pairs, out):
    params = {
        "delta": delta,
        "cylinder": cylinder,
        "s": s,
        "q": q,
        "seed": seed,
        "pairs": pairs,
    }
    return cmd_analyze(Path(run_dir), params, Path(out) if out else None)


if __name__ == "__main__":
    cli()
