#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import json
import sys

import click
import numpy as np
import pandas as pd

from resid_edf.asymptotics import IntegrationError
from resid_edf.data import SampleFormatError
from resid_edf.data import create_parent_directory
from resid_edf.data import read_sample
from resid_edf.edf import FULL_IMPUTATION
from resid_edf.edf import IMPUTATIONS
from resid_edf.edf import EmptySampleError
from resid_edf.edf import edf_complete_case
from resid_edf.edf import edf_tuned
from resid_edf.edf import tuned_residuals
from resid_edf.harness import DEFAULT_EVAL_POINTS
from resid_edf.harness import DEFAULT_EXPANSION_RUNS
from resid_edf.harness import DEFAULT_EXPANSION_SAMPLE_SIZES
from resid_edf.harness import DEFAULT_POWER_LAWS
from resid_edf.harness import DEFAULT_POWER_SAMPLE_SIZES
from resid_edf.harness import DEFAULT_RUNS
from resid_edf.harness import DEFAULT_SAMPLE_SIZES
from resid_edf.harness import DEGREE
from resid_edf.harness import ExpansionConfig
from resid_edf.harness import HarnessError
from resid_edf.harness import MseConfig
from resid_edf.harness import PowerConfig
from resid_edf.harness import get_version
from resid_edf.harness import run_expansion
from resid_edf.harness import run_mse
from resid_edf.harness import run_power
from resid_edf.normtest import DEFAULT_ALPHA
from resid_edf.normtest import NormTestError
from resid_edf.normtest import t_statistic
from resid_edf.smoother import BANDWIDTH_SCALE
from resid_edf.smoother import SmootherError
from resid_edf.smoother import evaluate_many
from resid_edf.smoother import fit_local_poly
from resid_edf.smoother import residuals_complete_case

"""
Command line interface: run the simulation tables and apply the smoother,
the estimators and the normality test to a sample CSV file.
"""

SEED_ENVVAR = "RESID_EDF_SEED"

# normtest exit codes
EXIT_RETAIN = 0
EXIT_REJECT = 1
EXIT_ERROR = 2

LIBRARY_ERRORS = (
    HarnessError,
    SmootherError,
    SampleFormatError,
    EmptySampleError,
    NormTestError,
    IntegrationError,
    ValueError,
)


class CommaSeparatedType(click.ParamType):
    """
    A comma-separated list of values of an item type such as `int` or
    `float`, returned as a tuple.
    """

    def __init__(self, item_type, name):
        self.item_type = item_type
        self.name = name

    def convert(self, value, param, ctx):
        if isinstance(value, (tuple, list)):
            return tuple(value)
        try:
            return tuple(self.item_type(v.strip()) for v in value.split(",") if v.strip())
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of {self.name}", param, ctx)


INTEGERS = CommaSeparatedType(int, "integers")
FLOATS = CommaSeparatedType(float, "numbers")
CODES = CommaSeparatedType(str, "codes")


class BandwidthType(click.ParamType):
    """
    A positive bandwidth or `auto` for the bandwidth rule, returned as None.
    """

    name = "bandwidth"

    def convert(self, value, param, ctx):
        if value is None or (isinstance(value, str) and value.strip().lower() == "auto"):
            return None
        try:
            bandwidth = float(value)
        except ValueError:
            self.fail(f"{value!r} is neither 'auto' nor a number", param, ctx)
        if not bandwidth > 0:
            self.fail(f"bandwidth must be > 0, not {bandwidth}", param, ctx)
        return bandwidth


def comment_line(command, seed=None, **config):
    """
    Return a one line description of a CLI output with the version, seed and
    config.
    """
    described = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return f"resid-edf {get_version()} command={command} seed={seed} config={described}"


def write_frame(frame, location, comment):
    create_parent_directory(location)
    with open(location, "w", encoding="utf-8", newline="") as output:
        output.write(f"# {comment}\n")
        frame.to_csv(output, index=False, float_format="%.6f", lineterminator="\n")


seed_option = click.option(
    "--seed",
    type=int,
    default=0,
    envvar=SEED_ENVVAR,
    show_default=True,
    show_envvar=True,
    help="Master seed of the simulation.",
)

jobs_option = click.option(
    "-j",
    "--jobs",
    type=int,
    default=1,
    show_default=True,
    help="Number of parallel workers. Results do not depend on it.",
)

out_option = click.option(
    "-o",
    "--out",
    type=click.Path(dir_okay=False, writable=True, path_type=str),
    required=True,
    help="Path to the output CSV file.",
)

data_option = click.option(
    "-d",
    "--data",
    type=click.Path(exists=True, readable=True, dir_okay=False, path_type=str),
    required=True,
    help="Path to a sample CSV file with x1,...,xm,y,delta columns.",
)

degree_option = click.option(
    "--degree",
    type=click.IntRange(min=0),
    default=DEGREE,
    show_default=True,
    help="Degree of the local polynomial smoother.",
)

bandwidth_option = click.option(
    "--bandwidth",
    type=BandwidthType(),
    default="auto",
    show_default=True,
    help="Bandwidth on the unit scale or 'auto' for 1.25 (n log n)^-1/4.",
)

imputation_option = click.option(
    "--imputation",
    type=click.Choice(IMPUTATIONS),
    default=FULL_IMPUTATION,
    show_default=True,
    help="Imputation of the missing responses for the tuned estimator.",
)


@click.group()
@click.version_option(version=get_version(), prog_name="resid-edf")
@click.help_option("-h", "--help")
def cli():
    """
    Estimate the error distribution in nonparametric regression with
    responses missing at random.
    """


@cli.command()
@click.option("--n", "sample_sizes", type=INTEGERS, default=",".join(map(str, DEFAULT_SAMPLE_SIZES)), show_default=True, help="Comma-separated sample sizes.")
@click.option("--t", "eval_points", type=FLOATS, default=",".join(map(str, DEFAULT_EVAL_POINTS)), show_default=True, help="Comma-separated evaluation points.")
@click.option("--runs", type=int, default=DEFAULT_RUNS, show_default=True, help="Replicates per sample size.")
@click.option("--law", type=str, default="n01", show_default=True, help="Error law code.")
@click.option("--bandwidth-scale", type=float, default=BANDWIDTH_SCALE, show_default=True, help="Scale of the bandwidth rule.")
@click.option("--large", is_flag=True, help="Add the n=10000 row.")
@imputation_option
@seed_option
@jobs_option
@out_option
@click.help_option("-h", "--help")
def mse(sample_sizes, eval_points, runs, law, bandwidth_scale, large, imputation, seed, jobs, out):
    """
    Tabulate n MSE of the complete case and tuned estimators of the error
    distribution function, with the asymptotic variance as the last row.
    """
    try:
        cfg = MseConfig(
            sample_sizes=sample_sizes,
            eval_points=eval_points,
            runs=runs,
            seed=seed,
            bandwidth_scale=bandwidth_scale,
            error_law=law,
            imputation=imputation,
        )
        if large:
            cfg = cfg.with_large()
        report = run_mse(cfg, jobs=jobs)
    except LIBRARY_ERRORS as e:
        raise click.ClickException(str(e))
    report.to_csv(out)


@cli.command()
@click.option("--laws", "error_laws", type=CODES, default=",".join(DEFAULT_POWER_LAWS), show_default=True, help="Comma-separated error law codes.")
@click.option("--n", "sample_sizes", type=INTEGERS, default=",".join(map(str, DEFAULT_POWER_SAMPLE_SIZES)), show_default=True, help="Comma-separated sample sizes.")
@click.option("--runs", type=int, default=DEFAULT_RUNS, show_default=True, help="Replicates per cell.")
@click.option("--alpha", type=float, default=DEFAULT_ALPHA, show_default=True, help="Level of the tests.")
@click.option("--bandwidth-scale", type=float, default=BANDWIDTH_SCALE, show_default=True, help="Scale of the bandwidth rule.")
@imputation_option
@seed_option
@jobs_option
@out_option
@click.help_option("-h", "--help")
def power(error_laws, sample_sizes, runs, alpha, bandwidth_scale, imputation, seed, jobs, out):
    """
    Tabulate the rejection rates of the normality test on complete case and
    adjusted residuals.
    """
    try:
        cfg = PowerConfig(
            error_laws=error_laws,
            sample_sizes=sample_sizes,
            runs=runs,
            alpha=alpha,
            seed=seed,
            bandwidth_scale=bandwidth_scale,
            imputation=imputation,
        )
        report = run_power(cfg, jobs=jobs)
    except LIBRARY_ERRORS as e:
        raise click.ClickException(str(e))
    report.to_csv(out)


@cli.command()
@click.option("--n", "sample_sizes", type=INTEGERS, default=",".join(map(str, DEFAULT_EXPANSION_SAMPLE_SIZES)), show_default=True, help="Comma-separated sample sizes.")
@click.option("--runs", type=int, default=DEFAULT_EXPANSION_RUNS, show_default=True, help="Replicates per sample size.")
@click.option("--law", type=str, default="n01", show_default=True, help="Error law code.")
@seed_option
@jobs_option
@out_option
@click.help_option("-h", "--help")
def expansion(sample_sizes, runs, law, seed, jobs, out):
    """
    Tabulate the mean sup-norm remainder of the linear expansion of the
    complete case estimator.
    """
    try:
        cfg = ExpansionConfig(sample_sizes=sample_sizes, runs=runs, seed=seed, error_law=law)
        report = run_expansion(cfg, jobs=jobs)
    except LIBRARY_ERRORS as e:
        raise click.ClickException(str(e))
    report.to_csv(out)


def fit_grid(box, size):
    """
    Return an (size^m, m) array of evenly spaced points covering the domain
    `box`, the first coordinate varying slowest.
    """
    axes = [np.linspace(lo, hi, size) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@cli.command()
@data_option
@degree_option
@bandwidth_option
@click.option("--grid", "grid_size", type=click.IntRange(min=2), default=201, show_default=True, help="Grid points per covariate.")
@out_option
@click.help_option("-h", "--help")
def fit(data, degree, bandwidth, grid_size, out):
    """
    Fit the complete case local polynomial smoother to a sample and write
    its values on a grid.
    """
    try:
        sample = read_sample(data)
        smoother = fit_local_poly(sample, degree, bandwidth=bandwidth)
        points = fit_grid(sample.box, grid_size)
        values = evaluate_many(smoother, points)
    except LIBRARY_ERRORS as e:
        raise click.ClickException(str(e))

    if sample.dimension == 1:
        columns = ["x"]
    else:
        columns = [f"x{i}" for i in range(1, sample.dimension + 1)]
    frame = pd.DataFrame(points, columns=columns)
    frame["rhat"] = values
    comment = comment_line("fit", data=data, degree=degree, bandwidth=smoother.bandwidth, grid=grid_size)
    write_frame(frame, out, comment)


@cli.command()
@data_option
@click.option("--tuned", is_flag=True, help="Use the tuned estimator on adjusted residuals.")
@degree_option
@bandwidth_option
@imputation_option
@out_option
@click.help_option("-h", "--help")
def edf(data, tuned, degree, bandwidth, imputation, out):
    """
    Estimate the error distribution function of a sample and write its jump
    points and values.
    """
    try:
        sample = read_sample(data)
        if tuned:
            estimate = edf_tuned(sample, degree, first_bandwidth=bandwidth, imputation=imputation)
        else:
            smoother = fit_local_poly(sample, degree, bandwidth=bandwidth)
            estimate = edf_complete_case(sample, smoother)
    except LIBRARY_ERRORS as e:
        raise click.ClickException(str(e))

    config = dict(data=data, tuned=tuned, degree=degree, bandwidth=bandwidth or "auto")
    if tuned:
        config["imputation"] = imputation
    estimate.to_csv(out, comment=comment_line("edf", **config))


@cli.command()
@data_option
@click.option("--alpha", type=float, default=DEFAULT_ALPHA, show_default=True, help="Level of the test.")
@click.option("--tuned", is_flag=True, help="Test the adjusted residuals of the tuned estimator.")
@degree_option
@bandwidth_option
@imputation_option
@click.help_option("-h", "--help")
@click.pass_context
def normtest(ctx, data, alpha, tuned, degree, bandwidth, imputation):
    """
    Test for normally distributed errors. Print a JSON summary and exit with
    0 if normality is retained, 1 if it is rejected and 2 on error.
    """
    try:
        if not 0.0 < alpha < 1.0:
            raise NormTestError(f"alpha must be in (0, 1), not {alpha!r}")
        sample = read_sample(data)
        if tuned:
            _index, residuals = tuned_residuals(
                sample, degree, first_bandwidth=bandwidth, imputation=imputation
            )
        else:
            smoother = fit_local_poly(sample, degree, bandwidth=bandwidth)
            _index, residuals = residuals_complete_case(smoother, sample)
        result = t_statistic(residuals, alpha=alpha)
    except LIBRARY_ERRORS as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_ERROR)

    click.echo(json.dumps(result.to_dict(), sort_keys=True))
    ctx.exit(EXIT_REJECT if result.reject else EXIT_RETAIN)


if __name__ == "__main__":
    sys.exit(cli())
