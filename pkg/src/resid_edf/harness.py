#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import enum
import json
import math
import os

import attr
import pandas as pd
from joblib import Parallel
from joblib import delayed

from resid_edf.asymptotics import EfficiencyContext
from resid_edf.asymptotics import IntegrationError
from resid_edf.asymptotics import asym_variance_F
from resid_edf.asymptotics import e_delta_uniform_logistic
from resid_edf.asymptotics import laplace_law
from resid_edf.asymptotics import normal_law
from resid_edf.asymptotics import student_law
from resid_edf.data import COVARIATE_HIGH
from resid_edf.data import COVARIATE_LOW
from resid_edf.data import ErrorLaw
from resid_edf.data import SimDesign
from resid_edf.data import create_parent_directory
from resid_edf.data import generate_with_errors
from resid_edf.edf import FULL_IMPUTATION
from resid_edf.edf import IMPUTATIONS
from resid_edf.edf import EdfEstimate
from resid_edf.edf import EmptySampleError
from resid_edf.edf import expansion_remainder
from resid_edf.edf import tuned_residuals
from resid_edf.normtest import DEFAULT_ALPHA
from resid_edf.normtest import NormTestError
from resid_edf.normtest import t_statistic
from resid_edf.polybasis import BasisSpec
from resid_edf.smoother import BANDWIDTH_SCALE
from resid_edf.smoother import SmootherError
from resid_edf.smoother import bandwidth_rule
from resid_edf.smoother import fit_local_poly
from resid_edf.smoother import residuals_complete_case

"""
Monte Carlo driver for the simulation tables:

- the MSE table: n MSE of the complete case and tuned estimators of the
  error distribution function at a few points, with the asymptotic variance
  as a final "true" row.

- the power table: rejection rates of the normality test on complete case
  and on adjusted residuals for several error laws.

- the expansion table: mean sup-norm remainder of the linear expansion of
  the complete case estimator.

Every replicate draws its sample from a seed sequence keyed by the master
seed, the table, the error law, the sample size and the replicate index:
adding a cell never changes another cell, and the results do not depend on
the number of parallel workers.
"""

TRACE = os.environ.get("RESID_EDF_TRACE", False)


def logger_debug(*args):
    pass


if TRACE:
    import logging
    import sys

    logger = logging.getLogger(__name__)
    logging.basicConfig(stream=sys.stdout)
    logger.setLevel(logging.DEBUG)

    def logger_debug(*args):
        return logger.debug(" ".join(isinstance(a, str) and a or repr(a) for a in args))


DEGREE = 1

DEFAULT_SAMPLE_SIZES = (50, 250, 1000)
LARGE_SAMPLE_SIZE = 10_000
DEFAULT_EVAL_POINTS = (-1.5, -1.0, 0.0, 1.0, 1.5)
DEFAULT_RUNS = 1000

DEFAULT_POWER_LAWS = ("n02", "chisq1", "t4", "laplace")
DEFAULT_POWER_SAMPLE_SIZES = (50, 200)

DEFAULT_EXPANSION_SAMPLE_SIZES = (250, 1000)
DEFAULT_EXPANSION_RUNS = 200

MAX_FAILURE_RATE = 0.05

# first spawn key entry of each table
MSE_TABLE = 1
POWER_TABLE = 2


class HarnessError(Exception):
    pass


class ConfigError(HarnessError):
    pass


class TooManyFailuresError(HarnessError):
    pass


class Output(enum.Enum):
    EDF_CC = "edf_cc"
    EDF_TUNED = "edf_tuned"
    TEST_CC = "test_cc"
    TEST_TUNED = "test_tuned"
    EXPANSION = "expansion"


MSE_OUTPUTS = frozenset([Output.EDF_CC, Output.EDF_TUNED])
POWER_OUTPUTS = frozenset([Output.TEST_CC, Output.TEST_TUNED])
EXPANSION_OUTPUTS = frozenset([Output.EDF_CC, Output.EXPANSION])


def law_spec(error_law):
    """
    Return the asymptotics ErrorLawSpec of an ErrorLaw or None when the law
    has no finite Fisher information.
    """
    error_law = ErrorLaw.from_code(error_law) if isinstance(error_law, str) else error_law
    if error_law is ErrorLaw.NORMAL_1:
        return normal_law(1.0)
    if error_law is ErrorLaw.NORMAL_2:
        return normal_law(2.0)
    if error_law is ErrorLaw.T4:
        return student_law(4.0)
    if error_law is ErrorLaw.LAPLACE:
        return laplace_law(1.0)
    return None


def design_bandwidth(n, scale=BANDWIDTH_SCALE):
    """
    Return the bandwidth of the simulation design for sample size `n`: the
    bandwidth rule applies on the covariate scale, so it is divided by the
    width of the covariate interval to act on the unit cube.

    >>> round(design_bandwidth(50), 5)
    0.16712
    >>> design_bandwidth(50) == bandwidth_rule(50, 0.625)
    True
    """
    return bandwidth_rule(n, scale) / (COVARIATE_HIGH - COVARIATE_LOW)


def _to_error_law(value):
    try:
        return value if isinstance(value, ErrorLaw) else ErrorLaw.from_code(value)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _to_error_laws(values):
    return tuple(_to_error_law(v) for v in values)


def _to_ints(values):
    return tuple(int(v) for v in values)


def _to_floats(values):
    return tuple(float(v) for v in values)


def _check_runs(instance, attribute, value):
    if value < 1:
        raise ConfigError(f"{attribute.name} must be >= 1, not {value!r}")


def _check_scale(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be > 0, not {value!r}")


def _check_seed(instance, attribute, value):
    if value < 0:
        raise ConfigError(f"{attribute.name} must be >= 0, not {value!r}")


def _check_nonempty(instance, attribute, value):
    if not value:
        raise ConfigError(f"{attribute.name} must not be empty")


def _check_sample_sizes(instance, attribute, value):
    _check_nonempty(instance, attribute, value)
    smallest = 2 * BasisSpec(degree=instance.degree, dimension=1).size
    for n in value:
        if n < smallest:
            raise ConfigError(f"Sample size {n} is below twice the basis size: {smallest}")


def _check_imputation(instance, attribute, value):
    if value not in IMPUTATIONS:
        raise ConfigError(f"Unknown imputation: {value!r}. Use one of: {IMPUTATIONS}")


def _check_alpha(instance, attribute, value):
    if not 0.0 < value < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), not {value!r}")


def _serialize(instance, attribute, value):
    if isinstance(value, ErrorLaw):
        return value.value
    if isinstance(value, tuple):
        return [_serialize(instance, attribute, v) for v in value]
    return value


class ConfigMixin:
    def to_dict(self):
        return attr.asdict(self, value_serializer=_serialize)

    def describe(self):
        """
        Return a compact, stable, one line JSON description of this config.
        """
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


@attr.attributes(frozen=True)
class MseConfig(ConfigMixin):
    degree = attr.ib(
        default=DEGREE,
        converter=int,
        metadata=dict(help="Degree of the local polynomial smoother."),
    )

    sample_sizes = attr.ib(
        default=DEFAULT_SAMPLE_SIZES,
        converter=_to_ints,
        validator=_check_sample_sizes,
        metadata=dict(help="Sample sizes n, one table row each."),
    )

    eval_points = attr.ib(
        default=DEFAULT_EVAL_POINTS,
        converter=_to_floats,
        validator=_check_nonempty,
        metadata=dict(help="Points t where the error distribution function is estimated."),
    )

    runs = attr.ib(
        default=DEFAULT_RUNS,
        converter=int,
        validator=_check_runs,
        metadata=dict(help="Number of Monte Carlo replicates per sample size."),
    )

    seed = attr.ib(
        default=0,
        converter=int,
        validator=_check_seed,
        metadata=dict(help="Master seed."),
    )

    bandwidth_scale = attr.ib(
        default=BANDWIDTH_SCALE,
        converter=float,
        validator=_check_scale,
        metadata=dict(help="Scale of the bandwidth rule."),
    )

    error_law = attr.ib(
        default=ErrorLaw.NORMAL_1,
        converter=_to_error_law,
        metadata=dict(help="ErrorLaw of the regression errors."),
    )

    imputation = attr.ib(
        default=FULL_IMPUTATION,
        validator=_check_imputation,
        metadata=dict(help="Imputation of the tuned estimator: full or partial."),
    )

    def with_large(self):
        """
        Return a copy of this config with the large sample size row added.
        """
        if LARGE_SAMPLE_SIZE in self.sample_sizes:
            return self
        return attr.evolve(self, sample_sizes=self.sample_sizes + (LARGE_SAMPLE_SIZE,))

    def settings(self):
        return ReplicateSettings(
            degree=self.degree,
            bandwidth_scale=self.bandwidth_scale,
            eval_points=self.eval_points,
            imputation=self.imputation,
        )


@attr.attributes(frozen=True)
class PowerConfig(ConfigMixin):
    degree = attr.ib(
        default=DEGREE,
        converter=int,
        metadata=dict(help="Degree of the local polynomial smoother."),
    )

    error_laws = attr.ib(
        default=DEFAULT_POWER_LAWS,
        converter=_to_error_laws,
        validator=_check_nonempty,
        metadata=dict(help="Error laws, one table block each. Normal laws give the level."),
    )

    sample_sizes = attr.ib(
        default=DEFAULT_POWER_SAMPLE_SIZES,
        converter=_to_ints,
        validator=_check_sample_sizes,
        metadata=dict(help="Sample sizes n, one table row each."),
    )

    runs = attr.ib(
        default=DEFAULT_RUNS,
        converter=int,
        validator=_check_runs,
        metadata=dict(help="Number of Monte Carlo replicates per cell."),
    )

    alpha = attr.ib(
        default=DEFAULT_ALPHA,
        converter=float,
        validator=_check_alpha,
        metadata=dict(help="Level of the tests."),
    )

    seed = attr.ib(
        default=0,
        converter=int,
        validator=_check_seed,
        metadata=dict(help="Master seed."),
    )

    bandwidth_scale = attr.ib(
        default=BANDWIDTH_SCALE,
        converter=float,
        validator=_check_scale,
        metadata=dict(help="Scale of the bandwidth rule."),
    )

    imputation = attr.ib(
        default=FULL_IMPUTATION,
        validator=_check_imputation,
        metadata=dict(help="Imputation of the adjusted residuals: full or partial."),
    )

    def settings(self):
        return ReplicateSettings(
            degree=self.degree,
            bandwidth_scale=self.bandwidth_scale,
            alpha=self.alpha,
            imputation=self.imputation,
        )


@attr.attributes(frozen=True)
class ExpansionConfig(ConfigMixin):
    degree = attr.ib(
        default=DEGREE,
        converter=int,
        metadata=dict(help="Degree of the local polynomial smoother."),
    )

    sample_sizes = attr.ib(
        default=DEFAULT_EXPANSION_SAMPLE_SIZES,
        converter=_to_ints,
        validator=_check_sample_sizes,
        metadata=dict(help="Sample sizes n, one table row each."),
    )

    runs = attr.ib(
        default=DEFAULT_EXPANSION_RUNS,
        converter=int,
        validator=_check_runs,
        metadata=dict(help="Number of Monte Carlo replicates per sample size."),
    )

    seed = attr.ib(
        default=0,
        converter=int,
        validator=_check_seed,
        metadata=dict(help="Master seed."),
    )

    bandwidth_scale = attr.ib(
        default=BANDWIDTH_SCALE,
        converter=float,
        validator=_check_scale,
        metadata=dict(help="Scale of the bandwidth rule."),
    )

    error_law = attr.ib(
        default=ErrorLaw.NORMAL_1,
        converter=_to_error_law,
        metadata=dict(help="ErrorLaw of the regression errors."),
    )

    def settings(self):
        return ReplicateSettings(degree=self.degree, bandwidth_scale=self.bandwidth_scale)


@attr.attributes(frozen=True)
class ReplicateSettings:
    degree = attr.ib(default=DEGREE)
    bandwidth_scale = attr.ib(default=BANDWIDTH_SCALE)
    eval_points = attr.ib(default=(), converter=_to_floats)
    alpha = attr.ib(default=DEFAULT_ALPHA)
    imputation = attr.ib(default=FULL_IMPUTATION)


@attr.attributes(frozen=True)
class ReplicateRecord:
    """
    The outcome of one Monte Carlo replicate. Fields for outputs that were
    not requested are None. A failed replicate has a `failure` message.
    """

    n = attr.ib()
    error_law = attr.ib()
    seed = attr.ib()
    spawn_key = attr.ib(converter=tuple)
    n_complete = attr.ib(default=None)
    cc_values = attr.ib(default=None)
    tuned_values = attr.ib(default=None)
    cc_statistic = attr.ib(default=None)
    cc_reject = attr.ib(default=None)
    tuned_statistic = attr.ib(default=None)
    tuned_reject = attr.ib(default=None)
    remainder = attr.ib(default=None)
    failure = attr.ib(default=None)

    @property
    def failed(self):
        return self.failure is not None

    def to_dict(self):
        return attr.asdict(self)


def run_single(seed, design, outputs=MSE_OUTPUTS, settings=None):
    """
    Return a ReplicateRecord for one sample generated from the SimDesign
    `design` under the master `seed`, computing the requested `outputs` (a
    set of Output) with ReplicateSettings `settings`. Module errors are
    recorded in the `failure` field rather than raised.
    """
    if settings is None:
        settings = ReplicateSettings()
    outputs = frozenset(outputs)
    design = attr.evolve(design, seed=seed)
    identity = dict(
        n=design.n,
        error_law=design.error_law.value,
        seed=seed,
        spawn_key=design.spawn_key,
    )
    results = {}
    try:
        sample, errors = generate_with_errors(design)
        results["n_complete"] = sample.n_complete
        bandwidth = design_bandwidth(design.n, settings.bandwidth_scale)

        if outputs & {Output.EDF_CC, Output.TEST_CC, Output.EXPANSION}:
            fit = fit_local_poly(sample, settings.degree, bandwidth=bandwidth)
            _index, residuals = residuals_complete_case(fit, sample)
            estimate = EdfEstimate.from_values(residuals)
            if Output.EDF_CC in outputs:
                results["cc_values"] = tuple(float(estimate(t)) for t in settings.eval_points)
            if Output.EXPANSION in outputs:
                results["remainder"] = expansion_remainder(
                    estimate, errors, sample.delta, design.error_law.distribution.pdf
                )
            if Output.TEST_CC in outputs:
                test = t_statistic(residuals, alpha=settings.alpha)
                results["cc_statistic"] = test.statistic
                results["cc_reject"] = test.reject

        if outputs & {Output.EDF_TUNED, Output.TEST_TUNED}:
            _index, adjusted = tuned_residuals(
                sample,
                settings.degree,
                first_bandwidth=bandwidth,
                imputation=settings.imputation,
            )
            if Output.EDF_TUNED in outputs:
                tuned = EdfEstimate.from_values(adjusted)
                results["tuned_values"] = tuple(float(tuned(t)) for t in settings.eval_points)
            if Output.TEST_TUNED in outputs:
                test = t_statistic(adjusted, alpha=settings.alpha)
                results["tuned_statistic"] = test.statistic
                results["tuned_reject"] = test.reject

    except (SmootherError, EmptySampleError, NormTestError) as e:
        failure = f"{type(e).__name__}: {e}"
        logger_debug("run_single: failed:", identity, failure)
        return ReplicateRecord(**identity, failure=failure)

    return ReplicateRecord(**identity, **results)


def mean_and_error(values):
    """
    Return a tuple of (mean, standard error of the mean) of `values` using
    exactly rounded sums.

    >>> mean_and_error([1.0, 2.0, 3.0])
    (2.0, 0.5773502691896257)
    """
    values = [float(v) for v in values]
    count = len(values)
    if not count:
        return math.nan, math.nan
    mean = math.fsum(values) / count
    if count < 2:
        return mean, math.nan
    variance = math.fsum((v - mean) ** 2 for v in values) / (count - 1)
    return mean, math.sqrt(variance / count)


def rate_and_error(decisions):
    """
    Return a tuple of (rate, binomial standard error) of boolean `decisions`.

    >>> rate_and_error([True, False, True, False])
    (0.5, 0.25)
    """
    count = len(decisions)
    if not count:
        return math.nan, math.nan
    rate = sum(bool(d) for d in decisions) / count
    return rate, math.sqrt(rate * (1.0 - rate) / count)


def check_failures(records, cell):
    """
    Return the number of failed `records` of a table `cell`. Raise a
    TooManyFailuresError if more than MAX_FAILURE_RATE of them failed.
    """
    failures = sum(1 for r in records if r.failed)
    if failures:
        logger_debug("check_failures:", cell, "failures:", failures, "of", len(records))
    if failures > MAX_FAILURE_RATE * len(records):
        first = next(r.failure for r in records if r.failed)
        raise TooManyFailuresError(
            f"{failures} of {len(records)} replicates failed for {cell}. First failure: {first}"
        )
    return failures


def run_replicates(designs, outputs, settings, seed, jobs=1):
    """
    Return the list of ReplicateRecord for each SimDesign of `designs`, in
    order, running up to `jobs` replicates in parallel.
    """
    if jobs == 1:
        return [run_single(seed, design, outputs, settings) for design in designs]
    return Parallel(n_jobs=jobs)(
        delayed(run_single)(seed, design, outputs, settings) for design in designs
    )


def _law_key(error_law):
    return list(ErrorLaw).index(error_law)


def _design(table, error_law, n, replicate, seed):
    return SimDesign(
        n=n,
        error_law=error_law,
        seed=seed,
        spawn_key=(table, _law_key(error_law), n, replicate),
    )


def get_version():
    try:
        from importlib.metadata import version

        return version("resid-edf")
    except Exception:
        return "unknown"


@attr.attributes(frozen=True)
class TableReport:
    """
    A simulation table: named columns, ordered rows, and a comment line that
    records the version, seed and config that produced it.
    """

    name = attr.ib(
        metadata=dict(help="Table name: mse, power or expansion."),
    )

    columns = attr.ib(
        converter=tuple,
        metadata=dict(help="Column names."),
    )

    rows = attr.ib(
        converter=tuple,
        repr=False,
        metadata=dict(help="Tuple of row tuples, in the order of `columns`."),
    )

    seed = attr.ib(
        metadata=dict(help="Master seed."),
    )

    config = attr.ib(
        metadata=dict(help="One line description of the config."),
    )

    @property
    def comment(self):
        return f"resid-edf {get_version()} table={self.name} seed={self.seed} config={self.config}"

    def to_frame(self):
        return pd.DataFrame.from_records(list(self.rows), columns=list(self.columns))

    def to_csv(self, location):
        """
        Write this table as CSV at `location` with a leading `#` comment line.
        """
        create_parent_directory(location)
        with open(location, "w", encoding="utf-8", newline="") as output:
            output.write(f"# {self.comment}\n")
            self.to_frame().to_csv(output, index=False, float_format="%.6f", lineterminator="\n")

    def value(self, column, **where):
        """
        Return the `column` value of the single row whose columns match all
        the `where` keyword values.
        """
        positions = {name: i for i, name in enumerate(self.columns)}
        matches = [
            row for row in self.rows
            if all(row[positions[key]] == expected for key, expected in where.items())
        ]
        if len(matches) != 1:
            raise KeyError(f"{len(matches)} rows match {where!r} in table {self.name}")
        return matches[0][positions[column]]


MSE_COLUMNS = ("row", "t", "cc", "cc_se", "tuned", "tuned_se", "runs", "failures")


def run_mse(cfg, jobs=1):
    """
    Return the MSE TableReport for the MseConfig `cfg`: for each sample size
    n and point t, the Monte Carlo mean of n (F(t) estimate - F(t))^2 for the
    complete case and the tuned estimators computed on the same samples,
    followed by a "true" row of asymptotic variances.
    """
    settings = cfg.settings()
    distribution = cfg.error_law.distribution
    truth = [float(distribution.cdf(t)) for t in cfg.eval_points]

    rows = []
    for n in cfg.sample_sizes:
        designs = [_design(MSE_TABLE, cfg.error_law, n, r, cfg.seed) for r in range(cfg.runs)]
        records = run_replicates(designs, MSE_OUTPUTS, settings, cfg.seed, jobs=jobs)
        failures = check_failures(records, f"n={n}")
        kept = [r for r in records if not r.failed]
        for k, t in enumerate(cfg.eval_points):
            cc = mean_and_error([n * (r.cc_values[k] - truth[k]) ** 2 for r in kept])
            tuned = mean_and_error([n * (r.tuned_values[k] - truth[k]) ** 2 for r in kept])
            rows.append((str(n), t, *cc, *tuned, len(kept), failures))

    if law_spec(cfg.error_law) is not None:
        for t, true_variance in zip(cfg.eval_points, true_row(cfg.eval_points, cfg.error_law)):
            rows.append(("true", t, true_variance, 0.0, true_variance, 0.0, 0, 0))

    return TableReport(name="mse", columns=MSE_COLUMNS, rows=rows, seed=cfg.seed, config=cfg.describe())


POWER_COLUMNS = ("law", "n", "cc", "cc_se", "tuned", "tuned_se", "runs", "failures")


def run_power(cfg, jobs=1):
    """
    Return the power TableReport for the PowerConfig `cfg`: for each error
    law and sample size, the rejection rates at level alpha of the normality
    test on complete case residuals and on adjusted residuals.
    """
    settings = cfg.settings()
    rows = []
    for error_law in cfg.error_laws:
        for n in cfg.sample_sizes:
            designs = [_design(POWER_TABLE, error_law, n, r, cfg.seed) for r in range(cfg.runs)]
            records = run_replicates(designs, POWER_OUTPUTS, settings, cfg.seed, jobs=jobs)
            failures = check_failures(records, f"law={error_law.value} n={n}")
            kept = [r for r in records if not r.failed]
            cc = rate_and_error([r.cc_reject for r in kept])
            tuned = rate_and_error([r.tuned_reject for r in kept])
            rows.append((error_law.value, n, *cc, *tuned, len(kept), failures))

    return TableReport(name="power", columns=POWER_COLUMNS, rows=rows, seed=cfg.seed, config=cfg.describe())


EXPANSION_COLUMNS = ("n", "remainder", "remainder_se", "runs", "failures")


def run_expansion(cfg, jobs=1):
    """
    Return the expansion TableReport for the ExpansionConfig `cfg`: for each
    sample size, the Monte Carlo mean of the sup-norm remainder of the linear
    expansion of the complete case estimator. The replicate samples are those
    of the MSE table with the same seed.
    """
    settings = cfg.settings()
    rows = []
    for n in cfg.sample_sizes:
        designs = [_design(MSE_TABLE, cfg.error_law, n, r, cfg.seed) for r in range(cfg.runs)]
        records = run_replicates(designs, EXPANSION_OUTPUTS, settings, cfg.seed, jobs=jobs)
        failures = check_failures(records, f"n={n}")
        kept = [r for r in records if not r.failed]
        remainder = mean_and_error([r.remainder for r in kept])
        rows.append((n, *remainder, len(kept), failures))

    return TableReport(
        name="expansion",
        columns=EXPANSION_COLUMNS,
        rows=rows,
        seed=cfg.seed,
        config=cfg.describe(),
    )


def true_row(eval_points=DEFAULT_EVAL_POINTS, error_law=ErrorLaw.NORMAL_1, e_delta=None):
    """
    Return a list of asymptotic variances of the complete case estimator at
    `eval_points`.
    """
    law = law_spec(_to_error_law(error_law))
    if law is None:
        raise ConfigError(f"No efficiency oracle for error law {error_law!r}")
    if e_delta is None:
        e_delta = e_delta_uniform_logistic()
    ctx = EfficiencyContext(law=law, e_delta=e_delta)
    try:
        return [asym_variance_F(ctx, t) for t in eval_points]
    except IntegrationError as e:
        raise HarnessError(str(e)) from e
