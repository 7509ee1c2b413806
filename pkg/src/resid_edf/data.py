#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import enum
import math
import os

import attr
import numpy as np
import pandas as pd
from commoncode import fileutils
from scipy import special
from scipy import stats

from resid_edf.smoother import MarSample

"""
Synthetic samples for the simulation design: a fixed regression function,
uniform covariates on (-1, 1), a logistic response propensity and one of
several zero mean error laws.

Every sample is drawn from its own numpy SeedSequence keyed by a master seed
and a spawn key, so that replicate streams are independent of execution
order. The covariates, errors and missingness indicators each use their own
child stream: the indicators can be regenerated from the seed and the
covariates alone.
"""

COVARIATE_LOW = -1.0
COVARIATE_HIGH = 1.0
COVARIATE_BOX = ((COVARIATE_LOW, COVARIATE_HIGH),)

# child stream positions within a sample SeedSequence
COVARIATE_STREAM = 0
ERROR_STREAM = 1
INDICATOR_STREAM = 2


class SampleFormatError(Exception):
    pass


class ErrorLaw(enum.Enum):
    """
    Error distributions of the simulation design. All have mean zero; all but
    NORMAL_1 have variance 2.
    """

    NORMAL_1 = "n01"
    NORMAL_2 = "n02"
    CHISQ1_CENTERED = "chisq1"
    T4 = "t4"
    LAPLACE = "laplace"

    @property
    def variance(self):
        return 1.0 if self is ErrorLaw.NORMAL_1 else 2.0

    @classmethod
    def from_code(cls, code):
        try:
            return cls(code.strip().lower())
        except ValueError:
            known = ", ".join(law.value for law in cls)
            raise ValueError(f"Unknown error law: {code!r}. Use one of: {known}")

    @property
    def distribution(self):
        """
        Return a frozen scipy.stats distribution of this law.
        """
        if self is ErrorLaw.NORMAL_1:
            return stats.norm(loc=0.0, scale=1.0)
        if self is ErrorLaw.NORMAL_2:
            return stats.norm(loc=0.0, scale=math.sqrt(2.0))
        if self is ErrorLaw.CHISQ1_CENTERED:
            return stats.chi2(1.0, loc=-1.0)
        if self is ErrorLaw.T4:
            return stats.t(4.0)
        return stats.laplace(loc=0.0, scale=1.0)

    def draw(self, rng, size):
        """
        Return an array of `size` errors drawn with the numpy Generator `rng`.
        """
        if self is ErrorLaw.NORMAL_1:
            return rng.normal(0.0, 1.0, size)
        if self is ErrorLaw.NORMAL_2:
            return rng.normal(0.0, math.sqrt(2.0), size)
        if self is ErrorLaw.CHISQ1_CENTERED:
            return rng.chisquare(1.0, size) - 1.0
        if self is ErrorLaw.T4:
            return rng.standard_t(4.0, size)
        # Laplace with scale b has variance 2 b^2
        return rng.laplace(0.0, 1.0, size)


def regression_truth(x):
    """
    Return r(x) = x^3 - x^2 + x + cos(3 pi x / 2) for a number or an array.

    >>> regression_truth(0.0)
    1.0
    """
    x = np.asarray(x, dtype=float)
    value = x ** 3 - x ** 2 + x + np.cos(1.5 * np.pi * x)
    return float(value) if value.ndim == 0 else value


def propensity(x):
    """
    Return the logistic response probability 1 / (1 + exp(-x)).

    >>> propensity(0.0)
    0.5
    """
    value = special.expit(np.asarray(x, dtype=float))
    return float(value) if value.ndim == 0 else value


def _check_constant_propensity(instance, attribute, value):
    if value is not None and not 0.0 < value <= 1.0:
        raise ValueError(f"A constant response probability must be in (0, 1], not {value!r}")


@attr.attributes(frozen=True)
class SimDesign:
    n = attr.ib(
        type=int,
        metadata=dict(help="Sample size."),
    )

    error_law = attr.ib(
        default=ErrorLaw.NORMAL_1,
        converter=lambda v: v if isinstance(v, ErrorLaw) else ErrorLaw.from_code(v),
        metadata=dict(help="ErrorLaw of the regression errors."),
    )

    seed = attr.ib(
        type=int,
        default=0,
        metadata=dict(help="Master seed, a nonnegative 64-bit integer."),
    )

    spawn_key = attr.ib(
        default=(),
        converter=tuple,
        metadata=dict(
            help="Tuple of nonnegative integers identifying this sample stream "
            "under the master seed, such as (table, cell, replicate)."
        ),
    )

    response_probability = attr.ib(
        default=None,
        validator=_check_constant_propensity,
        metadata=dict(
            help="Optional constant response probability overriding the logistic "
            "propensity. Use 1 to observe every response."
        ),
    )

    @n.validator
    def _check_n(self, attribute, value):
        if value < 1:
            raise ValueError(f"Sample size must be >= 1, not {value!r}")

    @seed.validator
    def _check_seed(self, attribute, value):
        if value < 0:
            raise ValueError(f"Seed must be >= 0, not {value!r}")

    def seed_sequence(self):
        return np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)

    def streams(self):
        """
        Return a list of independent numpy Generators: covariates, errors and
        indicators.
        """
        return [np.random.default_rng(child) for child in self.seed_sequence().spawn(3)]

    def response_probabilities(self, x):
        x = np.asarray(x, dtype=float)
        if self.response_probability is not None:
            return np.full(x.shape, float(self.response_probability))
        return propensity(x)


def draw_indicators(design, x):
    """
    Return the array of missingness indicators of `design` for covariates
    `x`, using only the design seed and the covariates.
    """
    x = np.asarray(x, dtype=float).ravel()
    rng = design.streams()[INDICATOR_STREAM]
    uniforms = rng.random(x.size)
    return (uniforms < design.response_probabilities(x)).astype(int)


def generate(design):
    """
    Return a MarSample of `design.n` rows: X ~ U(-1, 1), Y = r(X) + eps with
    eps from the design error law, and delta ~ Bernoulli(pi(X)). The
    responses with delta = 0 are missing. The sample is a function of the
    design alone.
    """
    sample, _errors = generate_with_errors(design)
    return sample


def generate_with_errors(design):
    """
    Return a tuple of (MarSample, errors) where `errors` is the array of all
    true errors, including those of the rows with a missing response.
    """
    streams = design.streams()
    x = streams[COVARIATE_STREAM].uniform(COVARIATE_LOW, COVARIATE_HIGH, design.n)
    errors = design.error_law.draw(streams[ERROR_STREAM], design.n)
    delta = draw_indicators(design, x)
    y = regression_truth(x) + errors
    y = np.where(delta == 1, y, np.nan)
    sample = MarSample(x=x, y=y, delta=delta, box=COVARIATE_BOX)
    return sample, errors


def create_parent_directory(location):
    """
    Create the parent directories of the output file at `location` if needed.
    """
    fileutils.create_dir(os.path.dirname(os.path.abspath(location)))


def sample_columns(dimension):
    return [f"x{i}" for i in range(1, dimension + 1)] + ["y", "delta"]


def write_sample(sample, location, comment=None):
    """
    Write `sample` as CSV to `location` with a `x1,...,xm,y,delta` header,
    missing responses as empty fields. An optional `comment` is written first
    as a `#` line.
    """
    frame = pd.DataFrame(sample.x, columns=sample_columns(sample.dimension)[:-2])
    frame["y"] = sample.y
    frame["delta"] = sample.delta
    create_parent_directory(location)
    with open(location, "w", encoding="utf-8", newline="") as output:
        if comment:
            output.write(f"# {comment}\n")
        frame.to_csv(output, index=False, na_rep="", lineterminator="\n")


def read_sample(location, box=None):
    """
    Return a MarSample loaded from the CSV file at `location`. Raise a
    SampleFormatError if the file does not follow the sample CSV contract.
    """
    try:
        frame = pd.read_csv(location, comment="#", encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SampleFormatError(f"Cannot parse sample CSV {location!r}: {e}") from e

    columns = list(frame.columns)
    dimension = len(columns) - 2
    if dimension < 1 or columns != sample_columns(dimension):
        raise SampleFormatError(
            f"Invalid sample header {columns!r}: expected x1,...,xm,y,delta"
        )

    covariate_columns = columns[:-2]
    try:
        x = frame[covariate_columns].to_numpy(dtype=float)
        y = frame["y"].to_numpy(dtype=float)
        delta = frame["delta"].to_numpy()
    except ValueError as e:
        raise SampleFormatError(f"Non numeric values in {location!r}: {e}") from e

    if np.isnan(x).any():
        raise SampleFormatError(f"Missing covariate values in {location!r}")
    if not np.isin(delta, (0, 1)).all():
        raise SampleFormatError(f"delta must be 0 or 1 in {location!r}")
    delta = delta.astype(int)
    if not (np.isnan(y) == (delta == 0)).all():
        raise SampleFormatError(
            f"A response must be empty exactly when delta is 0 in {location!r}"
        )
    return MarSample(x=x, y=y, delta=delta, box=box)
