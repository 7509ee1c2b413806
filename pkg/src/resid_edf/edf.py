#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import math

import attr
import numpy as np
import pandas as pd

from resid_edf.data import create_parent_directory
from resid_edf.smoother import MarSample
from resid_edf.smoother import evaluate_many
from resid_edf.smoother import fit_local_poly
from resid_edf.smoother import residuals_complete_case

"""
Residual-based estimators of the error distribution with responses missing
at random.

- the complete case estimator: the empirical distribution function of the
  residuals Y_j - r_c(X_j) of the complete cases, where r_c is the complete
  case local polynomial smoother.

- the tuned estimator: impute every response from r_c, smooth the completed
  sample again and take the empirical distribution function of the adjusted
  residuals Y_j - r*(X_j) of the complete cases.
"""

FULL_IMPUTATION = "full"
PARTIAL_IMPUTATION = "partial"
IMPUTATIONS = FULL_IMPUTATION, PARTIAL_IMPUTATION

# points of the grid spanning the density between and around the jumps
EXPANSION_GRID_SIZE = 4001


class EmptySampleError(Exception):
    pass


@attr.attributes(frozen=True, eq=False)
class EdfEstimate:
    """
    A right-continuous step function putting mass 1/N on each of N values.
    Tied values share a single jump.
    """

    jumps = attr.ib(
        repr=False,
        metadata=dict(help="Sorted array of distinct jump points."),
    )

    values = attr.ib(
        repr=False,
        metadata=dict(help="Array of function values at and right of each jump point."),
    )

    n = attr.ib(
        metadata=dict(help="Number N of values, each carrying mass 1/N."),
    )

    @classmethod
    def from_values(cls, values):
        """
        Return an EdfEstimate of the array-like of residual `values`.
        """
        values = np.asarray(values, dtype=float).ravel()
        if not values.size:
            raise EmptySampleError("Cannot build an empirical distribution from no values.")
        if not np.isfinite(values).all():
            raise ValueError("Empirical distribution values must be finite.")
        ordered = np.sort(values, kind="stable")
        jumps, counts = np.unique(ordered, return_counts=True)
        return cls(jumps=jumps, values=np.cumsum(counts) / values.size, n=values.size)

    @property
    def masses(self):
        return np.diff(self.values, prepend=0.0)

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        """
        Return the value at `t` (a number or an array) by binary search over
        the jump points.
        """
        t = np.asarray(t, dtype=float)
        positions = np.searchsorted(self.jumps, t, side="right")
        padded = np.concatenate(([0.0], self.values))
        value = padded[positions]
        return float(value) if value.ndim == 0 else value

    def to_frame(self):
        return pd.DataFrame({"t": self.jumps, "F": self.values})

    def to_csv(self, location, comment=None):
        """
        Write the jump points and post-jump values as a `t,F` CSV file at
        `location`, with an optional leading `#` comment line.
        """
        create_parent_directory(location)
        with open(location, "w", encoding="utf-8", newline="") as output:
            if comment:
                output.write(f"# {comment}\n")
            self.to_frame().to_csv(output, index=False, lineterminator="\n")


def edf_complete_case(sample, fit):
    """
    Return the complete case EdfEstimate of the residuals of `sample` under
    the complete case SmootherFit `fit`.
    """
    if not sample.n_complete:
        raise EmptySampleError("No complete case in sample.")
    _index, residuals = residuals_complete_case(fit, sample)
    return EdfEstimate.from_values(residuals)


def tuned_residuals(
    sample,
    degree,
    kern=None,
    first_bandwidth=None,
    second_bandwidth=None,
    imputation=FULL_IMPUTATION,
):
    """
    Return a tuple of (index, residuals) of the adjusted residuals of the
    complete cases of `sample`:

    - fit the complete case smoother r_c with `first_bandwidth`
    - impute the responses of all rows: r_c(X_j) with "full" imputation or
      delta_j Y_j + (1 - delta_j) r_c(X_j) with "partial" imputation
    - fit r* on the completed sample with every row treated as observed,
      using `second_bandwidth` (defaulting to `first_bandwidth`)
    - return Y_j - r*(X_j) for the rows with delta_j = 1
    """
    if imputation not in IMPUTATIONS:
        raise ValueError(f"Unknown imputation: {imputation!r}. Use one of: {IMPUTATIONS}")
    if second_bandwidth is None:
        second_bandwidth = first_bandwidth

    first = fit_local_poly(sample, degree, kern=kern, bandwidth=first_bandwidth)
    imputed = evaluate_many(first, sample.x)
    if imputation == PARTIAL_IMPUTATION:
        imputed = np.where(sample.complete, sample.y, imputed)

    completed = MarSample.fully_observed(sample.x, imputed, box=sample.box)
    second = fit_local_poly(completed, degree, kern=kern, bandwidth=second_bandwidth)
    return residuals_complete_case(second, sample)


def edf_tuned(
    sample,
    degree,
    kern=None,
    first_bandwidth=None,
    second_bandwidth=None,
    imputation=FULL_IMPUTATION,
):
    """
    Return the tuned EdfEstimate of the adjusted residuals of `sample`. See
    `tuned_residuals` for the arguments.
    """
    if not sample.n_complete:
        raise EmptySampleError("No complete case in sample.")
    _index, residuals = tuned_residuals(
        sample,
        degree,
        kern=kern,
        first_bandwidth=first_bandwidth,
        second_bandwidth=second_bandwidth,
        imputation=imputation,
    )
    return EdfEstimate.from_values(residuals)


def sigma2_complete_case(residuals):
    """
    Return the mean of the squared complete case residuals, without
    centering.

    >>> sigma2_complete_case([1.0, -1.0])
    1.0
    >>> sigma2_complete_case([3.0])
    9.0
    """
    residuals = np.asarray(residuals, dtype=float).ravel()
    if not residuals.size:
        raise EmptySampleError("Cannot estimate a variance from no residuals.")
    return math.fsum(residuals * residuals) / residuals.size


def estimate_functional(residuals, h):
    """
    Return the complete case residual-based estimate N^-1 sum h(residual) of
    E[h(eps)] for a vectorized callable `h`.
    """
    residuals = np.asarray(residuals, dtype=float).ravel()
    if not residuals.size:
        raise EmptySampleError("Cannot estimate a functional from no residuals.")
    return math.fsum(np.asarray(h(residuals), dtype=float).ravel()) / residuals.size


def expansion_remainder(estimate, errors, delta, density):
    """
    Return the sup-norm over t of
        F_c(t) - N^-1 sum delta_j 1[eps_j <= t] - f(t) N^-1 sum delta_j eps_j

    for the complete case EdfEstimate `estimate`, the array of true `errors`
    of all rows, the `delta` indicators and the error `density` f. The sup
    is taken over the jump points of both step functions, their left limits
    and a grid of EXPANSION_GRID_SIZE points: between jumps the step
    functions are constant while f is not, so the sup can be interior.
    """
    errors = np.asarray(errors, dtype=float).ravel()
    delta = np.asarray(delta, dtype=int).ravel()
    observed = errors[delta == 1]
    if not observed.size:
        raise EmptySampleError("No complete case in sample.")

    oracle = EdfEstimate.from_values(observed)
    mean_error = math.fsum(observed) / observed.size

    points = np.union1d(estimate.jumps, oracle.jumps)
    spread = max(points[-1] - points[0], 1.0)
    grid = np.linspace(points[0] - spread, points[-1] + spread, EXPANSION_GRID_SIZE)
    points = np.concatenate((points, np.nextafter(points, -np.inf), grid))
    remainder = estimate.evaluate(points) - oracle.evaluate(points) - density(points) * mean_error
    return float(np.max(np.abs(remainder)))
