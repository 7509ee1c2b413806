#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import math
import os
from functools import lru_cache

import attr
import numpy as np
from scipy import integrate
from scipy import optimize
from scipy import stats

from resid_edf.edf import sigma2_complete_case

"""
Martingale transform test for normally distributed regression errors.

With standardized residuals Z_j = eps_j / sigma, the statistic is

    T = sup_t | N^-1/2 sum_j { 1[Z_j <= t] - H(t ^ Z_j) h(Z_j) } |

where h(x) = (1, x, x^2 - 1), Gamma(t) is the integral of h h^T phi over
(t, inf) and H(t) is the integral of h^T Gamma^-1 phi over (-inf, t]. Under
normal errors T converges to sup |B| on [0, 1] for a standard Brownian motion
B, whatever the error variance.

Gamma(t) tends to zero as t grows and its inverse blows up: the process is
only evaluated up to the largest grid point where Gamma is well conditioned.
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


DEFAULT_ALPHA = 0.05

GRID_STEP = 1e-3
GRID_FLOOR = -8.5
GRID_CEILING = 8.5
CONDITION_CAP = 1e10

SERIES_TOLERANCE = 1e-12
MAX_SERIES_TERMS = 100_000

CRITICAL_VALUE_BRACKET = (0.01, 50.0)
CRITICAL_VALUE_TOLERANCE = 1e-9


class NormTestError(Exception):
    pass


class DegenerateResidualsError(NormTestError):
    pass


class TruncationError(NormTestError):
    pass


def h_vec(x):
    """
    Return the 3-vector h(x) = (1, -phi'(x) / phi(x), -(x phi(x))' / phi(x))
    which simplifies to (1, x, x^2 - 1).

    >>> h_vec(2.0).tolist()
    [1.0, 2.0, 3.0]
    """
    x = float(x)
    return np.array([1.0, x, x * x - 1.0])


def h_matrix(x):
    """
    Return an (n, 3) array with h(x_j) in each row for the array-like `x`.
    """
    x = np.asarray(x, dtype=float).ravel()
    return np.column_stack((np.ones_like(x), x, x * x - 1.0))


def gamma_stack(t):
    """
    Return an array of shape t.shape + (3, 3) of Gamma(t) computed from the
    truncated Gaussian moments with Q = 1 - Phi(t) and p = phi(t):

        [[Q,    p,             t p               ],
         [p,    Q + t p,       (t^2 + 1) p       ],
         [t p,  (t^2 + 1) p,   2 Q + (t^3 + t) p ]]
    """
    t = np.asarray(t, dtype=float)
    q = stats.norm.sf(t)
    p = stats.norm.pdf(t)
    finite = np.isfinite(t)
    with np.errstate(invalid="ignore"):
        tp = np.where(finite, t * p, 0.0)
        t2p = np.where(finite, (t * t + 1.0) * p, 0.0)
        t3p = np.where(finite, (t * t * t + t) * p, 0.0)

    gammas = np.empty(t.shape + (3, 3))
    gammas[..., 0, 0] = q
    gammas[..., 0, 1] = gammas[..., 1, 0] = p
    gammas[..., 0, 2] = gammas[..., 2, 0] = tp
    gammas[..., 1, 1] = q + tp
    gammas[..., 1, 2] = gammas[..., 2, 1] = t2p
    gammas[..., 2, 2] = 2.0 * q + t3p
    return gammas


def gamma_mat(t):
    """
    Return the 3x3 matrix Gamma(t), the integral of h(u) h(u)^T phi(u) over
    (t, inf).
    """
    return gamma_stack(float(t))


@attr.attributes(frozen=True, eq=False)
class TransformTables:
    """
    Precomputed Gamma and H on a uniform grid, shared read-only by every
    test statistic evaluation.
    """

    grid = attr.ib(
        repr=False,
        metadata=dict(help="Uniform grid of t values."),
    )

    gammas = attr.ib(
        repr=False,
        metadata=dict(help="Array of Gamma(t) 3x3 matrices, one per grid point."),
    )

    conditions = attr.ib(
        repr=False,
        metadata=dict(help="Condition number of Gamma(t) at each grid point."),
    )

    cutoff_index = attr.ib(
        metadata=dict(help="Index of the last grid point of the well conditioned prefix."),
    )

    transforms = attr.ib(
        repr=False,
        metadata=dict(help="Array of H(t) 3-vectors for the grid points up to the cutoff."),
    )

    condition_cap = attr.ib(
        default=CONDITION_CAP,
        metadata=dict(help="Largest condition number of a usable Gamma(t)."),
    )

    @property
    def cutoff(self):
        return float(self.grid[self.cutoff_index])

    @property
    def well_conditioned(self):
        return self.conditions <= self.condition_cap

    @property
    def skipped_points(self):
        """
        Return the number of grid points above the conditioning cutoff.
        """
        return int(self.grid.size - self.cutoff_index - 1)

    def transform(self, t):
        """
        Return H(t) as a 3-vector for a number `t`, or an (n, 3) array for an
        array `t`, by linear interpolation between grid points. H is zero
        below the grid floor.
        """
        values = np.asarray(t, dtype=float)
        if np.any(values > self.cutoff):
            raise TruncationError(f"H is not available above the conditioning cutoff {self.cutoff}")
        live = self.grid[: self.cutoff_index + 1]
        flat = values.ravel()
        result = np.column_stack([
            np.interp(flat, live, self.transforms[:, k], left=0.0)
            for k in range(3)
        ])
        return result[0] if values.ndim == 0 else result


def build_transform_tables(
    step=GRID_STEP,
    floor=GRID_FLOOR,
    ceiling=GRID_CEILING,
    condition_cap=CONDITION_CAP,
):
    """
    Return new TransformTables on the grid floor, floor + step, ... ceiling.
    H is the cumulative trapezoid integral of h^T Gamma^-1 phi over the well
    conditioned prefix of the grid.
    """
    if not step > 0:
        raise ValueError(f"Grid step must be > 0, not {step!r}")
    if not ceiling > floor:
        raise ValueError(f"Empty grid [{floor}, {ceiling}]")

    count = int(round((ceiling - floor) / step)) + 1
    grid = floor + step * np.arange(count)
    gammas = gamma_stack(grid)
    conditions = np.linalg.cond(gammas)

    bad = np.flatnonzero(~(conditions <= condition_cap))
    if bad.size and bad[0] == 0:
        raise NormTestError(f"Gamma is singular at the grid floor {floor}")
    cutoff_index = int(bad[0] - 1) if bad.size else count - 1
    logger_debug("build_transform_tables: cutoff:", grid[cutoff_index], "skipped:", count - cutoff_index - 1)

    live = slice(0, cutoff_index + 1)
    hs = h_matrix(grid[live])
    solved = np.linalg.solve(gammas[live], hs[..., None])[..., 0]
    integrand = solved * stats.norm.pdf(grid[live])[:, None]
    transforms = integrate.cumulative_trapezoid(integrand, grid[live], axis=0, initial=0.0)

    return TransformTables(
        grid=grid,
        gammas=gammas,
        conditions=conditions,
        cutoff_index=cutoff_index,
        transforms=transforms,
        condition_cap=condition_cap,
    )


@lru_cache(maxsize=1)
def get_transform_tables():
    """
    Return the default TransformTables, built once.
    """
    return build_transform_tables()


def H_transform(t, tables=None):
    """
    Return the 3-vector H(t) from `tables` (the default tables if None).
    Raise a TruncationError above the conditioning cutoff.
    """
    if tables is None:
        tables = get_transform_tables()
    return tables.transform(float(t))


@attr.attributes(frozen=True)
class TestResult:
    # not a pytest test class
    __test__ = False

    statistic = attr.ib(
        metadata=dict(help="Value of the supremum statistic."),
    )

    alpha = attr.ib(
        metadata=dict(help="Level of the test."),
    )

    critical_value = attr.ib(
        metadata=dict(help="Upper alpha quantile of sup |B|."),
    )

    n_used = attr.ib(
        metadata=dict(help="Number N of residuals."),
    )

    truncated_points = attr.ib(
        metadata=dict(help="Number of residual jump points above the conditioning cutoff."),
    )

    skipped_grid_points = attr.ib(
        default=0,
        metadata=dict(help="Number of transform grid points above the conditioning cutoff."),
    )

    @property
    def reject(self):
        return self.statistic > self.critical_value

    def to_dict(self):
        return dict(
            statistic=self.statistic,
            critical_value=self.critical_value,
            alpha=self.alpha,
            reject=self.reject,
            N=self.n_used,
            truncated_points=self.truncated_points,
            skipped_grid_points=self.skipped_grid_points,
        )


def t_statistic(residuals, tables=None, alpha=DEFAULT_ALPHA):
    """
    Return a TestResult of the martingale transform test for normal errors
    on the array-like of `residuals`, using `tables` (the default tables if
    None).

    The residuals are standardized by the root mean square residual. The
    supremum is taken over the sorted standardized residuals at or below the
    conditioning cutoff, at each jump point and just below it.
    """
    if tables is None:
        tables = get_transform_tables()
    residuals = np.asarray(residuals, dtype=float).ravel()
    n = residuals.size
    if n < 2:
        raise NormTestError(f"The test needs at least two residuals, not {n}")

    sigma = math.sqrt(sigma2_complete_case(residuals))
    if not sigma > 0:
        raise DegenerateResidualsError("All residuals are zero.")

    z = np.sort(residuals / sigma, kind="stable")
    live = z <= tables.cutoff
    if not live.any():
        raise TruncationError(f"All standardized residuals are above the cutoff {tables.cutoff}")

    hz = h_matrix(z)
    # a_j = H(Z_j) h(Z_j), only needed for the live residuals
    weights = np.zeros(n)
    weights[live] = np.sum(tables.transform(z[live]) * hz[live], axis=1)
    prefix = np.concatenate(([0.0], np.cumsum(weights)))
    suffix = np.vstack((np.cumsum(hz[::-1], axis=0)[::-1], np.zeros((1, 3))))

    points = np.unique(z[live])
    transformed = tables.transform(points)
    root_n = math.sqrt(n)

    def process(counts):
        return (counts - prefix[counts] - np.sum(transformed * suffix[counts], axis=1)) / root_n

    at_jumps = process(np.searchsorted(z, points, side="right"))
    below_jumps = process(np.searchsorted(z, points, side="left"))
    statistic = float(max(np.max(np.abs(at_jumps)), np.max(np.abs(below_jumps))))

    return TestResult(
        statistic=statistic,
        alpha=alpha,
        critical_value=critical_value(alpha),
        n_used=n,
        truncated_points=int(np.count_nonzero(~live)),
        skipped_grid_points=tables.skipped_points,
    )


def sup_brownian_partial_sums(x):
    """
    Return the list of successive partial sums of the alternating series of
    P(sup |B| <= `x`), stopping after the first term below SERIES_TOLERANCE.
    """
    if not x > 0:
        raise ValueError(f"sup |B| distribution needs x > 0, not {x!r}")
    sums = []
    total = 0.0
    for k in range(MAX_SERIES_TERMS):
        odd = 2 * k + 1
        term = (4.0 / math.pi) * ((-1) ** k / odd) * math.exp(-(math.pi * odd) ** 2 / (8.0 * x * x))
        total += term
        sums.append(total)
        if abs(term) < SERIES_TOLERANCE:
            break
    return sums


def sup_brownian_cdf(x):
    """
    Return P(sup_{0 < t <= 1} |B(t)| <= `x`) for a standard Brownian motion B.

    >>> round(sup_brownian_cdf(2.2414), 3)
    0.95
    """
    value = sup_brownian_partial_sums(x)[-1]
    return min(max(value, 0.0), 1.0)


@lru_cache(maxsize=None)
def critical_value(alpha=DEFAULT_ALPHA):
    """
    Return the upper `alpha` quantile of sup |B| by bisection.

    >>> round(critical_value(0.05), 3)
    2.241
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), not {alpha!r}")
    low, high = CRITICAL_VALUE_BRACKET
    return optimize.bisect(
        lambda x: sup_brownian_cdf(x) - (1.0 - alpha),
        low,
        high,
        xtol=CRITICAL_VALUE_TOLERANCE,
    )
