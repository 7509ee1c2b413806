#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import math
import os

import attr
import numpy as np
from scipy import linalg

from resid_edf.polybasis import BasisSpec
from resid_edf.polybasis import ProductKernel

"""
Complete case local polynomial regression.

The regression estimate at a point x is the intercept of a weighted least
squares fit of a degree `d` polynomial in (X_j - x) / c, using only the rows
where the response is observed. Covariates are mapped affinely from their
domain box onto the unit cube [0, 1]^m and the bandwidth applies on that
unit scale.

The weighted least squares problem is solved through the square-root
weighted design with a column pivoted QR factorization. A design that is
rank deficient at a query point (too few complete cases in the window) gets
its bandwidth inflated by INFLATION_FACTOR up to MAX_INFLATIONS times before
giving up.
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


BANDWIDTH_SCALE = 1.25
BANDWIDTH_EXPONENT = 0.25

INFLATION_FACTOR = 1.1
MAX_INFLATIONS = 25

# relative threshold on the diagonal of R below which a column is dependent
RANK_TOLERANCE = 1e-10

# slack when checking that a query point lies in the domain box
BOX_TOLERANCE = 1e-9


class SmootherError(Exception):
    pass


class InsufficientDataError(SmootherError):
    pass


class EmptyWindowError(SmootherError):
    pass


class RankDeficientError(SmootherError):
    pass


class OutsideDomainError(SmootherError):
    pass


def _as_covariates(x):
    x = np.asarray(x, dtype=float)
    if x.ndim < 2:
        x = x.reshape(-1, 1)
    return x


def covariate_box(x):
    """
    Return a tuple of per-coordinate (lo, hi) bounds of the (n, m) covariate
    array `x`.
    """
    x = _as_covariates(x)
    return tuple((float(lo), float(hi)) for lo, hi in zip(x.min(axis=0), x.max(axis=0)))


@attr.attributes(frozen=True, eq=False)
class MarSample:
    """
    A sample (X_j, delta_j Y_j, delta_j) with responses missing at random.
    Missing responses are stored as NaN.
    """

    x = attr.ib(
        converter=_as_covariates,
        repr=False,
        metadata=dict(help="(n, m) array of covariate vectors."),
    )

    y = attr.ib(
        converter=lambda v: np.asarray(v, dtype=float).ravel(),
        repr=False,
        metadata=dict(help="(n,) array of responses, NaN where the response is missing."),
    )

    delta = attr.ib(
        converter=lambda v: np.asarray(v, dtype=int).ravel(),
        repr=False,
        metadata=dict(help="(n,) array of 0/1 missingness indicators, 1 when observed."),
    )

    box = attr.ib(
        default=None,
        metadata=dict(
            help="Tuple of per-coordinate (lo, hi) domain bounds used to rescale "
            "covariates on the unit cube. Defaults to the covariate range."
        ),
    )

    def __attrs_post_init__(self):
        n = self.x.shape[0]
        if self.y.shape != (n,) or self.delta.shape != (n,):
            raise ValueError(
                f"Inconsistent sample: {n} covariate rows, {self.y.size} responses, "
                f"{self.delta.size} indicators"
            )
        if not np.isin(self.delta, (0, 1)).all():
            raise ValueError("Missingness indicators must be 0 or 1.")
        if not (np.isnan(self.y) == (self.delta == 0)).all():
            raise ValueError("A response must be missing exactly when its indicator is 0.")
        if self.box is None:
            if n:
                object.__setattr__(self, "box", covariate_box(self.x))
            else:
                object.__setattr__(self, "box", tuple((0.0, 1.0) for _ in range(self.dimension)))
        else:
            box = tuple((float(lo), float(hi)) for lo, hi in self.box)
            if len(box) != self.dimension:
                raise ValueError(f"Domain box {box!r} does not match dimension {self.dimension}")
            object.__setattr__(self, "box", box)

    @classmethod
    def from_rows(cls, rows, box=None):
        """
        Return a MarSample built from an iterable of (x, y, delta) rows where
        `x` is a number or a sequence and `y` is None when missing.
        """
        rows = list(rows)
        x = [np.atleast_1d(np.asarray(r[0], dtype=float)) for r in rows]
        y = [np.nan if r[1] is None else float(r[1]) for r in rows]
        delta = [int(r[2]) for r in rows]
        return cls(x=np.array(x), y=y, delta=delta, box=box)

    @classmethod
    def fully_observed(cls, x, y, box=None):
        """
        Return a MarSample where every response is observed: the full model.
        """
        y = np.asarray(y, dtype=float).ravel()
        return cls(x=x, y=y, delta=np.ones(y.size, dtype=int), box=box)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dimension(self):
        return self.x.shape[1]

    @property
    def n_complete(self):
        return int(self.delta.sum())

    @property
    def complete(self):
        return self.delta == 1

    def complete_cases(self):
        """
        Return a tuple of (x, y) arrays for the rows with an observed response.
        """
        mask = self.complete
        return self.x[mask], self.y[mask]

    def rescale(self, x):
        return rescale(x, self.box)


def rescale(x, box):
    """
    Return covariates `x` mapped affinely from `box` onto the unit cube.
    A degenerate coordinate (lo == hi) is mapped onto 0.
    """
    x = _as_covariates(x)
    lo = np.array([b[0] for b in box])
    width = np.array([b[1] - b[0] for b in box])
    width = np.where(width > 0, width, 1.0)
    return (x - lo) / width


def bandwidth_rule(n, scale=BANDWIDTH_SCALE, exponent=BANDWIDTH_EXPONENT):
    """
    Return the bandwidth scale * (n log n)^-exponent.

    >>> round(bandwidth_rule(100), 5)
    0.26983
    >>> round(bandwidth_rule(50), 5)
    0.33424
    """
    if n < 2:
        raise ValueError(f"Bandwidth rule needs n >= 2, not {n!r}")
    if not scale > 0:
        raise ValueError(f"Bandwidth scale must be > 0, not {scale!r}")
    if not exponent > 0:
        raise ValueError(f"Bandwidth exponent must be > 0, not {exponent!r}")
    return scale * (n * math.log(n)) ** -exponent


@attr.attributes(frozen=True, eq=False)
class SmootherFit:
    basis = attr.ib(
        repr=False,
        metadata=dict(help="BasisSpec of the local polynomial."),
    )

    kernel = attr.ib(
        metadata=dict(help="ProductKernel used for the local weights."),
    )

    bandwidth = attr.ib(
        metadata=dict(help="Bandwidth c > 0 on the unit cube scale."),
    )

    box = attr.ib(
        metadata=dict(help="Per-coordinate (lo, hi) domain box used for rescaling."),
    )

    x = attr.ib(
        repr=False,
        metadata=dict(help="(N, m) rescaled covariates of the complete cases."),
    )

    y = attr.ib(
        repr=False,
        metadata=dict(help="(N,) responses of the complete cases."),
    )

    @bandwidth.validator
    def _check_bandwidth(self, attribute, value):
        if not value > 0:
            raise ValueError(f"Bandwidth must be > 0, not {value!r}")

    @property
    def degree(self):
        return self.basis.degree

    @property
    def n_complete(self):
        return self.x.shape[0]

    def evaluate(self, x):
        return evaluate(self, x)


def fit_local_poly(sample, degree, kern=None, bandwidth=None, box=None):
    """
    Return a SmootherFit of the complete case local polynomial smoother of
    `degree` on `sample` with ProductKernel `kern` and `bandwidth`.

    `kern` defaults to the product kernel of the sample dimension with the
    default exponent. `bandwidth` defaults to the bandwidth rule for the
    sample size. `box` defaults to the sample domain box.
    """
    basis = BasisSpec(degree=degree, dimension=sample.dimension)
    if kern is None:
        kern = ProductKernel(dimension=sample.dimension)
    if kern.dimension != sample.dimension:
        raise ValueError(
            f"Kernel dimension {kern.dimension} does not match sample dimension {sample.dimension}"
        )
    if bandwidth is None:
        bandwidth = bandwidth_rule(sample.n)
    box = sample.box if box is None else tuple(tuple(b) for b in box)

    x, y = sample.complete_cases()
    if x.shape[0] < basis.size:
        raise InsufficientDataError(
            f"{x.shape[0]} complete cases for a basis of size {basis.size}"
        )
    return SmootherFit(
        basis=basis,
        kernel=kern,
        bandwidth=float(bandwidth),
        box=box,
        x=rescale(x, box),
        y=y,
    )


def fit_full(x, y, degree, kern=None, bandwidth=None, box=None):
    """
    Return a SmootherFit for the full model where every response in `y` is
    observed at covariates `x`.
    """
    sample = MarSample.fully_observed(x, y, box=box)
    return fit_local_poly(sample, degree, kern=kern, bandwidth=bandwidth)


def _solve_local(fit, point, bandwidth):
    """
    Return the local coefficient vector at rescaled `point` for `bandwidth`,
    or a string giving the reason when the local design cannot be solved.
    """
    u = (fit.x - point) / bandwidth
    weights = fit.kernel.weights(u)
    active = weights > 0
    if not active.any():
        return "empty"
    if active.sum() < fit.basis.size:
        return "rank"

    root = np.sqrt(weights[active])
    design = fit.basis.design_matrix(u[active]) * root[:, None]
    response = fit.y[active] * root

    q, r, pivots = linalg.qr(design, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    if diagonal[0] == 0 or (diagonal < RANK_TOLERANCE * diagonal[0]).any():
        return "rank"

    solution = linalg.solve_triangular(r, q.T @ response)
    coefficients = np.empty_like(solution)
    coefficients[pivots] = solution
    return coefficients


def local_coefficients(fit, x):
    """
    Return the full coefficient vector (beta_i for i in I(d)) of the local
    fit at point `x`, inflating the bandwidth on rank deficiency.
    """
    point = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if point.shape[0] != fit.basis.dimension:
        raise ValueError(
            f"Point of dimension {point.shape[0]} does not match fit dimension {fit.basis.dimension}"
        )
    point = rescale(point.reshape(1, -1), fit.box)[0]
    if (point < -BOX_TOLERANCE).any() or (point > 1 + BOX_TOLERANCE).any():
        raise OutsideDomainError(f"Point {x!r} lies outside the domain box {fit.box!r}")

    bandwidth = fit.bandwidth
    for attempt in range(MAX_INFLATIONS + 1):
        result = _solve_local(fit, point, bandwidth)
        if not isinstance(result, str):
            if attempt and TRACE:
                logger_debug(
                    "local_coefficients: inflated bandwidth", fit.bandwidth, "->", bandwidth,
                    "at", x,
                )
            return result
        bandwidth *= INFLATION_FACTOR

    if result == "empty":
        raise EmptyWindowError(
            f"No complete case within the bandwidth window at {x!r} "
            f"after {MAX_INFLATIONS} inflations"
        )
    raise RankDeficientError(
        f"Rank deficient local design at {x!r} after {MAX_INFLATIONS} inflations"
    )


def evaluate(fit, x):
    """
    Return the local polynomial regression estimate at point `x`: the
    intercept of the local weighted least squares solution.
    """
    return float(local_coefficients(fit, x)[0])


def evaluate_many(fit, points):
    """
    Return an array of estimates at each row of the (k, m) array `points`.
    """
    points = _as_covariates(points)
    return np.array([evaluate(fit, p) for p in points])


def residuals_complete_case(fit, sample):
    """
    Return a tuple of (index, residuals) arrays where `index` holds the row
    numbers of the complete cases of `sample` and `residuals` the matching
    Y_j - r_c(X_j).
    """
    index = np.flatnonzero(sample.complete)
    fitted = evaluate_many(fit, sample.x[index])
    return index, sample.y[index] - fitted
