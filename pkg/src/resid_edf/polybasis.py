#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import itertools
from functools import lru_cache

import attr
import numpy as np
from scipy import integrate
from scipy import special

"""
Multi-index sets, scaled monomials and smooth compactly supported product
kernels: the building blocks of a local polynomial smoother.

A local polynomial fit of degree `d` in `m` covariates regresses on the
scaled monomials psi_i(u) = u_1^i_1 / i_1! ... u_m^i_m / i_m! for every
multi-index i with i_1 + ... + i_m <= d. The zero multi-index always comes
first so that the coefficient at position 0 is the fitted value.
"""


@attr.attributes(frozen=True)
class MultiIndex:
    exponents = attr.ib(
        converter=tuple,
        metadata=dict(help="Tuple of nonnegative integer exponents, one per covariate."),
    )

    @exponents.validator
    def _check_exponents(self, attribute, value):
        if not value:
            raise ValueError("A MultiIndex needs at least one exponent.")
        if any(int(e) != e or e < 0 for e in value):
            raise ValueError(f"Invalid MultiIndex exponents: {value!r}")

    @property
    def order(self):
        return sum(self.exponents)

    @property
    def dimension(self):
        return len(self.exponents)


def _exponents_of_order(order, dimension):
    """
    Return a list of exponent tuples of total `order` in `dimension`
    covariates, in reverse lexicographic order so that (1, 0) comes before
    (0, 1).
    """
    exponents = [
        e for e in itertools.product(range(order + 1), repeat=dimension)
        if sum(e) == order
    ]
    return sorted(exponents, reverse=True)


def multi_index_set(degree, dimension):
    """
    Return the ordered list of MultiIndex of order <= `degree` in
    `dimension` covariates. The order is graded lexicographic with the zero
    index first and it is stable across calls.

    >>> [i.exponents for i in multi_index_set(1, 1)]
    [(0,), (1,)]
    >>> [i.exponents for i in multi_index_set(0, 3)]
    [(0, 0, 0)]
    >>> [i.exponents for i in multi_index_set(2, 2)]
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    """
    if degree < 0:
        raise ValueError(f"degree must be >= 0, not {degree!r}")
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, not {dimension!r}")
    return [
        MultiIndex(exponents)
        for order in range(degree + 1)
        for exponents in _exponents_of_order(order, dimension)
    ]


@attr.attributes(frozen=True)
class BasisSpec:
    degree = attr.ib(
        type=int,
        metadata=dict(help="Degree d of the local polynomial."),
    )

    dimension = attr.ib(
        type=int,
        metadata=dict(help="Covariate dimension m."),
    )

    indices = attr.ib(
        init=False,
        repr=False,
        metadata=dict(help="Ordered list of MultiIndex: the set I(d)."),
    )

    def __attrs_post_init__(self):
        object.__setattr__(self, "indices", multi_index_set(self.degree, self.dimension))

    def __len__(self):
        return len(self.indices)

    @property
    def size(self):
        return len(self.indices)

    def design_matrix(self, u):
        """
        Return an (n, p) array of psi_i(u_j) for each row u_j of the (n, m)
        array `u` and each multi-index i of this basis.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dimension:
            raise ValueError(
                f"Points of dimension {u.shape[1]} do not match basis dimension {self.dimension}"
            )
        exponents = np.array([i.exponents for i in self.indices])
        scales = np.prod(special.factorial(exponents), axis=1)
        powers = u[:, None, :] ** exponents[None, :, :]
        return np.prod(powers, axis=2) / scales


def psi(index, x):
    """
    Return the scaled monomial prod_j x_j^i_j / i_j! for a MultiIndex `index`
    at point `x`.

    >>> psi(MultiIndex((2,)), (3,))
    4.5
    >>> psi(MultiIndex((0, 0, 0)), (7.0, -2.0, 0.5))
    1.0
    >>> psi(MultiIndex((1, 1)), (2, 3))
    6.0
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    exponents = np.asarray(index.exponents)
    if x.shape != exponents.shape:
        raise ValueError(
            f"Dimension mismatch: index has {len(exponents)} exponents, point has {x.size} coordinates"
        )
    return float(np.prod(x ** exponents / special.factorial(exponents)))


@lru_cache(maxsize=None)
def normalizing_constant(exponent):
    """
    Return C_k such that C_k (1 - u^2)^k integrates to one over [-1, 1].
    Computed once per `exponent` k by adaptive quadrature.
    """
    if exponent < 1:
        raise ValueError(f"Kernel exponent must be >= 1, not {exponent!r}")
    area, _error = integrate.quad(
        lambda u: (1.0 - u * u) ** exponent,
        -1.0,
        1.0,
        epsabs=1e-14,
        epsrel=1e-14,
        limit=200,
    )
    return 1.0 / area


def _default_exponent(instance):
    # (1 - u^2)^k is k - 1 times continuously differentiable at +/-1
    return instance.dimension + 3


@attr.attributes(frozen=True)
class ProductKernel:
    dimension = attr.ib(
        type=int,
        default=1,
        metadata=dict(help="Covariate dimension m."),
    )

    exponent = attr.ib(
        type=int,
        default=attr.Factory(_default_exponent, takes_self=True),
        metadata=dict(help="Exponent k of each factor C_k (1 - u^2)^k. Defaults to m + 3."),
    )

    @dimension.validator
    def _check_dimension(self, attribute, value):
        if value < 1:
            raise ValueError(f"Kernel dimension must be >= 1, not {value!r}")

    @exponent.validator
    def _check_exponent(self, attribute, value):
        if value < 1:
            raise ValueError(f"Kernel exponent must be >= 1, not {value!r}")

    @property
    def constant(self):
        return normalizing_constant(self.exponent)

    def factor(self, u):
        """
        Return the one dimensional factor w_j evaluated at `u` (array-like).
        """
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        base = np.where(inside, 1.0 - u * u, 0.0)
        return self.constant * base ** self.exponent

    def weights(self, u):
        """
        Return the product kernel weights for each row of the (n, m) array `u`.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dimension:
            raise ValueError(
                f"Points of dimension {u.shape[1]} do not match kernel dimension {self.dimension}"
            )
        return np.prod(self.factor(u), axis=1)


def kernel_weight(kern, u):
    """
    Return the weight w(u) of the ProductKernel `kern` at point `u`: zero
    when any |u_j| > 1.

    >>> round(kernel_weight(ProductKernel(dimension=1, exponent=4), (0.0,)), 5)
    1.23047
    >>> kernel_weight(ProductKernel(dimension=1, exponent=4), (1.0,))
    0.0
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float(kern.weights(u.reshape(1, -1))[0])
