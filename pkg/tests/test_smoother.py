#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import numpy as np
import pytest

from resid_edf.polybasis import BasisSpec
from resid_edf.polybasis import ProductKernel
from resid_edf.smoother import EmptyWindowError
from resid_edf.smoother import InsufficientDataError
from resid_edf.smoother import MarSample
from resid_edf.smoother import OutsideDomainError
from resid_edf.smoother import RankDeficientError
from resid_edf.smoother import bandwidth_rule
from resid_edf.smoother import evaluate
from resid_edf.smoother import evaluate_many
from resid_edf.smoother import fit_full
from resid_edf.smoother import fit_local_poly
from resid_edf.smoother import local_coefficients
from resid_edf.smoother import rescale
from resid_edf.smoother import residuals_complete_case


def random_sample(seed, dimension, n, observed=0.7, function=None):
    """
    Return a MarSample on the box [-1, 1]^m with uniform covariates and
    responses from `function` (random noise by default).
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, dimension))
    if function is None:
        y = rng.normal(size=n)
    else:
        y = function(x)
    delta = (rng.random(n) < observed).astype(int)
    y = np.where(delta == 1, y, np.nan)
    return MarSample(x=x, y=y, delta=delta, box=((-1.0, 1.0),) * dimension)


def random_polynomial(rng, degree, dimension):
    """
    Return a callable random polynomial of total `degree` in `dimension`
    covariates acting on (n, m) arrays.
    """
    basis = BasisSpec(degree=degree, dimension=dimension)
    coefficients = rng.normal(size=basis.size)
    return lambda x: basis.design_matrix(x) @ coefficients


def test_bandwidth_rule_values():
    assert bandwidth_rule(100) == pytest.approx(0.26983, abs=1e-5)
    assert bandwidth_rule(50) == pytest.approx(0.33424, abs=1e-5)
    assert bandwidth_rule(1000) < bandwidth_rule(250) < bandwidth_rule(50)


def test_bandwidth_rule_rejects_invalid_arguments():
    with pytest.raises(ValueError):
        bandwidth_rule(1)
    with pytest.raises(ValueError):
        bandwidth_rule(100, scale=0)


def test_rescale_maps_box_on_unit_cube():
    x = np.array([[-1.0], [0.0], [1.0]])
    assert rescale(x, ((-1.0, 1.0),)).ravel().tolist() == [0.0, 0.5, 1.0]


def test_mar_sample_rejects_inconsistent_missingness():
    with pytest.raises(ValueError):
        MarSample(x=[0.0, 1.0], y=[1.0, 2.0], delta=[1, 0])
    with pytest.raises(ValueError):
        MarSample(x=[0.0, 1.0], y=[1.0, np.nan], delta=[1, 2])


def test_mar_sample_from_rows():
    sample = MarSample.from_rows([(0.1, 1.0, 1), (0.5, None, 0), (0.9, 3.0, 1)])
    assert sample.n == 3
    assert sample.dimension == 1
    assert sample.n_complete == 2
    assert sample.box == ((0.1, 0.9),)
    x, y = sample.complete_cases()
    assert x.ravel().tolist() == [0.1, 0.9]
    assert y.tolist() == [1.0, 3.0]


@pytest.mark.parametrize("seed", range(100))
def test_local_polynomial_reproduces_polynomials_of_its_degree(seed):
    degree = seed % 3
    dimension = 1 if seed < 50 else 2
    n = 80 if dimension == 1 else 200
    rng = np.random.default_rng(1000 + seed)
    polynomial = random_polynomial(rng, degree, dimension)
    sample = random_sample(seed, dimension, n, function=polynomial)

    fit = fit_local_poly(sample, degree)
    points = rng.uniform(-0.8, 0.8, (5, dimension))
    fitted = evaluate_many(fit, points)
    assert np.max(np.abs(fitted - polynomial(points))) <= 1e-8


@pytest.mark.parametrize("seed", range(100))
def test_complete_case_fit_equals_full_fit_on_complete_rows(seed):
    dimension = 1 + seed % 2
    sample = random_sample(seed, dimension, 60 if dimension == 1 else 150)
    x, y = sample.complete_cases()

    complete_case = fit_local_poly(sample, 1)
    full = fit_full(x, y, 1, box=sample.box, bandwidth=complete_case.bandwidth)
    _index, cc_residuals = residuals_complete_case(complete_case, sample)
    full_residuals = y - evaluate_many(full, x)
    assert np.array_equal(cc_residuals, full_residuals)


def test_all_observed_complete_case_fit_is_the_full_fit():
    sample = random_sample(3, 1, 50, observed=1.0)
    assert sample.n_complete == sample.n
    complete_case = fit_local_poly(sample, 1)
    full = fit_full(sample.x, sample.y, 1, box=sample.box)
    points = np.linspace(-1, 1, 11)
    assert np.array_equal(evaluate_many(complete_case, points), evaluate_many(full, points))


def test_local_coefficients_match_weighted_normal_equations():
    sample = random_sample(11, 1, 100)
    kern = ProductKernel(dimension=1)
    fit = fit_local_poly(sample, 2, kern=kern, bandwidth=0.3)
    point = 0.2

    x, y = sample.complete_cases()
    u = (rescale(x, sample.box) - rescale([[point]], sample.box)) / 0.3
    design = fit.basis.design_matrix(u)
    weights = kern.weights(u)
    gram = design.T @ (weights[:, None] * design)
    expected = np.linalg.solve(gram, design.T @ (weights * y))

    assert np.allclose(local_coefficients(fit, point), expected, rtol=1e-8, atol=1e-10)
    assert evaluate(fit, point) == pytest.approx(expected[0], abs=1e-10)


def test_bandwidth_is_inflated_for_sparse_windows():
    # two clusters with a gap in the middle
    x = np.concatenate((np.linspace(-1.0, -0.6, 10), np.linspace(0.6, 1.0, 10)))
    sample = MarSample.fully_observed(x, 2.0 * x + 1.0, box=((-1.0, 1.0),))
    fit = fit_local_poly(sample, 1, bandwidth=0.05)
    assert evaluate(fit, 0.0) == pytest.approx(1.0, abs=1e-9)


def test_empty_window_after_all_inflations_raises():
    x = np.array([-1.0, -0.99, -0.98, -0.97])
    sample = MarSample.fully_observed(x, x, box=((-1.0, 1.0),))
    fit = fit_local_poly(sample, 1, bandwidth=1e-3)
    with pytest.raises(EmptyWindowError):
        evaluate(fit, 1.0)


def test_rank_deficient_design_after_all_inflations_raises():
    x = np.array([0.0, 0.0, 0.0, 0.0])
    sample = MarSample.fully_observed(x, [1.0, 2.0, 3.0, 4.0], box=((-1.0, 1.0),))
    fit = fit_local_poly(sample, 1, bandwidth=0.2)
    with pytest.raises(RankDeficientError):
        evaluate(fit, 0.0)


def test_too_few_complete_cases_raises():
    sample = MarSample.from_rows([(0.0, 1.0, 1), (0.5, None, 0), (1.0, None, 0)])
    with pytest.raises(InsufficientDataError):
        fit_local_poly(sample, 1)


def test_point_outside_domain_raises():
    sample = random_sample(5, 1, 40)
    fit = fit_local_poly(sample, 1)
    with pytest.raises(OutsideDomainError):
        evaluate(fit, 1.5)


def test_point_dimension_mismatch_raises():
    sample = random_sample(5, 2, 100)
    fit = fit_local_poly(sample, 1)
    with pytest.raises(ValueError):
        evaluate(fit, 0.1)


@pytest.mark.parametrize("seed", range(20))
def test_fit_does_not_depend_on_the_row_order(seed):
    dimension = 1 + seed % 2
    sample = random_sample(seed, dimension, 60 if dimension == 1 else 150)
    order = np.random.default_rng(seed).permutation(sample.n)
    shuffled = MarSample(
        x=sample.x[order],
        y=sample.y[order],
        delta=sample.delta[order],
        box=sample.box,
    )
    points = np.random.default_rng(500 + seed).uniform(-0.9, 0.9, (7, dimension))
    first = evaluate_many(fit_local_poly(sample, 1), points)
    second = evaluate_many(fit_local_poly(shuffled, 1), points)
    assert np.max(np.abs(first - second)) <= 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_fit_is_linear_in_the_responses(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 70)
    delta = (rng.random(70) < 0.7).astype(int)
    y1 = np.where(delta == 1, rng.normal(size=70), np.nan)
    y2 = np.where(delta == 1, rng.normal(size=70), np.nan)
    box = ((-1.0, 1.0),)

    def fitted(y):
        sample = MarSample(x=x, y=y, delta=delta, box=box)
        return evaluate_many(fit_local_poly(sample, 2), np.linspace(-0.9, 0.9, 9))

    assert np.max(np.abs(fitted(y1 + y2) - fitted(y1) - fitted(y2))) <= 1e-10


def test_constant_fit_of_a_single_complete_case_is_its_response():
    sample = MarSample.from_rows([(-0.5, None, 0), (0.2, 3.5, 1), (0.7, None, 0)], box=((-1.0, 1.0),))
    fit = fit_local_poly(sample, 0, bandwidth=5.0)
    for point in (-1.0, 0.0, 0.2, 1.0):
        assert evaluate(fit, point) == pytest.approx(3.5, abs=1e-12)
