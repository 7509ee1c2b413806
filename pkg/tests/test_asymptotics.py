#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import attr
import numpy as np
import pytest
from scipy import stats

from resid_edf.asymptotics import EfficiencyContext
from resid_edf.asymptotics import IntegrationError
from resid_edf.asymptotics import asym_variance_Eh
from resid_edf.asymptotics import asym_variance_F
from resid_edf.asymptotics import canonical_gradient_Eh
from resid_edf.asymptotics import e_delta_uniform_logistic
from resid_edf.asymptotics import expected_response_rate
from resid_edf.asymptotics import fisher_information
from resid_edf.asymptotics import gradient_parts
from resid_edf.asymptotics import influence
from resid_edf.asymptotics import integrate_law
from resid_edf.asymptotics import laplace_law
from resid_edf.asymptotics import normal_law
from resid_edf.asymptotics import partial_mean
from resid_edf.asymptotics import student_law
from resid_edf.data import propensity

LAWS = [normal_law(1.0), normal_law(2.0), laplace_law(1.0), student_law(4.0)]
T_GRID = np.linspace(-2, 2, 9)


def indicator(t):
    return lambda z: (np.asarray(z, dtype=float) <= t).astype(float)


def draw_design(size, seed=2024):
    """
    Return arrays (delta, eps) drawn from uniform covariates, a logistic
    propensity and standard normal errors.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size)
    delta = (rng.random(size) < propensity(x)).astype(int)
    eps = rng.normal(size=size)
    return delta, eps


@pytest.fixture(scope="module")
def standard_context():
    return EfficiencyContext(law=normal_law(1.0), e_delta=0.5)


def test_influence_examples(standard_context):
    assert influence(standard_context, 0, 1.3, 0.2) == 0.0
    assert influence(standard_context, 1, 0.0, 0.0) == pytest.approx(1.0)


def test_influence_has_mean_zero_and_variance_asym_variance(standard_context):
    delta, eps = draw_design(100_000)
    for t in T_GRID:
        values = influence(standard_context, delta, eps, t)
        standard_error = values.std(ddof=1) / np.sqrt(values.size)
        assert abs(values.mean()) < 3 * standard_error

        squares = values ** 2
        standard_error = squares.std(ddof=1) / np.sqrt(squares.size)
        assert abs(squares.mean() - asym_variance_F(standard_context, t)) < 3 * standard_error


@pytest.mark.parametrize("t, expected", [
    (-1.5, 0.0911),
    (-1.0, 0.1498),
    (0.0, 0.1816),
    (1.0, 0.1498),
    (1.5, 0.0911),
])
def test_asym_variance_F_true_values(standard_context, t, expected):
    assert asym_variance_F(standard_context, t) == pytest.approx(expected, abs=5e-4)


def test_asym_variance_F_vanishes_in_the_tails_and_peaks_at_the_center(standard_context):
    assert asym_variance_F(standard_context, -np.inf) == 0.0
    assert asym_variance_F(standard_context, np.inf) == 0.0
    assert asym_variance_F(standard_context, 9.0) < 1e-12
    assert asym_variance_F(standard_context, -9.0) < 1e-12
    grid = np.linspace(-4, 4, 81)
    values = [asym_variance_F(standard_context, t) for t in grid]
    assert grid[int(np.argmax(values))] == pytest.approx(0.0, abs=0.3)
    assert np.max(np.abs(np.diff(values))) < 0.02


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_law_density_integrates_to_one_and_information_inequality(law):
    assert integrate_law(law, lambda z: 1.0) == pytest.approx(1.0, abs=1e-8)
    assert fisher_information(law) == pytest.approx(law.fisher, abs=1e-6)
    assert law.information >= 1.0 / law.variance
    assert law.reduced_information >= -1e-12


def test_standard_normal_information_is_one():
    assert fisher_information(normal_law(1.0)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_partial_mean_matches_quadrature(law):
    for t in T_GRID:
        expected = integrate_law(law, lambda z: z, upper=t)
        assert partial_mean(law, t) == pytest.approx(expected, abs=1e-8)
    assert partial_mean(law, np.inf) == 0.0


def test_normal_partial_mean_is_minus_variance_times_density():
    law = normal_law(2.0)
    assert partial_mean(law, 0.7) == pytest.approx(-2.0 * stats.norm(scale=np.sqrt(2)).pdf(0.7))


def test_canonical_gradient_of_a_constant_is_zero(standard_context):
    delta, eps = draw_design(50)
    gradient = canonical_gradient_Eh(standard_context, lambda z: np.full(np.shape(z), 3.0), None, delta, eps)
    assert np.allclose(gradient, 0.0, atol=1e-8)


def test_canonical_gradient_of_the_identity_is_zero(standard_context):
    delta, eps = draw_design(50)
    gradient = canonical_gradient_Eh(standard_context, lambda z: np.asarray(z, dtype=float), None, delta, eps)
    assert np.allclose(gradient, 0.0, atol=1e-7)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_canonical_gradient_of_an_indicator_is_the_influence_function(law):
    ctx = EfficiencyContext(law=law, e_delta=0.5)
    delta, eps = draw_design(200)
    for t in (-1.0, 0.0, 0.5):
        h = indicator(t)
        parts = gradient_parts(ctx, h, breakpoints=(t,))
        # E[l(eps) 1(eps <= t)] = -f(t)
        assert parts.mean_score_h == pytest.approx(-float(law.pdf(t)), abs=1e-7)
        gradient = canonical_gradient_Eh(ctx, h, None, delta, eps, parts=parts)
        assert np.allclose(gradient, influence(ctx, delta, eps, t), atol=1e-7)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_gradient_parts_reassemble_to_the_canonical_gradient(law):
    ctx = EfficiencyContext(law=law, e_delta=0.6)
    h = lambda z: np.cos(np.asarray(z, dtype=float))
    parts = gradient_parts(ctx, h)
    delta, eps = draw_design(100, seed=5)
    direct = (delta / 0.6) * (h(eps) - parts.mean_h - parts.mean_score_h * eps)
    assert np.allclose(parts.reassemble(delta, eps), direct, atol=1e-8)
    assert parts.t_star == pytest.approx(-law.variance * parts.mean_h0_l0 / 0.6)


def test_tuning_constant_vanishes_for_normal_indicators(standard_context):
    parts = gradient_parts(standard_context, indicator(0.3), breakpoints=(0.3,))
    assert parts.t_star == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.name)
def test_asym_variance_Eh_of_an_indicator_is_asym_variance_F(law):
    ctx = EfficiencyContext(law=law, e_delta=0.5)
    for t in (-1.5, 0.0, 1.0):
        bound = asym_variance_Eh(ctx, indicator(t), breakpoints=(t,))
        assert bound == pytest.approx(asym_variance_F(ctx, t), rel=1e-6, abs=1e-9)


def test_gradient_parts_detect_a_score_that_does_not_match_the_density():
    law = attr.evolve(normal_law(1.0), score=lambda z: 2.0 * np.asarray(z, dtype=float))
    ctx = EfficiencyContext(law=law, e_delta=0.5)
    # E[h_0 l_0] is 0 by quadrature but 3 from E[l h] - E[eps h] for h(z) = z^3
    with pytest.raises(IntegrationError):
        gradient_parts(ctx, lambda z: np.asarray(z, dtype=float) ** 3)


def test_non_integrable_function_raises(standard_context):
    with pytest.raises(IntegrationError):
        gradient_parts(standard_context, lambda z: 1.0 / np.abs(z))


def test_e_delta_uniform_logistic():
    assert e_delta_uniform_logistic() == 0.5
    assert expected_response_rate(propensity) == pytest.approx(0.5, abs=1e-10)
    assert expected_response_rate(lambda x: 0.3) == pytest.approx(0.3, abs=1e-12)
    assert expected_response_rate(lambda x: 0.3, 0.0, 5.0) == pytest.approx(0.3, abs=1e-12)


def test_invalid_contexts_and_laws_raise():
    with pytest.raises(ValueError):
        EfficiencyContext(law=normal_law(1.0), e_delta=0.0)
    with pytest.raises(ValueError):
        EfficiencyContext(law=normal_law(1.0), e_delta=1.5)
    with pytest.raises(ValueError):
        student_law(2.0)
    with pytest.raises(ValueError):
        normal_law(0.0)
