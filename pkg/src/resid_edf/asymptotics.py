#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import math
import warnings

import attr
import numpy as np
from scipy import integrate
from scipy import stats

"""
Closed-form efficiency oracles for estimating the error distribution in
nonparametric regression with responses missing at random.

An efficient estimator of a linear functional E[h(eps)] has the influence
function

    (delta / E delta) {h(eps) - E[h(eps)] - E[l(eps) h(eps)] eps}

where l = -f'/f is the score for location of the error density f. With
h = 1[. <= t] this is the influence function of the complete case residual
empirical distribution function:

    b(delta, eps, t) = (delta / E delta) {1[eps <= t] - F(t) + eps f(t)}

and the asymptotic variance of n^1/2 (F_c(t) - F(t)) is E[b^2].
"""

QUADRATURE_TOLERANCE = 1e-9


class IntegrationError(Exception):
    pass


def _check_positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"{attribute.name} must be > 0, not {value!r}")


@attr.attributes(frozen=True)
class ErrorLawSpec:
    """
    An error law with its distribution function, density, score for
    location l = -f'/f, variance and Fisher information for location.
    """

    name = attr.ib(
        type=str,
        metadata=dict(help="Short name of the law."),
    )

    cdf = attr.ib(
        repr=False,
        metadata=dict(help="Vectorized distribution function F."),
    )

    pdf = attr.ib(
        repr=False,
        metadata=dict(help="Vectorized density f."),
    )

    score = attr.ib(
        repr=False,
        metadata=dict(help="Vectorized score for location l = -f'/f."),
    )

    variance = attr.ib(
        validator=_check_positive,
        metadata=dict(help="Error variance sigma^2."),
    )

    fisher = attr.ib(
        default=None,
        metadata=dict(help="Analytic Fisher information J for location, if known."),
    )

    partial_mean_function = attr.ib(
        default=None,
        repr=False,
        metadata=dict(help="Analytic t -> E[eps 1(eps <= t)], if known."),
    )

    @property
    def information(self):
        if self.fisher is not None:
            return self.fisher
        return fisher_information(self)

    @property
    def reduced_information(self):
        """
        Return J_0 = J - 1/sigma^2, the information of the score projected
        onto the mean zero and zero covariance directions.
        """
        return self.information - 1.0 / self.variance

    def reduced_score(self, z):
        """
        Return l_0(z) = l(z) - z / sigma^2.
        """
        z = np.asarray(z, dtype=float)
        return self.score(z) - z / self.variance


def normal_law(variance=1.0):
    """
    Return the ErrorLawSpec of N(0, variance).
    """
    if not variance > 0:
        raise ValueError(f"Normal errors need a variance > 0, not {variance!r}")
    scale = math.sqrt(variance)
    dist = stats.norm(loc=0.0, scale=scale)
    return ErrorLawSpec(
        name=f"normal({variance:g})",
        cdf=dist.cdf,
        pdf=dist.pdf,
        score=lambda z: np.asarray(z, dtype=float) / variance,
        variance=float(variance),
        fisher=1.0 / variance,
        partial_mean_function=lambda t: -variance * dist.pdf(t),
    )


def laplace_law(scale=1.0):
    """
    Return the ErrorLawSpec of the Laplace law with location 0 and `scale` b,
    with variance 2 b^2.
    """
    if not scale > 0:
        raise ValueError(f"Laplace errors need a scale > 0, not {scale!r}")
    dist = stats.laplace(loc=0.0, scale=scale)

    def partial_mean(t):
        t = np.asarray(t, dtype=float)
        below = 0.5 * np.exp(np.minimum(t, 0.0) / scale) * (t - scale)
        above = -0.5 * np.exp(-np.maximum(t, 0.0) / scale) * (t + scale)
        return np.where(t <= 0, below, above)

    return ErrorLawSpec(
        name=f"laplace({scale:g})",
        cdf=dist.cdf,
        pdf=dist.pdf,
        score=lambda z: np.sign(np.asarray(z, dtype=float)) / scale,
        variance=2.0 * scale * scale,
        fisher=1.0 / (scale * scale),
        partial_mean_function=partial_mean,
    )


def student_law(df=4.0):
    """
    Return the ErrorLawSpec of the Student t law with `df` > 2 degrees of
    freedom.
    """
    if not df > 2:
        raise ValueError(f"Student t errors need df > 2 for a finite variance, not {df!r}")
    dist = stats.t(df)
    return ErrorLawSpec(
        name=f"t({df:g})",
        cdf=dist.cdf,
        pdf=dist.pdf,
        score=lambda z: (df + 1.0) * np.asarray(z, dtype=float) / (df + np.asarray(z, dtype=float) ** 2),
        variance=df / (df - 2.0),
        fisher=(df + 1.0) / (df + 3.0),
    )


def _segments(breakpoints):
    """
    Return a list of (lo, hi) integration segments covering the real line,
    split at the sorted finite `breakpoints` and at 0.
    """
    points = sorted({0.0, *(float(b) for b in breakpoints if np.isfinite(b))})
    bounds = [-np.inf, *points, np.inf]
    return list(zip(bounds[:-1], bounds[1:]))


def integrate_law(law, g, breakpoints=(), upper=np.inf):
    """
    Return the integral of g(z) f(z) over (-inf, `upper`] for the law
    ErrorLawSpec `law` and a scalar callable `g`. Split the domain at
    `breakpoints` where g may be discontinuous. Raise an IntegrationError if
    the quadrature does not converge or is not finite.
    """
    breakpoints = [b for b in breakpoints if b < upper]
    total = []
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in _segments(breakpoints):
            if lo >= upper:
                break
            hi = min(hi, upper)
            try:
                value, _error = integrate.quad(
                    lambda z: g(z) * law.pdf(z),
                    lo,
                    hi,
                    epsabs=QUADRATURE_TOLERANCE,
                    epsrel=QUADRATURE_TOLERANCE,
                    limit=200,
                )
            except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as e:
                raise IntegrationError(f"Integration failed on [{lo}, {hi}]: {e}") from e
            total.append(value)
    result = math.fsum(total)
    if not math.isfinite(result):
        raise IntegrationError(f"Integral is not finite: {result!r}")
    return result


def fisher_information(law):
    """
    Return the Fisher information for location J = E[l(eps)^2] of the
    ErrorLawSpec `law`, by quadrature.
    """
    return integrate_law(law, lambda z: float(law.score(z)) ** 2)


def partial_mean(law, t):
    """
    Return E[eps 1(eps <= t)] for the ErrorLawSpec `law`: analytic when the
    law provides it, by adaptive quadrature otherwise.
    """
    if np.isinf(t):
        return 0.0
    if law.partial_mean_function is not None:
        return float(law.partial_mean_function(t))
    return integrate_law(law, lambda z: z, upper=t)


def _check_e_delta(instance, attribute, value):
    if not 0.0 < value <= 1.0:
        raise ValueError(f"e_delta must be in (0, 1], not {value!r}")


@attr.attributes(frozen=True)
class EfficiencyContext:
    law = attr.ib(
        metadata=dict(help="ErrorLawSpec of the errors."),
    )

    e_delta = attr.ib(
        default=0.5,
        validator=_check_e_delta,
        metadata=dict(help="Probability E[delta] that a response is observed."),
    )


def influence(ctx, delta, eps, t):
    """
    Return the influence function b(delta, eps, t) of the complete case
    residual distribution function at `t`. Vectorized over `delta` and `eps`.
    """
    delta = np.asarray(delta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    law = ctx.law
    value = (delta / ctx.e_delta) * ((eps <= t) - law.cdf(t) + eps * law.pdf(t))
    return float(value) if value.ndim == 0 else value


def asym_variance_F(ctx, t):
    """
    Return the asymptotic variance E[b(delta, eps, t)^2] of
    n^1/2 (F_c(t) - F(t)):

        (1 / E delta) {F(t) (1 - F(t)) + 2 f(t) E[eps 1(eps <= t)] + f(t)^2 sigma^2}
    """
    if np.isinf(t):
        return 0.0
    law = ctx.law
    cdf = float(law.cdf(t))
    pdf = float(law.pdf(t))
    value = cdf * (1.0 - cdf) + 2.0 * pdf * partial_mean(law, t) + pdf * pdf * law.variance
    return max(value, 0.0) / ctx.e_delta


@attr.attributes(frozen=True)
class GradientParts:
    """
    The pieces of the canonical gradient of E[h(eps)]: the gradient is
    delta {s*(eps) + l(eps) t*} with a constant t*.
    """

    ctx = attr.ib(repr=False)
    h = attr.ib(repr=False)
    mean_h = attr.ib(metadata=dict(help="E[h(eps)]"))
    mean_eps_h = attr.ib(metadata=dict(help="E[eps h(eps)]"))
    mean_score_h = attr.ib(metadata=dict(help="E[l(eps) h(eps)]"))
    mean_h0_l0 = attr.ib(metadata=dict(help="E[h_0(eps) l_0(eps)]"))
    t_star = attr.ib(metadata=dict(help="The constant t* = -sigma^2 E[h_0 l_0] / E delta"))

    def h0(self, z):
        """
        Return h_0(z) = h(z) - E[h] - z E[eps h] / sigma^2: the projection of h
        onto the mean zero, zero covariance directions.
        """
        z = np.asarray(z, dtype=float)
        return self.h(z) - self.mean_h - z * self.mean_eps_h / self.ctx.law.variance

    def s_star(self, z):
        """
        Return s*(z) = {h_0(z) + sigma^2 E[h_0 l_0] l_0(z)} / E delta.
        """
        law = self.ctx.law
        return (self.h0(z) + law.variance * self.mean_h0_l0 * law.reduced_score(z)) / self.ctx.e_delta

    def reassemble(self, delta, eps):
        """
        Return delta {s*(eps) + l(eps) t*}.
        """
        delta = np.asarray(delta, dtype=float)
        return delta * (self.s_star(eps) + self.ctx.law.score(eps) * self.t_star)


def gradient_parts(ctx, h, breakpoints=()):
    """
    Return the GradientParts of the canonical gradient of E[h(eps)] for a
    vectorized callable `h`, computing the needed expectations by quadrature
    split at `breakpoints` where `h` is discontinuous.
    """
    law = ctx.law

    def scalar(g):
        return lambda z: float(g(z))

    mean_h = integrate_law(law, scalar(h), breakpoints)
    mean_eps_h = integrate_law(law, lambda z: z * float(h(z)), breakpoints)
    mean_score_h = integrate_law(law, lambda z: float(law.score(z)) * float(h(z)), breakpoints)
    # E[l] = 0 and E[eps l] = 1 give E[h_0 l_0] = E[l h] - E[eps h] / sigma^2
    mean_h0_l0 = mean_score_h - mean_eps_h / law.variance

    def h0_l0(z):
        h0 = float(h(z)) - mean_h - z * mean_eps_h / law.variance
        return h0 * float(law.reduced_score(z))

    direct = integrate_law(law, h0_l0, breakpoints)
    if not math.isclose(direct, mean_h0_l0, rel_tol=1e-6, abs_tol=1e-8):
        raise IntegrationError(
            f"E[h_0 l_0] is {direct!r} by quadrature but {mean_h0_l0!r} from the score identities: "
            "the quadrature is inaccurate or the score does not match the density."
        )
    return GradientParts(
        ctx=ctx,
        h=h,
        mean_h=mean_h,
        mean_eps_h=mean_eps_h,
        mean_score_h=mean_score_h,
        mean_h0_l0=mean_h0_l0,
        t_star=-law.variance * mean_h0_l0 / ctx.e_delta,
    )


def canonical_gradient_Eh(ctx, h, x, delta, eps, breakpoints=(), parts=None):
    """
    Return the canonical gradient of E[h(eps)] at observations (`delta`,
    `eps`):

        (delta / E delta) {h(eps) - E[h(eps)] - E[l(eps) h(eps)] eps}

    The gradient does not depend on the covariate `x`. Pass precomputed
    `parts` to avoid repeating the quadratures.
    """
    if parts is None:
        parts = gradient_parts(ctx, h, breakpoints)
    delta = np.asarray(delta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    value = (delta / ctx.e_delta) * (h(eps) - parts.mean_h - parts.mean_score_h * eps)
    return float(value) if np.ndim(value) == 0 else value


def asym_variance_Eh(ctx, h, breakpoints=()):
    """
    Return the efficiency bound E[g*^2] for estimating E[h(eps)]:

        (1 / E delta) E[(h(eps) - E[h] - E[l h] eps)^2]
    """
    parts = gradient_parts(ctx, h, breakpoints)

    def squared(z):
        centered = float(h(z)) - parts.mean_h - parts.mean_score_h * z
        return centered * centered

    return integrate_law(ctx.law, squared, breakpoints) / ctx.e_delta


def expected_response_rate(response_probability, low=-1.0, high=1.0):
    """
    Return E[delta], the integral of the vectorized `response_probability`
    against the uniform covariate law on [`low`, `high`], by quadrature.
    """
    if not high > low:
        raise ValueError(f"Empty covariate range [{low}, {high}]")
    value, _error = integrate.quad(
        lambda x: float(response_probability(x)),
        low,
        high,
        epsabs=1e-12,
        epsrel=1e-12,
    )
    return value / (high - low)


def e_delta_uniform_logistic():
    """
    Return E[delta] for uniform covariates on (-1, 1) and a logistic
    propensity: pi(x) + pi(-x) = 1 makes it exactly one half.

    >>> e_delta_uniform_logistic()
    0.5
    """
    return 0.5
