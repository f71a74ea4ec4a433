"""Independent reference implementations used to cross-check the package.

Everything here is built directly on scipy/numpy primitives through routes
that differ from the ones the library uses: rectangle probabilities go
through scipy's multivariate normal CDF instead of Gauss-Legendre or QMC,
Wishart draws come from the Bartlett decomposition instead of summed outer
products, rejection probabilities come from adaptive quadrature instead of
fixed-node rules, and margins come from scipy's bracketing root finder.
Agreement between the two routes is the point of the tests that import this
module.
"""

import numpy as np
from scipy import integrate, optimize, stats

Z = stats.norm


def rect_prob_scipy(lower, upper, correlation):
    """P(lower < X < upper) for X ~ N(0, correlation), via scipy's CDF."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    correlation = np.asarray(correlation, dtype=float)
    k = lower.size
    return float(
        stats.multivariate_normal.cdf(
            upper, mean=np.zeros(k), cov=correlation, lower_limit=lower,
            allow_singular=False,
        )
    )


def chi_law(sigma1, nu2):
    """scipy distribution of the estimated standard error.

    If nu2 * s^2 / sigma1^2 ~ chi2(nu2) then s ~ chi(nu2) scaled by
    sigma1 / sqrt(nu2).
    """
    return stats.chi(df=nu2, scale=sigma1 / np.sqrt(nu2))


def omega_quad(theta, sigma1, nu2, t, c, epsabs=1e-12, epsrel=1e-11):
    """P(|theta_hat| < c - t*s), theta_hat ~ N(theta, sigma1^2) independent
    of s, by adaptive quadrature over the density of s."""
    if t == 0.0:
        return float(
            Z.cdf((c - theta) / sigma1) - Z.cdf((-c - theta) / sigma1)
        )
    law = chi_law(sigma1, nu2)

    def integrand(s):
        half = c - t * s
        if half <= 0.0:
            return 0.0
        inner = Z.cdf((half - theta) / sigma1) - Z.cdf((-half - theta) / sigma1)
        return inner * law.pdf(s)

    upper = min(c / t, law.ppf(1.0 - 1e-14))
    if upper <= 0.0:
        return 0.0
    val, _ = integrate.quad(
        integrand, 0.0, upper, epsabs=epsabs, epsrel=epsrel, limit=400
    )
    return float(val)


def size_quad(sigma1, nu2, t, c, **kw):
    """Rejection probability at the equivalence boundary theta = log(1.25)."""
    return omega_quad(np.log(1.25), sigma1, nu2, t, c, **kw)


def brute_margin(sigma1, alpha0=0.05, c0=None, xtol=1e-14):
    """Fixed-margin c with boundary rejection probability alpha0, found by
    scipy's bracketing solver on the closed-form normal expression."""
    if c0 is None:
        c0 = float(np.log(1.25))

    def f(c):
        return Z.cdf((c - c0) / sigma1) - Z.cdf((-c - c0) / sigma1) - alpha0

    # size is strictly increasing in c, 0 at c = 0+ and 1 in the limit, so
    # the root is bracketed by (almost) zero and a generous upper end.
    lo, hi = 1e-12, c0 + 20.0 * sigma1 + 1.0
    return float(optimize.brentq(f, lo, hi, xtol=xtol, rtol=8.9e-16))


def bartlett_wishart_cov(sigma1, correlation, nu2, n, seed):
    """n scaled-Wishart covariance draws via the Bartlett decomposition.

    Returns an (n, K, K) array of draws of the sample covariance of the
    estimate, i.e. W / nu2 with W ~ Wishart(nu2, Sigma1).
    """
    sigma1 = np.asarray(sigma1, dtype=float)
    correlation = np.asarray(correlation, dtype=float)
    k = sigma1.size
    scale = correlation * np.outer(sigma1, sigma1)
    chol = np.linalg.cholesky(scale)
    rng = np.random.default_rng(seed)
    out = np.empty((n, k, k))
    for i in range(n):
        a = np.zeros((k, k))
        for j in range(k):
            a[j, j] = np.sqrt(rng.chisquare(nu2 - j))
            for m in range(j):
                a[j, m] = rng.standard_normal()
        la = chol @ a
        out[i] = la @ la.T / nu2
    return out


def t_member_margins(sigma1, nu2, t0, alpha0=0.05, c0=None, tol=1e-11,
                     max_iter=400):
    """Margins and marginal level for the two-dimensional shrunken-member
    test with independent coordinates and equal scales.

    The test rejects when |theta_hat_k| < c - t0 * s_k in both coordinates.
    With independence and equal sigma1 the worst-case mean sits on one axis,
    where the joint rejection probability factors into
    (boundary coordinate) * (zero coordinate).  Matching the global level to
    alpha0 therefore reduces to a scalar fixed point on the marginal level
    gamma: pick c(gamma) so the boundary coordinate rejects with probability
    gamma, then push gamma up until gamma * P0(c(gamma)) = alpha0, where P0
    is the rejection probability of the centered coordinate.
    """
    if c0 is None:
        c0 = float(np.log(1.25))

    def margin_at(gamma):
        def f(c):
            return size_quad(sigma1, nu2, t0, c) - gamma

        lo, hi = c0 * 1e-3, c0
        while f(hi) < 0.0:
            lo = hi
            hi *= 2.0
            if hi > 50.0:
                raise RuntimeError("margin bracket failed")
        return float(optimize.brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16))

    gamma = alpha0
    c = margin_at(gamma)
    for it in range(max_iter):
        p0 = omega_quad(0.0, sigma1, nu2, t0, c)
        global_size = gamma * p0
        step = alpha0 - global_size
        new_gamma = max(gamma + step, alpha0)
        c = margin_at(new_gamma)
        if abs(new_gamma - gamma) < tol and abs(step) < tol:
            gamma = new_gamma
            break
        gamma = new_gamma
    p0 = omega_quad(0.0, sigma1, nu2, t0, c)
    return {
        "gamma": float(gamma),
        "c": float(c),
        "global_size": float(gamma * p0),
        "iterations": it + 1,
    }
