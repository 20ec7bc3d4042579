"""Independent numerical oracles shared by the test modules.

Nothing here calls the shipped closed forms: predictive densities are built
from their posterior constructions by numerical integration, and
normalizers from textbook sampling distributions.
"""

import math

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln, multigammaln

LN2 = math.log(2.0)
LN_PI = math.log(math.pi)


def norm_pdf(x, mu, sd):
    z = (x - mu) / sd
    return math.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * sd)


def chi2_pdf(y, k):
    if y <= 0:
        return 0.0
    return math.exp((k / 2 - 1) * math.log(y) - y / 2 - k / 2 * LN2 - math.lgamma(k / 2))


def density_mass(bits_fn, center=0.0, scale=1.0):
    """Integral over the real line of ``2**-bits_fn(x)``."""
    f = lambda t: 2.0 ** -bits_fn(center + scale * t) * scale
    total = 0.0
    for a, b in ((-np.inf, -1.0), (-1.0, 1.0), (1.0, np.inf)):
        v, _ = integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=400)
        total += v
    return total


def _log_window(center, width=45.0):
    return center - width, center + width


def ssm_var_posterior_density(sumsq, n, x):
    """Unknown-variance predictive density from the pivot ``sumsq / s ~ chi2_n``.

    Integrates over the variance ``s`` in log coordinates.
    """
    def g(u):
        s = math.exp(u)
        like = math.exp(-x * x / (2 * s)) / math.sqrt(2 * math.pi * s)
        return like * chi2_pdf(sumsq / s, n) * sumsq / s

    lo, hi = _log_window(math.log(sumsq / n))
    centre = math.log((sumsq + x * x) / (n + 1))
    v, _ = integrate.quad(g, lo, hi, points=[centre], epsabs=0, epsrel=1e-13, limit=500)
    return v


def ssm_var_sigma_density(sumsq, n, x):
    """Same construction with the standard deviation as the parameter.

    The pivot ``sumsq / sigma^2 ~ chi2_n`` is turned into a density over
    ``sigma`` with Jacobian ``2 sumsq / sigma^3``.
    """
    def g(v):
        sd = math.exp(v)
        like = math.exp(-x * x / (2 * sd * sd)) / (math.sqrt(2 * math.pi) * sd)
        return like * chi2_pdf(sumsq / sd**2, n) * 2 * sumsq / sd**3 * sd

    lo, hi = _log_window(0.5 * math.log(sumsq / n), 25.0)
    centre = 0.5 * math.log((sumsq + x * x) / (n + 1))
    val, _ = integrate.quad(g, lo, hi, points=[centre], epsabs=0, epsrel=1e-13, limit=500)
    return val


def meanvar_posterior_density(history, x):
    """Unknown mean and variance: two-stage posterior built from pivots.

    ``C / s ~ chi2_{n-1}`` with ``C`` the centred scatter, then
    ``mu | s ~ N(mean, s / n)``; the Gaussian likelihood is averaged over both.
    """
    h = np.asarray(history, dtype=float)
    n = h.size
    m = h.mean()
    c = float(np.sum((h - m) ** 2))

    def inner(u):
        s = math.exp(u)
        sd = math.sqrt(s)
        sd_mu = math.sqrt(s / n)

        def f(mu):
            return norm_pdf(x, mu, sd) * norm_pdf(mu, m, sd_mu)

        lo = min(m, x) - 12 * math.sqrt(s)
        hi = max(m, x) + 12 * math.sqrt(s)
        v, _ = integrate.quad(f, lo, hi, points=[m, x], epsabs=0, epsrel=1e-10, limit=200)
        return v * chi2_pdf(c / s, n - 1) * c / s

    lo, hi = _log_window(math.log(c / max(n - 1, 1)), 40.0)
    v, _ = integrate.quad(inner, lo, hi, epsabs=0, epsrel=1e-11, limit=500)
    return v


def bits(density):
    return -math.log2(density)


# --- batch normalizers (natural log) ---------------------------------------


def log_c_nlm_var(x):
    """Batch normalizer of the unknown-variance likelihood, natural log."""
    n = len(x)
    t = float(np.sum(np.square(x)))
    return -math.log(2) - 0.5 * n * math.log(math.pi) + gammaln((n - 2) / 2) - (n - 2) / 2 * math.log(t)


def batch_sums(x, m):
    """Regressor matrix, cross-product vector and energy built from scratch."""
    x = np.asarray(x, dtype=float)
    n = x.size
    rows = [x[i - m : i][::-1] for i in range(m, n)]
    X = np.array(rows).reshape(-1, m)
    y = x[m:n]
    return X.T @ X, X.T @ y, float(y @ y)


def batch_log_c(x, m):
    """Closed-form integrated likelihood over coefficients and innovation power."""
    n = len(x)
    R, p, r0 = batch_sums(x, m)
    if m:
        _, logdet = np.linalg.slogdet(R)
        tau = r0 - p @ np.linalg.solve(R, p)
    else:
        logdet, tau = 0.0, r0
    a = (n - 2 * m - 2) / 2
    return -math.log(2) - 0.5 * (n - 2 * m) * math.log(math.pi) - 0.5 * logdet + gammaln(a) - a * math.log(tau)


def log_c_cov(xs):
    n, m = xs.shape
    _, ld = np.linalg.slogdet(xs.T @ xs)
    a = n / 2 - (m + 1) / 2
    return multigammaln(a, m) - m * (m + 1) / 2 * LN2 - m * n / 2 * LN_PI - a * ld


def log_c_meanvar(xs):
    n, m = xs.shape
    c = (xs - xs.mean(axis=0)).T @ (xs - xs.mean(axis=0))
    _, ld = np.linalg.slogdet(c)
    a = (n - m - 2) / 2
    return multigammaln(a, m) - m * (n - 1) / 2 * LN_PI - m / 2 * math.log(n) - a * ld


# --- Monte Carlo oracles --------------------------------------------------------


def _mvn_pdf(x, mu, sig):
    m = sig.shape[-1]
    d = x - mu
    sol = np.linalg.solve(sig, d[..., None])[..., 0]
    _, ld = np.linalg.slogdet(sig)
    return np.exp(-0.5 * np.sum(d * sol, axis=-1) - 0.5 * ld - 0.5 * m * math.log(2 * math.pi))


def iw_predictive(history, x, draws, seed):
    """Average of N(x; 0, S) over S ~ InvWishart(n, sum x x^T)."""
    n = len(history)
    scatter = history.T @ history
    sig = stats.invwishart(df=n, scale=scatter).rvs(size=draws, random_state=seed)
    return float(np.mean(_mvn_pdf(x, np.zeros_like(x), sig)))


def niw_predictive(history, x, draws, seed):
    """Average of N(x; mu, S) over S ~ InvWishart(n-1, C), mu | S ~ N(mean, S/n)."""
    n = len(history)
    mean = history.mean(axis=0)
    c = (history - mean).T @ (history - mean)
    rng = np.random.default_rng(seed)
    sig = stats.invwishart(df=n - 1, scale=c).rvs(size=draws, random_state=rng)
    chol = np.linalg.cholesky(sig / n)
    mu = mean + np.einsum("kij,kj->ki", chol, rng.standard_normal((draws, len(x))))
    return float(np.mean(_mvn_pdf(x, mu, sig)))


def importance_mass(bits_fn, center, shape, draws, seed, df):
    """Mass of ``2**-bits_fn`` by importance sampling from a multivariate t.

    The proposal tails must be at least as heavy as the target's.
    """
    rng = np.random.default_rng(seed)
    prop = stats.multivariate_t(loc=center, shape=shape, df=df)
    pts = prop.rvs(size=draws, random_state=rng).reshape(draws, len(center))
    f = np.array([2.0 ** -bits_fn(p) for p in pts])
    return float(np.mean(f / prop.pdf(pts)))
