"""Sequential coders for M-dimensional Gaussian vectors.

Covers unknown mean with known covariance, unknown covariance (SSM and
NLM), and unknown mean and covariance (SSM and NLM). Determinant ratios
between consecutive histories use the rank-1 update identity.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
from scipy.special import gammaln

from .codelength import (
    LN2,
    DegenerateStateError,
    InvalidArgumentError,
    NotYetDefinedError,
    SequentialCoder,
)
from .scalar import MeanVarianceSSMCoder

log = logging.getLogger(__name__)

LN_PI = math.log(math.pi)
EIG_FLOOR = 1e-12


def log_multivariate_gamma(m: int, a: float) -> float:
    """``ln Gamma_m(a)`` from the product of scalar gamma functions."""
    if m < 1:
        raise InvalidArgumentError("dimension must be positive")
    if a <= (m - 1) / 2:
        raise InvalidArgumentError(f"Gamma_{m}(a) needs a > {(m - 1) / 2}, got {a}")
    j = np.arange(1, m + 1)
    return float(m * (m - 1) / 4 * LN_PI + np.sum(gammaln(a + (1 - j) / 2)))


class VectorStats:
    """Running mean, centred scatter and uncentred scatter of M-vectors."""

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise InvalidArgumentError("dimension must be positive")
        self.dim = dim
        self.n = 0
        self.mean = np.zeros(dim)
        self.centred = np.zeros((dim, dim))
        self.uncentred = np.zeros((dim, dim))

    def copy(self) -> "VectorStats":
        s = VectorStats(self.dim)
        s.n = self.n
        s.mean = self.mean.copy()
        s.centred = self.centred.copy()
        s.uncentred = self.uncentred.copy()
        return s

    def update(self, x) -> None:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        self.n += 1
        d = x - self.mean
        self.mean = self.mean + d / self.n
        self.centred = self.centred + np.outer(d, x - self.mean)
        self.centred = 0.5 * (self.centred + self.centred.T)
        self.uncentred = self.uncentred + np.outer(x, x)

    @classmethod
    def from_samples(cls, xs) -> "VectorStats":
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        s = cls(xs.shape[1])
        for x in xs:
            s.update(x)
        return s


def _factor(a: np.ndarray):
    """``(logdet, eigenvalues, eigenvectors)`` of a symmetric PD matrix."""
    lam, vec = np.linalg.eigh(a)
    if lam[-1] <= 0 or lam[0] <= EIG_FLOOR * np.trace(a):
        raise DegenerateStateError("scatter matrix is singular")
    return float(np.sum(np.log(lam))), lam, vec


def _quad_inv(lam, vec, v) -> float:
    return float(np.sum((vec.T @ v) ** 2 / lam))


def _check(stats: VectorStats, x, n_min: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != stats.dim:
        raise InvalidArgumentError(f"expected a {stats.dim}-vector")
    if stats.n < n_min:
        raise NotYetDefinedError(f"needs at least {n_min} vectors of history, have {stats.n}")
    return x


def vec_mean_step(stats: VectorStats, sigma, x) -> float:
    """Unknown mean, known covariance ``sigma`` (history >= 1)."""
    x = _check(stats, x, 1)
    sigma = np.asarray(sigma, dtype=float).reshape(stats.dim, stats.dim)
    try:
        logdet_sigma, lam, vec = _factor(sigma)
    except DegenerateStateError as exc:
        raise InvalidArgumentError("covariance must be positive definite") from exc
    k, n = stats.dim, stats.n
    prec = (vec / lam) @ vec.T
    nxt = stats.copy()
    nxt.update(x)

    def resid(s: VectorStats) -> np.ndarray:
        return s.uncentred - s.n * np.outer(s.mean, s.mean)

    ln_f = (
        0.5 * k * math.log(n / (n + 1)) - 0.5 * k * math.log(2 * math.pi) - 0.5 * logdet_sigma
        - 0.5 * np.trace(resid(nxt) @ prec) + 0.5 * np.trace(resid(stats) @ prec)
    )
    return -ln_f / LN2


def ssm_cov_step(stats: VectorStats, x) -> float:
    """Zero mean, unknown covariance, sufficient-statistic coder (history >= M)."""
    x = _check(stats, x, stats.dim)
    m, n = stats.dim, stats.n
    try:
        logdet, lam, vec = _factor(stats.uncentred)
    except DegenerateStateError as exc:
        raise NotYetDefinedError("uncentred scatter not yet full rank") from exc
    logdet1 = logdet + math.log1p(_quad_inv(lam, vec, x))
    ln_f = (
        -0.5 * m * LN_PI + 0.5 * n * logdet - 0.5 * (n + 1) * logdet1
        + log_multivariate_gamma(m, (n + 1) / 2) - log_multivariate_gamma(m, n / 2)
    )
    return -ln_f / LN2


def nlm_cov_step(stats: VectorStats, x) -> float:
    """Zero mean, unknown covariance, normalized-likelihood coder (history >= 2M+1)."""
    m = stats.dim
    x = _check(stats, x, 2 * m + 1)
    n = stats.n
    logdet, lam, vec = _factor(stats.uncentred)
    logdet1 = logdet + math.log1p(_quad_inv(lam, vec, x))
    ln_f = (
        -0.5 * m * LN_PI + 0.5 * (n - m - 1) * logdet - 0.5 * (n - m) * logdet1
        + log_multivariate_gamma(m, (n - m) / 2) - log_multivariate_gamma(m, (n - m - 1) / 2)
    )
    return -ln_f / LN2


def _centred_update(stats: VectorStats, x):
    logdet, lam, vec = _factor(stats.centred)
    n = stats.n
    d = x - stats.mean
    logdet1 = logdet + math.log1p(n / (n + 1) * _quad_inv(lam, vec, d))
    return logdet, logdet1


def ssm_meanvar_vec_step(stats: VectorStats, x) -> float:
    """Unknown mean and covariance, sufficient-statistic coder (history >= M+1)."""
    m = stats.dim
    x = _check(stats, x, m + 1)
    n = stats.n
    logdet, logdet1 = _centred_update(stats, x)
    ln_f = (
        -0.5 * m * LN_PI + 0.5 * m * math.log(n / (n + 1))
        + 0.5 * (n - 1) * logdet - 0.5 * n * logdet1
        + log_multivariate_gamma(m, n / 2) - log_multivariate_gamma(m, (n - 1) / 2)
    )
    return -ln_f / LN2


def nlm_meanvar_vec_step(stats: VectorStats, x) -> float:
    """Unknown mean and covariance, normalized-likelihood coder (history >= 2M+2)."""
    m = stats.dim
    x = _check(stats, x, 2 * m + 2)
    n = stats.n
    logdet, logdet1 = _centred_update(stats, x)
    ln_f = (
        -0.5 * m * LN_PI + 0.5 * m * math.log(n / (n + 1))
        + 0.5 * (n - m - 2) * logdet - 0.5 * (n - m - 1) * logdet1
        + log_multivariate_gamma(m, (n - m - 1) / 2) - log_multivariate_gamma(m, (n - m - 2) / 2)
    )
    return -ln_f / LN2


def first_vector_bits(x1) -> float:
    """Bits for the first vector, coded as a scalar stream."""
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    if x1.size < 1:
        raise InvalidArgumentError("empty vector")
    coder = MeanVarianceSSMCoder()
    coder.run(x1)
    return coder.total()


class VectorCoder(SequentialCoder):
    """Vector coder with the scalar-stream startup.

    Every vector's entries are also fed to a scalar unknown mean/variance
    coder. Whenever the vector density is not yet defined, or the scatter is
    singular, the vector is coded entry by entry through that scalar coder.
    """

    def __init__(self, dim: int, step_fn, sigma=None) -> None:
        self.dim = dim
        self.step_fn = step_fn
        self.sigma = None if sigma is None else np.asarray(sigma, dtype=float)
        super().__init__()
        self._reset_state()

    def _reset_state(self) -> None:
        self.stats = VectorStats(self.dim)
        self.scalar = MeanVarianceSSMCoder()

    def bits_next(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        try:
            if self.sigma is not None:
                return self.step_fn(self.stats, self.sigma, x)
            return self.step_fn(self.stats, x)
        except (NotYetDefinedError, DegenerateStateError):
            pass
        probe = MeanVarianceSSMCoder()
        probe.stats = dataclasses.replace(self.scalar.stats)
        bits = 0.0
        for v in x:
            bits += probe.step(v)
        return bits

    def _update(self, x) -> None:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        self.stats.update(x)
        for v in x:
            self.scalar.step(v)
