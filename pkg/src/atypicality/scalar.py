"""Sequential coders for scalar iid Gaussian data with unknown parameters.

Each ``*_step`` function returns the bits of ``x`` given the running
statistics of the history. The coder classes chain them together with a
startup sequence so that every sample, including the first, gets coded.
The ``*_bits_matrix`` functions evaluate the same chains for many windows at
once (one window per row) and are what the scanner uses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .codelength import (
    HALF_LOG2_2PI,
    LN2,
    DegenerateStateError,
    InvalidArgumentError,
    NotYetDefinedError,
    SequentialCoder,
    default_bits,
)

log = logging.getLogger(__name__)

HALF_LN_PI = 0.5 * math.log(math.pi)
# centred scatter below this fraction of the raw second moment counts as zero
REL_VARIANCE_FLOOR = 1e-12


@dataclass
class GaussianStats:
    """Running count, mean, centred scatter and raw sum of squares."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    sumsq: float = 0.0

    def update(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)
        self.sumsq += x * x

    def updated(self, x: float) -> "GaussianStats":
        s = GaussianStats(self.n, self.mean, self.m2, self.sumsq)
        s.update(x)
        return s

    @classmethod
    def from_samples(cls, xs) -> "GaussianStats":
        s = cls()
        for x in xs:
            s.update(float(x))
        return s

    @property
    def total(self) -> float:
        return self.mean * self.n

    @property
    def sigma2_hat(self) -> float:
        """ML variance for a zero-mean model, ``sum x^2 / n``."""
        return self.sumsq / self.n

    @property
    def centred_scatter(self) -> float:
        """``sum (x_i - mean)^2``, clamped at zero."""
        if self.m2 < 0:
            log.debug("clamping negative centred scatter %g", self.m2)
            return 0.0
        return self.m2

    @property
    def s2(self) -> float:
        """Unbiased sample variance ``S_n^2``."""
        return self.centred_scatter / (self.n - 1)

    def has_spread(self) -> bool:
        return self.centred_scatter > REL_VARIANCE_FLOOR * self.sumsq


def _check_n(stats: GaussianStats, n_min: int) -> None:
    if stats.n < n_min:
        raise NotYetDefinedError(f"needs at least {n_min} samples of history, have {stats.n}")


def ssm_var_step(stats: GaussianStats, x: float) -> float:
    """Zero-mean, unknown-variance sufficient-statistic coder."""
    _check_n(stats, 1)
    if stats.sumsq <= 0:
        raise DegenerateStateError("all-zero history")
    n = stats.n
    a = stats.sumsq
    b = a + x * x
    ln_f = gammaln((n + 1) / 2) - gammaln(n / 2) - HALF_LN_PI + 0.5 * n * math.log(a) - 0.5 * (n + 1) * math.log(b)
    return -ln_f / LN2


def nlm_var_step(stats: GaussianStats, x: float) -> float:
    """Zero-mean, unknown-variance normalized-likelihood coder (history >= 3)."""
    _check_n(stats, 3)
    if stats.sumsq <= 0:
        raise DegenerateStateError("all-zero history")
    n = stats.n
    a = stats.sumsq
    b = a + x * x
    ln_f = (
        gammaln((n - 1) / 2) - gammaln((n - 2) / 2) - HALF_LN_PI
        + 0.5 * (n - 2) * math.log(a) - 0.5 * (n - 1) * math.log(b)
    )
    return -ln_f / LN2


def ssm_meanvar_step(stats: GaussianStats, x: float) -> float:
    """Unknown mean and variance, sufficient-statistic coder (history >= 2)."""
    _check_n(stats, 2)
    if not stats.has_spread():
        raise DegenerateStateError("history has zero sample variance")
    n = stats.n
    c_n = stats.centred_scatter
    c_n1 = stats.updated(x).centred_scatter
    ln_f = (
        0.5 * math.log(n / (math.pi * (n + 1)))
        + gammaln(n / 2) - gammaln((n - 1) / 2)
        + 0.5 * (n - 1) * math.log(c_n) - 0.5 * n * math.log(c_n1)
    )
    return -ln_f / LN2


def nlm_meanvar_step(stats: GaussianStats, x: float) -> float:
    """Unknown mean and variance, normalized-likelihood coder (history >= 4)."""
    _check_n(stats, 4)
    if not stats.has_spread():
        raise DegenerateStateError("history has zero sample variance")
    n = stats.n
    c_n = stats.centred_scatter
    c_n1 = stats.updated(x).centred_scatter
    ln_f = (
        -HALF_LN_PI + 0.5 * math.log(n / (n + 1))
        + gammaln((n - 2) / 2) - gammaln((n - 3) / 2)
        + 0.5 * (n - 3) * math.log(c_n) - 0.5 * (n - 2) * math.log(c_n1)
    )
    return -ln_f / LN2


def predictive_mdl_var_step(stats: GaussianStats, x: float) -> float:
    """Plug-in (ordinary predictive MDL) zero-mean Gaussian with ML variance."""
    _check_n(stats, 1)
    if stats.sumsq <= 0:
        raise DegenerateStateError("all-zero history")
    v = stats.sigma2_hat
    return 0.5 * math.log2(2 * math.pi * v) + x * x / (2 * v * LN2)


class ChainCoder(SequentialCoder):
    """Scalar coder that picks, per step, the most specific defined stage.

    ``stages`` is a list of ``(min_history, step_fn)``. The stage with the
    largest ``min_history`` not exceeding the current history is tried first;
    degenerate states fall back to earlier stages and finally to the default
    density.
    """

    stages: tuple = ()

    def __init__(self) -> None:
        super().__init__()
        self.stats = GaussianStats()

    def _reset_state(self) -> None:
        self.stats = GaussianStats()

    def bits_next(self, x) -> float:
        x = float(x)
        n = self.stats.n
        for n_min, fn in sorted(self.stages, key=lambda s: -s[0]):
            if n < n_min:
                continue
            try:
                return fn(self.stats, x)
            except DegenerateStateError:
                continue
        return default_bits(x)

    def _update(self, x) -> None:
        self.stats.update(float(x))


class VarianceSSMCoder(ChainCoder):
    stages = ((1, ssm_var_step),)


class VarianceNLMCoder(ChainCoder):
    stages = ((1, ssm_var_step), (3, nlm_var_step))


class MeanVarianceSSMCoder(ChainCoder):
    stages = ((1, ssm_var_step), (2, ssm_meanvar_step))


class MeanVarianceNLMCoder(ChainCoder):
    stages = ((1, ssm_var_step), (2, ssm_meanvar_step), (4, nlm_meanvar_step))


class PredictiveMDLCoder(ChainCoder):
    stages = ((1, predictive_mdl_var_step),)


# --- vectorised evaluation over many windows --------------------------------


def _history_sums(w: np.ndarray):
    """Per-row history statistics for coding column ``j`` from columns ``< j``."""
    w = np.asarray(w, dtype=float)
    b, l = w.shape
    n = np.arange(l, dtype=float)[None, :]
    zeros = np.zeros((b, 1))
    s1 = np.concatenate([zeros, np.cumsum(w, axis=1)[:, :-1]], axis=1)
    s2 = np.concatenate([zeros, np.cumsum(w * w, axis=1)[:, :-1]], axis=1)
    return n, s1, s2


def _centred(n, s1, s2):
    with np.errstate(divide="ignore", invalid="ignore"):
        c = s2 - np.where(n > 0, s1 * s1 / n, 0.0)
    return np.maximum(c, 0.0)


def _ssm_var_matrix(w, n, s1, s2):
    a = s2
    b = s2 + w * w
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_f = gammaln((n + 1) / 2) - gammaln(n / 2) - HALF_LN_PI + 0.5 * n * np.log(a) - 0.5 * (n + 1) * np.log(b)
    ok = (n >= 1) & (a > 0)
    return np.where(ok, -ln_f / LN2, np.nan)


def _nlm_var_matrix(w, n, s1, s2):
    a = s2
    b = s2 + w * w
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_f = (
            gammaln((n - 1) / 2) - gammaln((n - 2) / 2) - HALF_LN_PI
            + 0.5 * (n - 2) * np.log(a) - 0.5 * (n - 1) * np.log(b)
        )
    ok = (n >= 3) & (a > 0)
    return np.where(ok, -ln_f / LN2, np.nan)


def _meanvar_parts(w, n, s1, s2):
    c_n = _centred(n, s1, s2)
    c_n1 = _centred(n + 1, s1 + w, s2 + w * w)
    spread = c_n > REL_VARIANCE_FLOOR * s2
    return c_n, c_n1, spread


def _ssm_meanvar_matrix(w, n, s1, s2):
    c_n, c_n1, spread = _meanvar_parts(w, n, s1, s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_f = (
            0.5 * np.log(n / (np.pi * (n + 1)))
            + gammaln(n / 2) - gammaln((n - 1) / 2)
            + 0.5 * (n - 1) * np.log(c_n) - 0.5 * n * np.log(c_n1)
        )
    ok = (n >= 2) & spread
    return np.where(ok, -ln_f / LN2, np.nan)


def _nlm_meanvar_matrix(w, n, s1, s2):
    c_n, c_n1, spread = _meanvar_parts(w, n, s1, s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_f = (
            -HALF_LN_PI + 0.5 * np.log(n / (n + 1))
            + gammaln((n - 2) / 2) - gammaln((n - 3) / 2)
            + 0.5 * (n - 3) * np.log(c_n) - 0.5 * (n - 2) * np.log(c_n1)
        )
    ok = (n >= 4) & spread
    return np.where(ok, -ln_f / LN2, np.nan)


def _op_matrix(w, n, s1, s2):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = s2 / n
        bits = 0.5 * np.log2(2 * np.pi * v) + w * w / (2 * v * LN2)
    ok = (n >= 1) & (s2 > 0)
    return np.where(ok, bits, np.nan)


def default_bits_matrix(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return HALF_LOG2_2PI + w * w / (2 * LN2)


def combine_stages(candidates, fallback: np.ndarray) -> np.ndarray:
    """First non-nan entry among ``candidates`` (most specific first)."""
    out = fallback.copy()
    for c in reversed(candidates):
        out = np.where(np.isnan(c), out, c)
    return out


_MATRIX_STAGES = {
    VarianceSSMCoder: (_ssm_var_matrix,),
    VarianceNLMCoder: (_nlm_var_matrix, _ssm_var_matrix),
    MeanVarianceSSMCoder: (_ssm_meanvar_matrix, _ssm_var_matrix),
    MeanVarianceNLMCoder: (_nlm_meanvar_matrix, _ssm_meanvar_matrix, _ssm_var_matrix),
    PredictiveMDLCoder: (_op_matrix,),
}


def chain_bits_matrix(coder_cls: type, w) -> np.ndarray:
    """Per-step bits of ``coder_cls`` run independently over each row of ``w``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise InvalidArgumentError("expected a 2-D array of windows")
    n, s1, s2 = _history_sums(w)
    cands = [fn(w, n, s1, s2) for fn in _MATRIX_STAGES[coder_cls]]
    return combine_stages(cands, default_bits_matrix(w))


def iid_meanvar_bits(x) -> float:
    """Total bits of the unknown mean/variance SSM chain on a 1-D block."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(chain_bits_matrix(MeanVarianceSSMCoder, x[None, :]).sum())


def iid_var_bits(x) -> float:
    """Total bits of the zero-mean unknown-variance SSM chain on a 1-D block."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(chain_bits_matrix(VarianceSSMCoder, x[None, :]).sum())


def redundancy_experiment(mu: float, var: float, l: int, trials: int, seed: int):
    """Redundancy samples of the SSM and plug-in coders on iid Gaussian data.

    Returns ``(ssm, op)``: per-trial codelength minus the ideal codelength
    under the true density. The SSM side is the unknown mean/variance chain,
    the plug-in side is the ordinary predictive coder with the default
    density for the first sample.
    """
    if l < 3:
        raise InvalidArgumentError("l must be at least 3")
    if trials < 1:
        raise InvalidArgumentError("trials must be positive")
    if var <= 0:
        raise InvalidArgumentError("variance must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    x = mu + math.sqrt(var) * rng.standard_normal((trials, l))
    ideal = (0.5 * math.log2(2 * math.pi * var) + (x - mu) ** 2 / (2 * var * LN2)).sum(axis=1)
    ssm = chain_bits_matrix(MeanVarianceSSMCoder, x).sum(axis=1) - ideal
    op = chain_bits_matrix(PredictiveMDLCoder, x).sum(axis=1) - ideal
    return ssm, op


def upper_tail_comparison(ssm: np.ndarray, op: np.ndarray, q: float = 0.99) -> tuple[float, float, float]:
    """``(threshold, P(ssm > t), P(op > t))`` with ``t`` the ``q`` quantile of ``op``."""
    t = float(np.quantile(op, q))
    return t, float(np.mean(ssm > t)), float(np.mean(op > t))
