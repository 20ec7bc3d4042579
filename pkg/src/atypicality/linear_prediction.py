"""Normalized-likelihood coder for order-M linear prediction.

Both the prediction coefficients and the innovation power are unknown. The
likelihood is integrated over them in closed form, so the coder only needs
the lagged cross-products of the data. Lower orders code the samples that
come before order M becomes defined.
"""

from __future__ import annotations

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
    default_bits,
)
from .scalar import (
    GaussianStats,
    _history_sums,
    _nlm_var_matrix,
    _ssm_var_matrix,
    combine_stages,
    default_bits_matrix,
    nlm_var_step,
    ssm_var_step,
)

log = logging.getLogger(__name__)

LN_PI = math.log(math.pi)
EIG_FLOOR = 1e-12
TAU_FLOOR = 1e-12


def first_defined_history(order: int) -> int:
    """Smallest history length for which the order-``order`` density exists."""
    return 2 * order + 3


class LPState:
    """Lagged cross-products for an order-M predictor.

    ``R`` sums the outer products of the regressor vectors
    ``(x_{i-1}, ..., x_{i-M})`` for ``i = M+1..n``; ``p`` and ``r0`` are the
    matching cross-products with ``x_i`` and the energy of ``x_i``.
    """

    def __init__(self, order: int) -> None:
        if order < 0:
            raise InvalidArgumentError("order must be non-negative")
        self.order = order
        self.n = 0
        self.R = np.zeros((order, order))
        self.p = np.zeros(order)
        self.r0 = 0.0
        self._recent: list[float] = []

    def copy(self) -> "LPState":
        s = LPState(self.order)
        s.n = self.n
        s.R = self.R.copy()
        s.p = self.p.copy()
        s.r0 = self.r0
        s._recent = list(self._recent)
        return s

    def regressor(self) -> np.ndarray:
        """``(x_n, x_{n-1}, ..., x_{n-M+1})`` or None before M samples."""
        if len(self._recent) < self.order:
            return None
        return np.array(self._recent[::-1][: self.order])

    def update(self, x: float) -> None:
        if self.n >= self.order:
            v = self.regressor()
            if self.order:
                self.R += np.outer(v, v)
                self.p += x * v
            self.r0 += x * x
        self.n += 1
        if self.order:
            self._recent.append(x)
            if len(self._recent) > self.order:
                self._recent.pop(0)

    @classmethod
    def from_samples(cls, order: int, xs) -> "LPState":
        s = cls(order)
        for x in xs:
            s.update(float(x))
        return s

    def factor(self):
        """``(logdet R, R^{-1} p, tau_hat)``; raises on a singular state."""
        if self.order == 0:
            tau = self.r0
            if tau <= 0:
                raise DegenerateStateError("zero residual power")
            return 0.0, np.zeros(0), tau
        lam, vec = np.linalg.eigh(self.R)
        if lam[0] <= EIG_FLOOR * max(lam[-1], 0.0) or lam[-1] <= 0:
            raise DegenerateStateError("regressor matrix is singular")
        logdet = float(np.sum(np.log(lam)))
        w = vec @ ((vec.T @ self.p) / lam)
        tau = self.r0 - float(self.p @ w)
        if tau <= TAU_FLOOR * self.r0:
            if tau < 0:
                log.debug("clamping negative residual power %g", tau)
            raise DegenerateStateError("zero residual power")
        return logdet, w, tau

    @property
    def tau_hat(self) -> float:
        return self.factor()[2]

    def coefficients(self) -> np.ndarray:
        return self.factor()[1]


def log_normalizer(state: LPState) -> float:
    """Natural log of the integrated likelihood of the history, ``ln C(x^n)``."""
    m, n = state.order, state.n
    if n < first_defined_history(m):
        raise NotYetDefinedError(f"order {m} needs {first_defined_history(m)} samples")
    logdet, _, tau = state.factor()
    a = (n - 2 * m - 2) / 2
    return -math.log(2.0) - 0.5 * (n - 2 * m) * LN_PI - 0.5 * logdet + gammaln(a) - a * math.log(tau)


def nlm_lp_step(state: LPState, x: float) -> float:
    """Bits for ``x`` under the order-M normalized-likelihood predictor."""
    m, n = state.order, state.n
    if n < first_defined_history(m):
        raise NotYetDefinedError(f"order {m} needs {first_defined_history(m)} samples of history")
    logdet, _, tau = state.factor()
    if m:
        # rank-1 determinant update: det(R + v v^T) = det(R) (1 + v^T R^{-1} v)
        v = state.regressor()
        lam, vec = np.linalg.eigh(state.R)
        dlogdet = math.log1p(float(np.sum((vec.T @ v) ** 2 / lam)))
    else:
        dlogdet = 0.0
    nxt = state.copy()
    nxt.update(float(x))
    tau1 = nxt.factor()[2]
    a = (n - 2 * m - 2) / 2
    ln_f = (
        -0.5 * dlogdet + gammaln(a + 0.5) - gammaln(a) - 0.5 * LN_PI
        + a * math.log(tau) - (a + 0.5) * math.log(tau1)
    )
    return -ln_f / LN2


class LinearPredictionCoder(SequentialCoder):
    """Staged linear-prediction coder up to order ``max_order``.

    Sample 1 uses the default density, samples 2 and 3 the unknown-variance
    SSM coder, and from then on the highest order whose density is defined
    (order 0 being the unknown-variance NLM coder). A degenerate order falls
    back to the next lower one for that step.
    """

    def __init__(self, max_order: int) -> None:
        if max_order < 0:
            raise InvalidArgumentError("max_order must be non-negative")
        self.max_order = max_order
        super().__init__()
        self._reset_state()

    def _reset_state(self) -> None:
        self.stats = GaussianStats()
        self.states = [LPState(m) for m in range(1, self.max_order + 1)]

    def order_used(self) -> int | None:
        """Order that codes the next sample, -1 for the SSM stage, None for default."""
        return self._pick(0.0)[0]

    def _pick(self, x: float):
        n = self.stats.n
        if n >= 3:
            for m in range(self.max_order, 0, -1):
                if n >= first_defined_history(m):
                    try:
                        return m, nlm_lp_step(self.states[m - 1], x)
                    except DegenerateStateError:
                        pass
            try:
                return 0, nlm_var_step(self.stats, x)
            except DegenerateStateError:
                pass
        if n >= 1:
            try:
                return -1, ssm_var_step(self.stats, x)
            except DegenerateStateError:
                pass
        return None, default_bits(x)

    def bits_next(self, x) -> float:
        return self._pick(float(x))[1]

    def _update(self, x) -> None:
        x = float(x)
        self.stats.update(x)
        for s in self.states:
            s.update(x)


def lp_coder_chain(max_order: int, samples) -> float:
    """Total bits of the staged linear-prediction coder on ``samples``."""
    if max_order < 1:
        raise InvalidArgumentError("max_order must be at least 1")
    coder = LinearPredictionCoder(max_order)
    coder.run(samples)
    return coder.total()


# --- vectorised evaluation over many windows --------------------------------


def _lagged_sums(w: np.ndarray, order: int):
    """Exclusive cumulative lagged products for every history length 0..L.

    Returns a dict ``(j, k) -> (B, L+1)`` array with entry ``[:, n]`` equal to
    ``sum_{t=order}^{n-1} w[:, t-j] * w[:, t-k]`` (0-based columns).
    """
    b, l = w.shape
    out = {}
    for j in range(order + 1):
        for k in range(j, order + 1):
            prod = np.zeros((b, l))
            if l > order:
                prod[:, order:] = w[:, order - j : l - j] * w[:, order - k : l - k]
            c = np.zeros((b, l + 1))
            np.cumsum(prod, axis=1, out=c[:, 1:])
            out[j, k] = c
    return out


def _log_normalizer_matrix(w: np.ndarray, order: int) -> np.ndarray:
    """``ln C`` of the order-``order`` predictor for every window and history."""
    b, l = w.shape
    q = _lagged_sums(w, order)
    n = np.arange(l + 1, dtype=float)[None, :]
    r0 = q[0, 0]
    if order == 1:
        r = q[1, 1]
        p = q[0, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = r0 - p * p / r
            logdet = np.log(r)
        ok = r > 0
    elif order == 2:
        a, bb, c = q[1, 1], q[1, 2], q[2, 2]
        p1, p2 = q[0, 1], q[0, 2]
        det = a * c - bb * bb
        half_tr = 0.5 * (a + c)
        disc = np.sqrt(np.maximum((0.5 * (a - c)) ** 2 + bb * bb, 0.0))
        lam_min, lam_max = half_tr - disc, half_tr + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            quad = (c * p1 * p1 - 2 * bb * p1 * p2 + a * p2 * p2) / det
            tau = r0 - quad
            logdet = np.log(lam_min) + np.log(lam_max)
        ok = (lam_max > 0) & (lam_min > EIG_FLOOR * lam_max)
    else:
        R = np.empty((b, l + 1, order, order))
        P = np.empty((b, l + 1, order))
        for j in range(1, order + 1):
            P[..., j - 1] = q[0, j]
            for k in range(j, order + 1):
                R[..., j - 1, k - 1] = q[j, k]
                R[..., k - 1, j - 1] = q[j, k]
        lam, vec = np.linalg.eigh(R)
        ok = (lam[..., -1] > 0) & (lam[..., 0] > EIG_FLOOR * lam[..., -1])
        with np.errstate(divide="ignore", invalid="ignore"):
            proj = np.einsum("...ji,...j->...i", vec, P)
            quad = np.sum(proj * proj / lam, axis=-1)
            tau = r0 - quad
            logdet = np.sum(np.log(np.where(lam > 0, lam, np.nan)), axis=-1)
    ok = ok & (tau > TAU_FLOOR * r0) & (n >= first_defined_history(order))
    a_ = (n - 2 * order - 2) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_c = -math.log(2.0) - 0.5 * (n - 2 * order) * LN_PI - 0.5 * logdet + gammaln(a_) - a_ * np.log(tau)
    return np.where(ok, ln_c, np.nan)


def lp_chain_bits_matrix(w, max_order: int) -> np.ndarray:
    """Per-step bits of :class:`LinearPredictionCoder` over each row of ``w``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise InvalidArgumentError("expected a 2-D array of windows")
    n, s1, s2 = _history_sums(w)
    cands = []
    for m in range(max_order, 0, -1):
        ln_c = _log_normalizer_matrix(w, m)
        cands.append((ln_c[:, :-1] - ln_c[:, 1:]) / LN2)
    cands.append(_nlm_var_matrix(w, n, s1, s2))
    cands.append(_ssm_var_matrix(w, n, s1, s2))
    return combine_stages(cands, default_bits_matrix(w))


def fit_ar_least_squares(x, order: int):
    """Least-squares AR fit; returns ``(coefficients, innovation variance)``.

    Coefficients predict ``x[t]`` from ``(x[t-1], ..., x[t-order])``.
    """
    x = np.asarray(x, dtype=float)
    if x.size <= order:
        raise InvalidArgumentError("not enough samples for the requested order")
    if order == 0:
        return np.zeros(0), float(np.mean(x * x))
    X = np.column_stack([x[order - k : x.size - k] for k in range(1, order + 1)])
    y = x[order:]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return coef, float(np.mean(resid * resid))
