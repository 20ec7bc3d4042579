"""Sparse orthonormal-transform coder for blocks of M-vectors.

Each vector is rotated into a fixed orthonormal basis. A few coordinates
carrying most of the power are coded as separate iid Gaussian signals with
unknown mean and variance; the rest share a single unknown noise power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.special import gammaln

from .codelength import LN2, DegenerateStateError, InvalidArgumentError
from .scalar import VarianceSSMCoder, iid_meanvar_bits

HALF_LN_PI = 0.5 * math.log(math.pi)


def dct_basis(m: int) -> np.ndarray:
    """Orthonormal DCT-II basis; column ``j`` is the ``j``-th basis vector."""
    return dct(np.eye(m), norm="ortho", axis=0).T


def identity_basis(m: int) -> np.ndarray:
    return np.eye(m)


def real_dft_basis(m: int) -> np.ndarray:
    """Real orthonormal Fourier basis: constant, cos/sin pairs, Nyquist."""
    t = np.arange(m)
    cols = [np.full(m, 1 / math.sqrt(m))]
    for k in range(1, (m - 1) // 2 + 1):
        cols.append(math.sqrt(2 / m) * np.cos(2 * np.pi * k * t / m))
        cols.append(math.sqrt(2 / m) * np.sin(2 * np.pi * k * t / m))
    if m % 2 == 0:
        cols.append((-1.0) ** t / math.sqrt(m))
    return np.column_stack(cols)


BASES = {"dct": dct_basis, "identity": identity_basis, "rdft": real_dft_basis}


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def subset_cost(m: int, n: int) -> float:
    """Bits to tell the decoder which ``n`` of ``m`` coordinates are signal."""
    if not 0 <= n <= m:
        raise InvalidArgumentError("need 0 <= n <= m")
    return m * binary_entropy(n / m) + 0.5 * math.log2(m)


@dataclass
class NoisePoolStats:
    """Vector count and total energy of the pooled noise coordinates."""

    dim: int
    n: int = 0
    energy: float = 0.0

    def update(self, w) -> None:
        w = np.asarray(w, dtype=float)
        self.n += 1
        self.energy += float(w @ w)


def noise_pool_step(stats: NoisePoolStats, w) -> float:
    """Bits for the next noise vector under a shared unknown noise power."""
    w = np.asarray(w, dtype=float).reshape(-1)
    d = stats.dim
    if w.size != d:
        raise InvalidArgumentError(f"expected a {d}-vector")
    if stats.n < 1:
        raise InvalidArgumentError("needs at least one vector of history")
    if stats.energy <= 0:
        raise DegenerateStateError("zero noise energy")
    n = stats.n
    e_n = stats.energy
    e_n1 = e_n + float(w @ w)
    ln_f = (
        -d * HALF_LN_PI + gammaln(d * (n + 1) / 2) - gammaln(d * n / 2)
        + 0.5 * d * n * math.log(e_n) - 0.5 * d * (n + 1) * math.log(e_n1)
    )
    return -ln_f / LN2


def noise_pool_bits(w) -> float:
    """Total bits for an ``(l, d)`` block of noise vectors.

    The first vector is coded as a scalar stream with the zero-mean
    unknown-variance coder; degenerate steps use that scalar coder too.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise InvalidArgumentError("expected an (l, d) array")
    l, d = w.shape
    if l == 0 or d == 0:
        return 0.0
    scalar = VarianceSSMCoder()
    stats = NoisePoolStats(d)
    bits = 0.0
    for i, v in enumerate(w):
        step = None
        if i > 0:
            try:
                step = noise_pool_step(stats, v)
            except DegenerateStateError:
                step = None
        if step is None:
            probe = VarianceSSMCoder()
            probe.stats.n, probe.stats.sumsq = scalar.stats.n, scalar.stats.sumsq
            step = sum(probe.step(e) for e in v)
        bits += step
        stats.update(v)
        for e in v:
            scalar.step(e)
    return bits


def transform(block, basis: np.ndarray) -> np.ndarray:
    """Rows ``y_n = Phi^T x_n`` for a block of row vectors ``x_n``."""
    return np.asarray(block, dtype=float) @ basis


def select_components(block, basis: np.ndarray, n: int) -> np.ndarray:
    """Indices of the ``n`` coordinates with the most power over the block."""
    m = basis.shape[1]
    if not 0 <= n <= m:
        raise InvalidArgumentError("need 0 <= n <= m")
    y = transform(block, basis)
    power = np.sum(y * y, axis=0)
    order = np.argsort(-power, kind="stable")
    return np.sort(order[:n])


@dataclass(frozen=True)
class SparseResult:
    bits: float
    n_signal: int
    indices: tuple[int, ...]
    totals: tuple[float, ...]


def sparse_block_bits(block, basis: np.ndarray, n_max: int | None = None) -> SparseResult:
    """Codelength of a block with greedy choice of the number of signal coordinates.

    ``N`` grows from 0 and stops at the first increase of the total; the
    incumbent is returned.
    """
    block = np.atleast_2d(np.asarray(block, dtype=float))
    l, m = block.shape
    if basis.shape != (m, m):
        raise InvalidArgumentError("basis does not match vector dimension")
    n_max = m if n_max is None else n_max
    if not 0 <= n_max <= m:
        raise InvalidArgumentError("need 0 <= n_max <= m")
    y = transform(block, basis)
    power = np.sum(y * y, axis=0)
    order = np.argsort(-power, kind="stable")
    signal_bits = {}

    def total(n: int) -> float:
        chosen = order[:n]
        rest = np.sort(order[n:])
        for j in chosen:
            if j not in signal_bits:
                signal_bits[j] = iid_meanvar_bits(y[:, j])
        return subset_cost(m, n) + sum(signal_bits[j] for j in chosen) + noise_pool_bits(y[:, rest])

    totals = [total(0)]
    best = 0
    for n in range(1, n_max + 1):
        t = total(n)
        totals.append(t)
        if t > totals[-2]:
            break
        best = n
    return SparseResult(totals[best], best, tuple(int(j) for j in np.sort(order[:best])), tuple(totals))


def sparse_series_bits(x, m: int, basis: np.ndarray | None = None, n_max: int | None = None) -> float:
    """Bits for a scalar series cut into non-overlapping length-``m`` blocks.

    A trailing partial block is coded with the scalar unknown mean/variance
    chain.
    """
    x = np.asarray(x, dtype=float)
    basis = dct_basis(m) if basis is None else basis
    k = x.size // m
    bits = 0.0
    if k:
        bits += sparse_block_bits(x[: k * m].reshape(k, m), basis, n_max).bits
    tail = x[k * m :]
    if tail.size:
        bits += iid_meanvar_bits(tail)
    return bits
