"""Codelength algebra shared by every coder.

All codelengths are in bits. The fixed-point precision term of a real-valued
codelength is dropped everywhere since only differences of codelengths are
ever compared.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

LN2 = math.log(2.0)
HALF_LOG2_2PI = 0.5 * math.log2(2.0 * math.pi)


class AtypicalityError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(AtypicalityError, ValueError):
    pass


class DegenerateStateError(AtypicalityError):
    """Sufficient statistics are singular (e.g. an all-zero history)."""


class NotYetDefinedError(AtypicalityError):
    """The predictive density needs more samples before it exists."""


def nats_to_bits(x):
    return x / LN2


def default_bits(x: float) -> float:
    """Codelength of ``x`` under the standard normal default density."""
    return HALF_LOG2_2PI + x * x / (2.0 * LN2)


class SequentialCoder(ABC):
    """Stateful coder mapping the next sample to its incremental codelength.

    Subclasses implement :meth:`bits_next` (pure, does not touch state) and
    :meth:`_update`. ``step`` is their composition and keeps a running total.
    """

    def __init__(self) -> None:
        self._total = 0.0
        self._count = 0

    def reset(self) -> None:
        self._total = 0.0
        self._count = 0
        self._reset_state()

    @abstractmethod
    def _reset_state(self) -> None: ...

    @abstractmethod
    def bits_next(self, x) -> float:
        """Bits for ``x`` as the next sample given the current history."""

    @abstractmethod
    def _update(self, x) -> None: ...

    def step(self, x) -> float:
        bits = self.bits_next(x)
        self._update(x)
        self._total += bits
        self._count += 1
        return bits

    def total(self) -> float:
        return self._total

    @property
    def count(self) -> int:
        return self._count

    def run(self, samples) -> np.ndarray:
        """Reset, then step through ``samples``; returns per-step bits."""
        self.reset()
        return np.array([self.step(x) for x in samples], dtype=float)


class DefaultCoder(SequentialCoder):
    """Standard normal density; only meant for the very first sample."""

    def _reset_state(self) -> None:
        pass

    def bits_next(self, x) -> float:
        return default_bits(float(x))

    def _update(self, x) -> None:
        pass


def mixture_codelength(per_model_bits: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted-mixture codelength ``-log2 sum_i w_i 2^{-L_i}``."""
    bits = np.asarray(per_model_bits, dtype=float)
    w = np.asarray(weights, dtype=float)
    if bits.size == 0 or bits.shape != w.shape:
        raise InvalidArgumentError("need equal-length nonempty bits and weights")
    if np.any(w <= 0):
        raise InvalidArgumentError("weights must be positive")
    if w.sum() > 1.0 + 1e-12:
        raise InvalidArgumentError("weights must sum to at most 1")
    return float(-logsumexp(-bits * LN2, b=w) / LN2)


def mixture_codelength_array(bits: np.ndarray, weights: Sequence[float]) -> np.ndarray:
    """Vectorised mixture over the leading axis of ``bits``."""
    w = np.asarray(weights, dtype=float).reshape((-1,) + (1,) * (bits.ndim - 1))
    with np.errstate(invalid="ignore"):
        return -logsumexp(-bits * LN2, axis=0, b=np.broadcast_to(w, bits.shape)) / LN2


def min_codelength(per_model_bits: Sequence[float], model_cost_bits: Sequence[float]) -> tuple[float, int]:
    """Two-part ``min_i L_i + L(i)``; ties go to the lowest index."""
    bits = np.asarray(per_model_bits, dtype=float)
    cost = np.asarray(model_cost_bits, dtype=float)
    if bits.size == 0 or bits.shape != cost.shape:
        raise InvalidArgumentError("need equal-length nonempty bits and costs")
    total = bits + cost
    idx = int(np.argmin(total))
    return float(total[idx]), idx


def log_star(l: int) -> float:
    """Iterated-logarithm length code, summing only strictly positive terms."""
    if l < 1 or int(l) != l:
        raise InvalidArgumentError(f"log_star needs a positive integer, got {l!r}")
    total = 0.0
    term = math.log2(l)
    while term > 0:
        total += term
        term = math.log2(term)
    return total


def subsequence_overhead(l: int, tau: float) -> float:
    """Bits to mark a subsequence start (``tau``) and transmit its length."""
    if tau < 0:
        raise InvalidArgumentError("tau must be non-negative")
    return tau + log_star(l)


_LOG_STAR_CACHE: dict[int, np.ndarray] = {}


def log_star_table(l_max: int) -> np.ndarray:
    """``table[l] = log_star(l)`` for ``1 <= l <= l_max`` (``table[0]`` is nan)."""
    cached = _LOG_STAR_CACHE.get(l_max)
    if cached is None:
        cached = np.array([np.nan] + [log_star(l) for l in range(1, l_max + 1)])
        _LOG_STAR_CACHE[l_max] = cached
    return cached


@dataclass(frozen=True)
class RosterEntry:
    """One alternative model: identifier, parameter count, coder factory, weight."""

    model_id: str
    n_params: int
    factory: Callable[[], object]
    weight: float


@dataclass(frozen=True)
class ModelRoster:
    entries: tuple[RosterEntry, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.entries:
            raise InvalidArgumentError("roster is empty")
        weights = [e.weight for e in self.entries]
        if any(w <= 0 for w in weights):
            raise InvalidArgumentError("roster weights must be positive")
        if sum(weights) > 1.0 + 1e-12:
            raise InvalidArgumentError("roster weights must sum to at most 1")
        ids = [e.model_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("duplicate model ids in roster")

    @classmethod
    def uniform(cls, items: Sequence[tuple[str, int, Callable[[], object]]]) -> "ModelRoster":
        w = 1.0 / len(items)
        return cls(tuple(RosterEntry(i, k, f, w) for i, k, f in items))

    @property
    def weights(self) -> list[float]:
        return [e.weight for e in self.entries]

    @property
    def ids(self) -> list[str]:
        return [e.model_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)
