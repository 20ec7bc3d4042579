"""Two-channel orthonormal filterbank tree coder with per-node weighting.

Each node codes its block either directly with the iid unknown mean/variance
coder or by splitting it into low and high subbands and recursing; the two
options are mixed with weight one half each.

The analysis step is an exact orthogonal transform of the (even-length)
block using circular indexing. The outputs whose filter support wraps around
the block boundary are the transient: they are sent to the decoder with the
parent's scalar coder rather than handed to the children, so that the
children only see steady-state subband samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codelength import InvalidArgumentError
from .scalar import iid_meanvar_bits


@dataclass(frozen=True)
class FilterPair:
    name: str
    lowpass: tuple[float, ...]

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.lowpass, dtype=float)

    @property
    def g(self) -> np.ndarray:
        h = self.h
        t = h.size
        return np.array([(-1) ** k * h[t - 1 - k] for k in range(t)])

    @property
    def taps(self) -> int:
        return len(self.lowpass)

    @property
    def wrap(self) -> int:
        """Outputs per channel whose support wraps around the block start."""
        return (self.taps - 2) // 2


_S3 = math.sqrt(3.0)
HAAR = FilterPair("haar", (1 / math.sqrt(2), 1 / math.sqrt(2)))
DAUB4 = FilterPair(
    "db4",
    tuple(c / (4 * math.sqrt(2)) for c in (1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3)),
)
FILTERS = {"haar": HAAR, "db4": DAUB4}


def can_split(n: int, pair: FilterPair) -> bool:
    return n >= max(pair.taps, 2)


def _indices(ne: int, pair: FilterPair) -> np.ndarray:
    k = np.arange(ne // 2)[:, None]
    j = np.arange(pair.taps)[None, :]
    return (2 * k + 1 - j) % ne


def analyze(x, pair: FilterPair):
    """Split a block into ``(low, high, transient)``.

    ``transient`` holds the wrap-around outputs of both channels followed by
    the trailing sample of an odd-length block.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if not can_split(n, pair):
        raise InvalidArgumentError(f"block of {n} samples is too short for {pair.taps} taps")
    ne = n - n % 2
    xe = x[:ne][_indices(ne, pair)]
    low = xe @ pair.h
    high = xe @ pair.g
    w = pair.wrap
    transient = np.concatenate([low[:w], high[:w], x[ne:]])
    return low[w:], high[w:], transient


def synthesize(low, high, transient, pair: FilterPair, n: int) -> np.ndarray:
    """Inverse of :func:`analyze` for an original block of ``n`` samples."""
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    transient = np.asarray(transient, dtype=float)
    w = pair.wrap
    ne = n - n % 2
    full_low = np.concatenate([transient[:w], low])
    full_high = np.concatenate([transient[w : 2 * w], high])
    xe = np.zeros(ne)
    contrib = full_low[:, None] * pair.h[None, :] + full_high[:, None] * pair.g[None, :]
    np.add.at(xe, _indices(ne, pair), contrib)
    return np.concatenate([xe, transient[2 * w :]])


def _mix_half(bits_a: float, bits_b: float) -> float:
    lo = min(bits_a, bits_b)
    return lo + 1.0 - math.log2(1.0 + 2.0 ** (-(abs(bits_a - bits_b))))


def weighted_node_bits(x, depth: int, max_depth: int, pair: FilterPair = HAAR) -> float:
    """Weighted codelength of a node's block.

    At ``max_depth`` the block is a leaf and only the direct coder is used.
    Above it, a block too short to split still pays the one bit for the
    half weight.
    """
    x = np.asarray(x, dtype=float)
    here = iid_meanvar_bits(x)
    if depth >= max_depth:
        return here
    if not can_split(x.size, pair):
        return here + 1.0
    low, high, transient = analyze(x, pair)
    split = (
        iid_meanvar_bits(transient)
        + weighted_node_bits(low, depth + 1, max_depth, pair)
        + weighted_node_bits(high, depth + 1, max_depth, pair)
    )
    return _mix_half(here, split)


def tree_bits(x, max_depth: int, pair: FilterPair = HAAR) -> float:
    """Codelength of a block under the depth-``max_depth`` weighted tree."""
    if max_depth < 0:
        raise InvalidArgumentError("max_depth must be non-negative")
    return weighted_node_bits(x, 0, max_depth, pair)


def stationary_gain_estimate(var_low: float, var_high: float, l: int) -> float:
    """Asymptotic bits saved by one split on a stationary Gaussian signal."""
    if var_low <= 0 or var_high <= 0:
        raise InvalidArgumentError("subband powers must be positive")
    var = 0.5 * (var_low + var_high)
    return 0.5 * l * math.log2(var / math.sqrt(var_low * var_high)) - 0.5 * math.log2(l)
