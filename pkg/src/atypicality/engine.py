"""Atypical-subsequence detection.

A window is atypical when the roster of universal coders describes it,
including the cost of marking its start and length, in fewer bits than the
typical coder does. Data are first precoded with the typical model so that
typical data look like iid standard normal samples; the change-of-variables
term is the same for both codelengths and cancels in the comparison.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import log_ndtr

from .codelength import (
    HALF_LOG2_2PI,
    LN2,
    InvalidArgumentError,
    ModelRoster,
    RosterEntry,
    log_star_table,
    mixture_codelength_array,
    subsequence_overhead,
)
from .filterbank import FILTERS, tree_bits
from .linear_prediction import LinearPredictionCoder, fit_ar_least_squares, lp_chain_bits_matrix
from .scalar import (
    _MATRIX_STAGES,
    MeanVarianceNLMCoder,
    MeanVarianceSSMCoder,
    VarianceNLMCoder,
    VarianceSSMCoder,
    chain_bits_matrix,
)
from .sparse import BASES, sparse_series_bits

log = logging.getLogger(__name__)

THREADS_ENV = "ATYPICALITY_THREADS"
# extra bits in the closed-form mean criterion (2*tau + 5 inside the root)
MEAN_CRITERION_OFFSET_BITS = 2.5


# --- typical coders ----------------------------------------------------------


def standard_normal_bits(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return HALF_LOG2_2PI + r * r / (2 * LN2)


class TypicalCoder:
    """Known typical model, exposed through an invertible whitening map."""

    def precode(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(residuals, jacobian_bits)``; typical residuals are iid N(0, 1)."""
        raise NotImplementedError

    def bits(self, x) -> np.ndarray:
        """Per-sample typical codelength of ``x``."""
        r, jac = self.precode(x)
        return standard_normal_bits(r) + jac

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianTypical(TypicalCoder):
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self) -> None:
        if self.var <= 0:
            raise InvalidArgumentError("typical variance must be positive")

    def precode(self, x):
        x = np.asarray(x, dtype=float)
        sd = math.sqrt(self.var)
        return (x - self.mean) / sd, np.full(x.shape, math.log2(sd))

    def restore(self, r) -> np.ndarray:
        return self.mean + math.sqrt(self.var) * np.asarray(r, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class LPCSegment:
    start: int
    end: int
    coef: tuple[float, ...]
    var: float


@dataclass(frozen=True)
class LPCTypical(TypicalCoder):
    """Piecewise AR model; each segment has its own coefficients and variance.

    Predictions use the actual preceding samples across segment borders and
    zeros before the start of the series.
    """

    order: int
    segments: tuple[LPCSegment, ...]

    def _per_sample(self, n: int):
        coef = np.zeros((n, self.order))
        sd = np.ones(n)
        for seg in self.segments:
            e = min(seg.end, n)
            if seg.start >= e:
                continue
            coef[seg.start : e] = seg.coef
            sd[seg.start : e] = math.sqrt(seg.var)
        return coef, sd

    def _lagged(self, x: np.ndarray) -> np.ndarray:
        n = x.size
        lags = np.zeros((n, self.order))
        for k in range(1, self.order + 1):
            lags[k:, k - 1] = x[: n - k]
        return lags

    def precode(self, x):
        x = np.asarray(x, dtype=float)
        coef, sd = self._per_sample(x.size)
        pred = np.sum(self._lagged(x) * coef, axis=1)
        return (x - pred) / sd, np.log2(sd)

    def restore(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        coef, sd = self._per_sample(r.size)
        x = np.zeros(r.size)
        for t in range(r.size):
            past = x[max(0, t - self.order) : t][::-1]
            x[t] = sd[t] * r[t] + float(coef[t, : past.size] @ past)
        return x

    def to_dict(self) -> dict:
        return {
            "kind": "lpc",
            "order": self.order,
            "segments": [
                {"start": s.start, "end": s.end, "coef": list(s.coef), "var": s.var} for s in self.segments
            ],
        }


FALLBACK_VAR = 1e-12


def train_typical_lpc(samples, order: int = 10, segment_length: int | None = None) -> LPCTypical:
    """Least-squares AR fit of every segment; a short tail joins the last segment."""
    x = np.asarray(samples, dtype=float)
    segment_length = x.size if segment_length is None else int(segment_length)
    if segment_length <= 10 * order:
        raise InvalidArgumentError(f"segments need more than {10 * order} samples")
    bounds = list(range(0, x.size, segment_length)) + [x.size]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] <= 10 * order:
        bounds.pop(-2)
    segs = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        lo = max(0, a - order)
        coef, var = fit_ar_least_squares(x[lo:b], order)
        if not np.isfinite(var) or var <= FALLBACK_VAR:
            warnings.warn(f"degenerate segment [{a}, {b}); using N(0, {FALLBACK_VAR})", RuntimeWarning)
            coef, var = np.zeros(order), FALLBACK_VAR
        segs.append(LPCSegment(a, b, tuple(float(c) for c in coef), float(var)))
    return LPCTypical(order, tuple(segs))


def typical_from_dict(d: dict) -> TypicalCoder:
    kind = d.get("kind", "gaussian")
    if kind == "gaussian":
        return GaussianTypical(float(d.get("mean", 0.0)), float(d.get("var", 1.0)))
    if kind == "lpc":
        segs = tuple(LPCSegment(int(s["start"]), int(s["end"]), tuple(s["coef"]), float(s["var"])) for s in d["segments"])
        return LPCTypical(int(d["order"]), segs)
    raise InvalidArgumentError(f"unknown typical coder kind {kind!r}")


def precode(samples, typical: TypicalCoder):
    """Whiten ``samples`` with the typical model; see :meth:`TypicalCoder.precode`."""
    return typical.precode(samples)


# --- asymptotic MDL detector -------------------------------------------------


def _rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def _ml_bits_mean(x):
    x = _rows(x)
    l = x.shape[1]
    c = x - x.mean(axis=1, keepdims=True)
    return l * HALF_LOG2_2PI + np.sum(c * c, axis=1) / (2 * LN2)


def _ml_bits_var(x):
    x = _rows(x)
    l = x.shape[1]
    v = np.mean(x * x, axis=1)
    with np.errstate(divide="ignore"):
        return np.where(v > 0, 0.5 * l * np.log2(2 * np.pi * v) + l / (2 * LN2), np.nan)


def _ml_bits_meanvar(x):
    x = _rows(x)
    l = x.shape[1]
    v = np.var(x, axis=1)
    with np.errstate(divide="ignore"):
        return np.where(v > 0, 0.5 * l * np.log2(2 * np.pi * v) + l / (2 * LN2), np.nan)


@dataclass(frozen=True)
class AsymptoticModel:
    """Model scored by the ML codelength plus ``(k+2)/2 log l``.

    ``ml_bits`` maps an array of windows (one per row) to the codelength of
    each window under its own maximum-likelihood fit; nan marks a failed fit.
    """

    name: str
    k: int
    ml_bits: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidArgumentError("k must be at least 1")


MEAN_ONLY = AsymptoticModel("mean", 1, _ml_bits_mean)
VARIANCE_ONLY = AsymptoticModel("variance", 1, _ml_bits_var)
MEAN_VARIANCE = AsymptoticModel("mean-variance", 2, _ml_bits_meanvar)
ASYMPTOTIC_MODELS = {m.name: m for m in (MEAN_ONLY, VARIANCE_ONLY, MEAN_VARIANCE)}


def _asymptotic_scores(r: np.ndarray, model: AsymptoticModel, tau: float, offset_bits: float) -> np.ndarray:
    r = _rows(r)
    l = r.shape[1]
    lt = np.sum(standard_normal_bits(r), axis=1)
    ml = model.ml_bits(r)
    score = lt - (ml + 0.5 * (model.k + 2) * math.log2(l) + tau + offset_bits)
    return np.where(np.isnan(ml), -np.inf, score)


def asymptotic_score(window, typical: TypicalCoder, model: AsymptoticModel, tau: float, offset_bits: float = 0.0) -> float:
    """Typical bits minus the asymptotic MDL subsequence codelength.

    Positive means atypical. ``offset_bits`` adds a constant to the
    alternative codelength; :data:`MEAN_CRITERION_OFFSET_BITS` reproduces the
    closed-form mean criterion.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or window.size < 1:
        raise InvalidArgumentError("window must be a non-empty 1-D array")
    r, _ = typical.precode(window)
    return float(_asymptotic_scores(r, model, tau, offset_bits)[0])


def mean_criterion_threshold(l: int, tau: float, sigma: float = 1.0) -> float:
    """Threshold on ``|sum x| / sqrt(l)`` of the closed-form mean detector."""
    return sigma * math.sqrt(3 * math.log(l) + (2 * tau + 5) * LN2)


def mean_criterion_flags(window, tau: float, sigma: float = 1.0) -> bool:
    window = np.asarray(window, dtype=float)
    l = window.size
    return abs(window.sum()) / math.sqrt(l) > mean_criterion_threshold(l, tau, sigma)


def intrinsic_atypicality_bounds(l: int, tau: float) -> tuple[float, float, float]:
    """``(upper, lower, exact)`` probability that typical data trip the mean detector."""
    if l < 2:
        raise InvalidArgumentError("l must be at least 2")
    t = 3 * math.log(l) + (2 * tau + 5) * LN2
    upper = 2.0 ** -2.5 * l ** -1.5 * 2.0 ** -tau
    lower = 2 / math.sqrt(2 * math.pi * t) * (1 - 1 / t) * math.exp(-t / 2)
    exact = 2 * math.exp(float(log_ndtr(-math.sqrt(t))))
    return upper, lower, exact


@dataclass(frozen=True)
class PAEstimate:
    l: int
    p_hat: float
    stderr: float
    hits: int
    trials: int


def montecarlo_p_a(
    l_values: Sequence[int],
    tau: float,
    trials: int,
    seed: int,
    models: Sequence[AsymptoticModel] = (MEAN_ONLY,),
    offset_bits: float = MEAN_CRITERION_OFFSET_BITS,
    max_chunk_elems: int = 1 << 22,
) -> list[PAEstimate]:
    """Empirical probability that an N(0, 1) window is flagged by any model."""
    if trials < 10_000:
        raise InvalidArgumentError("trials must be at least 1e4")
    out = []
    for i, l in enumerate(l_values):
        rng = np.random.Generator(np.random.Philox(key=seed, counter=[i, 0, 0, 0]))
        hits = 0
        done = 0
        chunk = max(1, max_chunk_elems // l)
        while done < trials:
            b = min(chunk, trials - done)
            r = rng.standard_normal((b, l))
            flag = np.zeros(b, dtype=bool)
            for m in models:
                flag |= _asymptotic_scores(r, m, tau, offset_bits) > 0
            hits += int(flag.sum())
            done += b
        p = hits / trials
        out.append(PAEstimate(int(l), p, math.sqrt(p * (1 - p) / trials), hits, trials))
    return out


def fit_decay_slope(estimates: Sequence[PAEstimate]) -> float:
    """Least-squares slope of ``ln P_A`` against ``ln l``."""
    ls = np.array([e.l for e in estimates], dtype=float)
    ps = np.array([e.p_hat for e in estimates], dtype=float)
    if np.any(ps <= 0):
        raise InvalidArgumentError("zero hit count; increase trials")
    return float(np.polyfit(np.log(ls), np.log(ps), 1)[0])


# --- coder roster ------------------------------------------------------------


class BlockCoder:
    """Non-sequential coder evaluated only at selected window lengths."""

    def __init__(self, fn: Callable[[np.ndarray], float], lengths: Sequence[int]) -> None:
        self.fn = fn
        self.lengths = tuple(sorted(set(int(l) for l in lengths)))

    def bits(self, x) -> float:
        return self.fn(np.asarray(x, dtype=float))


def _pow2_lengths(lo: int, hi: int = 1 << 16) -> list[int]:
    out, l = [], lo
    while l <= hi:
        out.append(l)
        l *= 2
    return out


def _make_coder(kind: str, params: dict):
    if kind == "iid-var-ssm":
        return VarianceSSMCoder, 1
    if kind == "iid-var-nlm":
        return VarianceNLMCoder, 1
    if kind == "iid-meanvar-ssm":
        return MeanVarianceSSMCoder, 2
    if kind == "iid-meanvar-nlm":
        return MeanVarianceNLMCoder, 2
    if kind == "lp-nlm":
        order = int(params.get("max_order", 2))
        return (lambda: LinearPredictionCoder(order)), order + 1
    if kind == "filterbank":
        depth = int(params.get("depth", 3))
        pair = FILTERS[params.get("filter", "haar")]
        lengths = params.get("lengths") or _pow2_lengths(max(8, 2 ** (depth + 1)))
        return (lambda: BlockCoder(lambda x: tree_bits(x, depth, pair), lengths)), 2 * (2**depth)
    if kind == "sparse":
        m = int(params.get("block", 16))
        basis = BASES[params.get("basis", "dct")](m)
        n_max = params.get("n_max")
        lengths = params.get("lengths") or [m * k for k in _pow2_lengths(4)]
        return (lambda: BlockCoder(lambda x: sparse_series_bits(x, m, basis, n_max), lengths)), m
    raise InvalidArgumentError(f"unknown roster model {kind!r}")


DEFAULT_ROSTER = (
    {"model": "iid-var-ssm"},
    {"model": "iid-meanvar-ssm"},
    {"model": "lp-nlm", "max_order": 2},
)


def _model_id(spec: dict) -> str:
    extra = [f"{k}={v}" for k, v in sorted(spec.items()) if k not in ("model", "weight", "lengths")]
    return spec["model"] + (f"({','.join(extra)})" if extra else "")


def build_roster(specs: Sequence[dict] = DEFAULT_ROSTER) -> ModelRoster:
    """Roster from ``{"model": kind, ...params, "weight": w}`` dicts; weights default to uniform."""
    if not specs:
        raise InvalidArgumentError("roster is empty")
    n = len(specs)
    entries = []
    for spec in specs:
        factory, k = _make_coder(spec["model"], spec)
        entries.append(RosterEntry(_model_id(spec), k, factory, float(spec.get("weight", 1.0 / n))))
    return ModelRoster(tuple(entries))


def prefix_bits_matrix(coder, w: np.ndarray) -> np.ndarray:
    """Cumulative codelength of every prefix of every row of ``w``.

    Entry ``[b, l-1]`` is the bits for ``w[b, :l]``; inf where the coder does
    not produce a codelength for that length.
    """
    w = np.asarray(w, dtype=float)
    b, l = w.shape
    if isinstance(coder, BlockCoder):
        out = np.full((b, l), np.inf)
        for ln in coder.lengths:
            if ln > l:
                break
            for i in range(b):
                out[i, ln - 1] = coder.bits(w[i, :ln])
        return out
    if type(coder) in _MATRIX_STAGES:
        return np.cumsum(chain_bits_matrix(type(coder), w), axis=1)
    if isinstance(coder, LinearPredictionCoder):
        return np.cumsum(lp_chain_bits_matrix(w, coder.max_order), axis=1)
    out = np.empty((b, l))
    for i in range(b):
        out[i] = np.cumsum(coder.run(w[i]))
    return out


def coder_total_bits(coder, x) -> float:
    """Codelength of the whole of ``x`` by stepping the coder sample by sample."""
    x = np.asarray(x, dtype=float)
    if isinstance(coder, BlockCoder):
        if x.size not in coder.lengths:
            return math.inf
        return coder.bits(x)
    coder.run(x)
    return coder.total()


# --- scanning ----------------------------------------------------------------


@dataclass
class EngineConfig:
    tau: float
    roster: list = field(default_factory=lambda: [dict(s) for s in DEFAULT_ROSTER])
    l_min: int = 8
    l_max: int = 2048
    stride: int = 1
    combine: str = "mixture"
    typical: dict = field(default_factory=lambda: {"kind": "gaussian", "mean": 0.0, "var": 1.0})
    lpc_order: int = 10
    segment_length: int | None = None
    chunk_starts: int = 256

    def __post_init__(self) -> None:
        if self.tau is None or not self.tau >= 0:
            raise InvalidArgumentError("tau must be given and non-negative")
        self.tau = float(self.tau)
        self.l_min, self.l_max, self.stride = int(self.l_min), int(self.l_max), int(self.stride)
        if not 1 <= self.l_min <= self.l_max:
            raise InvalidArgumentError("need 1 <= l_min <= l_max")
        if self.stride < 1:
            raise InvalidArgumentError("stride must be positive")
        if self.combine not in ("mixture", "min"):
            raise InvalidArgumentError("combine must be 'mixture' or 'min'")

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config fields: {sorted(unknown)}")
        if "tau" not in d:
            raise InvalidArgumentError("config must set tau")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Detection:
    start: int
    end: int
    score: float
    model: str
    breakdown: dict = field(default_factory=dict, compare=False)
    typical_bits: float = field(default=float("nan"), compare=False)
    tau: float = field(default=float("nan"), compare=False)

    @property
    def length(self) -> int:
        return self.end - self.start


def combine_codelengths(bits: np.ndarray, roster: ModelRoster, rule: str) -> np.ndarray:
    """Atypical codelength from per-model codelengths stacked on axis 0."""
    if rule == "mixture":
        return mixture_codelength_array(bits, roster.weights)
    cost = -np.log2(np.asarray(roster.weights)).reshape((-1,) + (1,) * (bits.ndim - 1))
    return np.min(bits + cost, axis=0)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class _Candidate:
    start: int
    best_end: int
    score: float
    reach: int


def _scan_chunk(r, lt_cum, starts, cfg, roster, l_star):
    n = r.size
    s0 = starts[0]
    l = min(cfg.l_max, n - s0)
    idx = starts[:, None] + np.arange(l)[None, :]
    valid = idx < n
    w = np.where(valid, r[np.minimum(idx, n - 1)], 0.0)
    coders = [e.factory() for e in roster.entries]
    per_model = np.stack([prefix_bits_matrix(c, w) for c in coders])
    la = combine_codelengths(per_model, roster, cfg.combine)
    lengths = np.arange(1, l + 1)
    lt = lt_cum[np.minimum(idx + 1, n)] - lt_cum[starts][:, None]
    with np.errstate(invalid="ignore"):
        score = lt - la - (cfg.tau + l_star[lengths])[None, :]
    ok = valid & (lengths[None, :] >= cfg.l_min) & np.isfinite(score)
    score = np.where(ok, score, -np.inf)
    flagged = score > 0
    out = []
    for i in np.flatnonzero(flagged.any(axis=1)):
        j = int(np.argmax(score[i]))
        reach = int(np.flatnonzero(flagged[i])[-1]) + 1
        s = int(starts[i])
        out.append(_Candidate(s, s + j + 1, float(score[i, j]), s + reach))
    return out


def _merge(cands: list[_Candidate]) -> list[_Candidate]:
    cands = sorted(cands, key=lambda c: c.start)
    groups: list[list[_Candidate]] = []
    reach = -1
    for c in cands:
        if groups and c.start < reach:
            groups[-1].append(c)
            reach = max(reach, c.reach)
        else:
            groups.append([c])
            reach = c.reach
    # highest score wins; earliest start then shortest window on exact ties
    return [max(g, key=lambda c: (c.score, -c.start, -c.best_end)) for g in groups]


def interval_codelengths(r, start: int, end: int, roster: ModelRoster) -> dict:
    """Per-model codelength of residuals ``r[start:end]`` via the sequential coders."""
    seg = np.asarray(r, dtype=float)[start:end]
    return {e.model_id: coder_total_bits(e.factory(), seg) for e in roster.entries}


def score_interval(samples, typical: TypicalCoder, cfg: EngineConfig, start: int, end: int) -> float:
    """Atypicality score of one interval recomputed from scratch."""
    roster = build_roster(cfg.roster)
    r, _ = typical.precode(samples)
    per_model = interval_codelengths(r, start, end, roster)
    bits = np.array([per_model[i] for i in roster.ids])
    la = float(combine_codelengths(bits[:, None], roster, cfg.combine)[0])
    lt = float(standard_normal_bits(r[start:end]).sum())
    return lt - la - subsequence_overhead(end - start, cfg.tau)


def scan(samples, typical: TypicalCoder, cfg: EngineConfig) -> list[Detection]:
    """Find atypical subsequences; merged, non-overlapping, sorted by start."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError("scan expects a 1-D series")
    if x.size < cfg.l_min:
        raise InvalidArgumentError("series shorter than l_min")
    roster = build_roster(cfg.roster)
    r, _ = typical.precode(x)
    lt_cum = np.concatenate([[0.0], np.cumsum(standard_normal_bits(r))])
    l_star = log_star_table(cfg.l_max)
    starts = np.arange(0, x.size - cfg.l_min + 1, cfg.stride)
    chunks = [starts[i : i + cfg.chunk_starts] for i in range(0, starts.size, cfg.chunk_starts)]

    def work(ch):
        return _scan_chunk(r, lt_cum, ch, cfg, roster, l_star)

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(ch) for ch in chunks]
    cands = [c for res in results for c in res]
    dets = []
    for c in _merge(cands):
        per_model = interval_codelengths(r, c.start, c.best_end, roster)
        winner = min(per_model, key=lambda k: (per_model[k], roster.ids.index(k)))
        lt = float(standard_normal_bits(r[c.start : c.best_end]).sum())
        dets.append(Detection(c.start, c.best_end, c.score, winner, per_model, lt, cfg.tau))
    log.info("scan: %d candidate starts, %d detections", len(cands), len(dets))
    return dets


def typical_from_config(samples, cfg: EngineConfig) -> TypicalCoder:
    spec = dict(cfg.typical)
    if spec.get("kind") == "lpc" and "segments" not in spec:
        return train_typical_lpc(samples, int(spec.get("order", cfg.lpc_order)), spec.get("segment_length", cfg.segment_length))
    return typical_from_dict(spec)
