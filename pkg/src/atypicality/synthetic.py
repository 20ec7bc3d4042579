"""Synthetic series with labelled atypical bursts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codelength import InvalidArgumentError
from .evaluation import Interval

KINDS = ("white", "ar1", "mean-burst", "variance-burst", "tone-burst", "chirp-burst")
BURST_KINDS = KINDS[2:]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator used everywhere for reproducibility."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass
class LabeledSeries:
    samples: np.ndarray
    intervals: list[Interval] = field(default_factory=list)
    sample_rate: float | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float)
        n = self.samples.shape[0]
        prev = 0
        for iv in self.intervals:
            if iv.start < prev or iv.end > n:
                raise InvalidArgumentError("intervals must be sorted, disjoint and inside the series")
            prev = iv.end

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]


def _burst(kind: str, base: np.ndarray, a: int, b: int, p: dict, rng) -> None:
    sigma = float(p.get("sigma", 1.0))
    t = np.arange(b - a)
    if kind == "mean-burst":
        base[a:b] += float(p.get("mu_a", 4.0)) * sigma
    elif kind == "variance-burst":
        gain = 10 ** (float(p.get("gain_db", 6.0)) / 20)
        base[a:b] *= gain
    elif kind == "tone-burst":
        f = float(p.get("freq", 0.1))
        amp = float(p.get("amp", 2.0)) * sigma
        base[a:b] += amp * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    elif kind == "chirp-burst":
        f0, f1 = float(p.get("f0", 0.05)), float(p.get("f1", 0.25))
        amp = float(p.get("amp", 2.0)) * sigma
        phase = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) * t * t / max(b - a, 1))
        base[a:b] += amp * np.sin(phase)
    else:
        raise InvalidArgumentError(f"unknown burst kind {kind!r}")


def _background(kind: str, length: int, p: dict, rng) -> np.ndarray:
    sigma = float(p.get("sigma", 1.0))
    e = sigma * rng.standard_normal(length)
    if kind != "ar1":
        return e
    a = float(p.get("a", 0.9))
    if not abs(a) < 1:
        raise InvalidArgumentError("AR(1) coefficient must satisfy |a| < 1")
    x = np.empty(length)
    prev = rng.standard_normal() * sigma / math.sqrt(1 - a * a)
    for i in range(length):
        prev = a * prev + e[i]
        x[i] = prev
    return x


def compose(length: int, bursts: list[dict], seed: int, background: str = "white", params: dict | None = None) -> LabeledSeries:
    """Background noise with bursts ``{"kind", "start", "length", ...params}``."""
    params = dict(params or {})
    if length < 1:
        raise InvalidArgumentError("length must be positive")
    if background not in ("white", "ar1"):
        raise InvalidArgumentError(f"unknown background {background!r}")
    rng = make_rng(seed)
    x = _background(background, length, params, rng)
    intervals = []
    for bspec in sorted(bursts, key=lambda d: int(d["start"])):
        a = int(bspec["start"])
        b = a + int(bspec["length"])
        if a < 0 or b > length:
            raise InvalidArgumentError("burst outside the series")
        _burst(bspec["kind"], x, a, b, {**params, **bspec}, rng)
        intervals.append(Interval(a, b, bspec["kind"]))
    return LabeledSeries(x, intervals, params.get("sample_rate"))


def generate(kind: str, length: int, params: dict | None = None, seed: int = 0) -> LabeledSeries:
    """Deterministic series of the given kind; burst kinds carry their interval.

    Burst kinds take ``at`` (start, default the middle), ``burst`` (length,
    default 200) and their shape parameters; the background is white noise.
    """
    if kind not in KINDS:
        raise InvalidArgumentError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    params = dict(params or {})
    if kind in ("white", "ar1"):
        return compose(length, [], seed, kind, params)
    blen = int(params.pop("burst", 200))
    start = int(params.pop("at", (length - blen) // 2))
    return compose(length, [{"kind": kind, "start": start, "length": blen}], seed, "white", params)
