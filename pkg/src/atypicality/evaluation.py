"""Precision and recall of detections against labelled intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .codelength import InvalidArgumentError


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    label: str = ""

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise InvalidArgumentError(f"empty interval [{self.start}, {self.end})")


def overlap(a_start: int, a_end: int, b_start: int, b_end: int) -> int:
    return max(0, min(a_end, b_end) - max(a_start, b_start))


def _matches(det, truth: Interval, rule) -> bool:
    ov = overlap(det.start, det.end, truth.start, truth.end)
    if rule == "any":
        return ov > 0
    return ov > 0 and ov >= float(rule) * (truth.end - truth.start)


@dataclass(frozen=True)
class PRPoint:
    tau: float
    precision: float
    recall: float
    correct: int
    n_detections: int
    n_truth: int


@dataclass
class EvalReport:
    points: list[PRPoint] = field(default_factory=list)

    def to_csv(self) -> str:
        rows = ["tau,precision,recall,correct,detections,truth"]
        for p in self.points:
            rows.append(f"{p.tau!r},{p.precision!r},{p.recall!r},{p.correct},{p.n_detections},{p.n_truth}")
        return "\n".join(rows) + "\n"


def precision_recall(detections: Sequence, truth: Sequence[Interval], rule="any", tau: float = math.nan) -> PRPoint:
    """Score detections with a one-to-one matching to the truth intervals.

    ``rule`` is ``"any"`` (any overlap counts) or a fraction of the truth
    interval that the detection must cover. Each truth interval is credited
    once; the largest possible number of pairs is matched. With no
    detections precision is 1.
    """
    if rule != "any":
        f = float(rule)
        if not 0 < f <= 1:
            raise InvalidArgumentError("overlap fraction must be in (0, 1]")
    nd, nt = len(detections), len(truth)
    correct = 0
    if nd and nt:
        hit = np.array([[_matches(d, t, rule) for t in truth] for d in detections], dtype=float)
        rows, cols = linear_sum_assignment(hit, maximize=True)
        correct = int(hit[rows, cols].sum())
    precision = correct / nd if nd else 1.0
    recall = correct / nt if nt else 1.0
    return PRPoint(tau, precision, recall, correct, nd, nt)


def detections_at_tau(detections: Iterable, tau: float) -> list:
    """Detections that stay positive when the threshold is raised to ``tau``.

    Each detection must carry the threshold it was found with (``tau``
    attribute); only raising the threshold can be emulated this way.
    """
    out = []
    for d in detections:
        base = getattr(d, "tau", None)
        if base is None:
            raise InvalidArgumentError("detection does not record its scan threshold")
        if tau < base:
            raise InvalidArgumentError(f"cannot lower the threshold below the scan value {base}")
        if d.score + base - tau > 0:
            out.append(d)
    return out


def tau_sweep(detections: Sequence, truth: Sequence[Interval], taus: Iterable[float], rule="any") -> EvalReport:
    """Precision-recall curve over a grid of thresholds."""
    report = EvalReport()
    for t in taus:
        report.points.append(precision_recall(detections_at_tau(detections, t), truth, rule, t))
    return report


def parse_range(spec: str) -> list[float]:
    """``"a:b:step"`` to the inclusive grid ``a, a+step, ..., <= b``."""
    try:
        a, b, s = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise InvalidArgumentError(f"bad range {spec!r}; expected a:b:step") from exc
    if s <= 0 or b < a:
        raise InvalidArgumentError(f"bad range {spec!r}")
    n = int(math.floor((b - a) / s + 1e-9)) + 1
    return [a + i * s for i in range(n)]
