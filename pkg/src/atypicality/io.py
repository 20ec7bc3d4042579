"""File formats: raw float64 with a JSON sidecar, headered CSV, JSON lines."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .codelength import AtypicalityError
from .engine import EngineConfig, TypicalCoder, typical_from_dict
from .evaluation import Interval
from .synthetic import LabeledSeries


class DataError(AtypicalityError):
    """Unreadable or malformed input file."""


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_series(path, series: LabeledSeries) -> None:
    """``.csv`` gets a header row; anything else is raw little-endian float64."""
    path = Path(path)
    x = series.samples
    if path.suffix.lower() == ".csv":
        cols = [f"ch{i}" for i in range(series.channels)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in x[:, None] if x.ndim == 1 else x:
                w.writerow([repr(float(v)) for v in row])
        return
    x.astype("<f8").tofile(path)
    meta = {"channels": series.channels, "sample_rate": series.sample_rate}
    _sidecar(path).write_text(json.dumps(meta) + "\n")


def read_series(path) -> LabeledSeries:
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            if not rows:
                raise DataError(f"{path}: empty CSV")
            data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
            return LabeledSeries(data[:, 0] if data.shape[1] == 1 else data)
        raw = np.fromfile(path, dtype="<f8")
        meta = {"channels": 1, "sample_rate": None}
        side = _sidecar(path)
        if side.exists():
            meta.update(json.loads(side.read_text()))
        ch = int(meta["channels"])
        if ch < 1 or raw.size % ch:
            raise DataError(f"{path}: {raw.size} values do not split into {ch} channels")
        x = raw if ch == 1 else raw.reshape(-1, ch)
        return LabeledSeries(x, [], meta.get("sample_rate"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def write_truth(path, intervals) -> None:
    items = [{"start": iv.start, "end": iv.end, "label": iv.label} for iv in intervals]
    Path(path).write_text(json.dumps(items, indent=1) + "\n")


def read_truth(path) -> list[Interval]:
    try:
        items = json.loads(Path(path).read_text())
        return [Interval(int(d["start"]), int(d["end"]), str(d.get("label", ""))) for d in items]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read truth file {path}: {exc}") from exc


def write_detections(path, detections) -> None:
    with open(path, "w") as fh:
        for d in detections:
            rec = {"start": d.start, "end": d.end, "score_bits": d.score, "model": d.model}
            if not math.isnan(getattr(d, "tau", math.nan)):
                rec["tau"] = d.tau
            fh.write(json.dumps(rec) + "\n")


def read_detections(path) -> list:
    """Detections as lightweight records with ``start, end, score, model, tau``."""
    out = []
    try:
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                out.append(
                    SimpleNamespace(
                        start=int(d["start"]), end=int(d["end"]), score=float(d["score_bits"]),
                        model=str(d["model"]), tau=d.get("tau"),
                    )
                )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read detections {path}: {exc}") from exc
    return out


def read_config(path) -> EngineConfig:
    try:
        return EngineConfig.from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise DataError(f"malformed config {path}: {exc}") from exc


def write_config(path, cfg: EngineConfig) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")


def write_typical(path, typical: TypicalCoder) -> None:
    Path(path).write_text(json.dumps(typical.to_dict(), indent=1) + "\n")


def read_typical(path) -> TypicalCoder:
    try:
        return typical_from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed typical model {path}: {exc}") from exc

