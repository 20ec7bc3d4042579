"""Command-line front end.

Exit codes: 0 on success, 2 on a usage error, 1 on a data error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .codelength import InvalidArgumentError
from .engine import (
    ASYMPTOTIC_MODELS,
    EngineConfig,
    intrinsic_atypicality_bounds,
    montecarlo_p_a,
    scan,
    train_typical_lpc,
    typical_from_config,
)
from .evaluation import EvalReport, parse_range, precision_recall, tau_sweep
from .scalar import redundancy_experiment, upper_tail_comparison
from .synthetic import KINDS, generate

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _param(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(val) if any(c in val for c in ".eE") else int(val)
    except ValueError:
        return key, val


def _int_like(text: str) -> int:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _first_difference(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x[:1], np.diff(x)])


def _load_scalar(path, diff: bool) -> np.ndarray:
    series = io.read_series(path)
    if series.channels != 1:
        raise io.DataError(f"{path}: expected one channel, found {series.channels}")
    return _first_difference(series.samples) if diff else series.samples


def cmd_generate(a) -> None:
    if a.kind not in KINDS:
        raise UsageError(f"unknown kind {a.kind!r}; choose from {', '.join(KINDS)}")
    series = generate(a.kind, a.length, dict(a.param), a.seed)
    io.write_series(a.out, series)
    if a.truth:
        io.write_truth(a.truth, series.intervals)


def cmd_train(a) -> None:
    x = _load_scalar(a.input, a.diff)
    io.write_typical(a.out, train_typical_lpc(x, a.order, a.segment_length))


def cmd_scan(a) -> None:
    if not a.config and a.tau is None:
        raise UsageError("scan needs --config or --tau")
    cfg = io.read_config(a.config) if a.config else EngineConfig(tau=a.tau)
    if a.tau is not None:
        cfg = EngineConfig(**{**cfg.to_dict(), "tau": a.tau})
    x = _load_scalar(a.input, a.diff)
    typical = io.read_typical(a.typical) if a.typical else typical_from_config(x, cfg)
    io.write_detections(a.out, scan(x, typical, cfg))


def cmd_eval(a) -> None:
    dets = io.read_detections(a.detections)
    truth = io.read_truth(a.truth)
    rule = a.rule if a.rule == "any" else float(a.rule)
    if a.sweep_tau:
        report = tau_sweep(dets, truth, parse_range(a.sweep_tau), rule)
    else:
        report = EvalReport([precision_recall(dets, truth, rule)])
    _emit(report.to_csv(), a.out)


def _decay_csv(a) -> str:
    lengths = [int(v) for v in a.lengths.split(",")]
    models = [ASYMPTOTIC_MODELS[m] for m in a.models.split(",")]
    rows = ["l,p_hat,stderr,exact,upper,lower"]
    for e in montecarlo_p_a(lengths, a.tau, a.trials, a.seed, models):
        up, lo, ex = intrinsic_atypicality_bounds(e.l, a.tau)
        rows.append(f"{e.l},{e.p_hat!r},{e.stderr!r},{ex!r},{up!r},{lo!r}")
    return "\n".join(rows) + "\n"


def _bounds_csv(a) -> str:
    rows = ["l,tau,exact,upper,lower"]
    for l in (int(v) for v in a.lengths.split(",")):
        up, lo, ex = intrinsic_atypicality_bounds(l, a.tau)
        rows.append(f"{l},{a.tau!r},{ex!r},{up!r},{lo!r}")
    return "\n".join(rows) + "\n"


def _redundancy_csv(mu, var, length, trials, seed) -> str:
    ssm, op = redundancy_experiment(mu, var, length, trials, seed)
    t, p_ssm, p_op = upper_tail_comparison(ssm, op)
    rows = [f"# op_q99={float(t)!r} tail_ssm={float(p_ssm)!r} tail_op={float(p_op)!r}", "trial,ssm_redundancy,op_redundancy"]
    rows += [f"{i},{float(s)!r},{float(o)!r}" for i, (s, o) in enumerate(zip(ssm, op))]
    return "\n".join(rows) + "\n"


def cmd_verify(a) -> None:
    if a.experiment == "decay":
        text = _decay_csv(a)
    elif a.experiment == "bounds":
        text = _bounds_csv(a)
    else:
        text = _redundancy_csv(0.0, 4.0, 50, a.trials, a.seed)
    _emit(text, a.out)


def cmd_redundancy(a) -> None:
    _emit(_redundancy_csv(a.mu, a.var, a.length, a.trials, a.seed), a.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atypicality", description="Atypical subsequence detection by codelength comparison.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic series and its truth intervals")
    g.add_argument("--kind", required=True)
    g.add_argument("--length", type=_int_like, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    g.add_argument("--out", required=True)
    g.add_argument("--truth")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a segment-wise linear-prediction typical model")
    t.add_argument("--input", required=True)
    t.add_argument("--order", type=int, default=10)
    t.add_argument("--segment-length", type=_int_like)
    t.add_argument("--diff", action="store_true", help="use the first difference of the input")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("scan", help="detect atypical subsequences")
    s.add_argument("--input", required=True)
    s.add_argument("--config")
    s.add_argument("--typical", help="typical model JSON from 'train'")
    s.add_argument("--tau", type=float, help="override the threshold in the config")
    s.add_argument("--diff", action="store_true", help="use the first difference of the input")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scan)

    e = sub.add_parser("eval", help="precision and recall against truth intervals")
    e.add_argument("--detections", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--sweep-tau", metavar="A:B:STEP")
    e.add_argument("--rule", default="any", help="'any' or a minimum covered fraction of the truth interval")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="emit plot data for the theoretical checks")
    v.add_argument("--experiment", choices=("decay", "bounds", "redundancy"), default="decay")
    v.add_argument("--trials", type=_int_like, default=10**6)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--tau", type=float, default=0.0)
    v.add_argument("--lengths", default="16,64,256")
    v.add_argument("--models", default="mean")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("redundancy", help="redundancy samples of the SSM and plug-in coders")
    r.add_argument("--mu", type=float, default=0.0)
    r.add_argument("--var", type=float, default=4.0)
    r.add_argument("--length", type=_int_like, default=50)
    r.add_argument("--trials", type=_int_like, default=10**4)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--out")
    r.set_defaults(func=cmd_redundancy)
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "eval" and args.rule != "any":
            try:
                float(args.rule)
            except ValueError:
                raise UsageError(f"bad --rule {args.rule!r}") from None
        if args.command == "verify" and args.experiment == "decay":
            unknown = set(args.models.split(",")) - set(ASYMPTOTIC_MODELS)
            if unknown:
                raise UsageError(f"unknown models {sorted(unknown)}")
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (io.DataError, InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
