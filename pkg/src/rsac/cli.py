"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 construction failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import __version__
from .counts import dump_histogram, load_histogram, substream
from .errors import InputError, RsacError
from .estimator import M_MAX, construct
from .experiment import run_experiment, score_histogram
from .simlab import (MODELS, R_GRID, T_GRID, PopulationModel, cv_empirical, draw_population,
                     expected_coverage, get_model, sample_poisson, true_rsac)
from .uncertainty import METHODS, bootstrap_grid, fit_curve


def _read_hist(path: str):
    if path == "-":
        return load_histogram(sys.stdin.buffer.read())
    try:
        with open(path, "rb") as fh:
            return load_histogram(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _int_list(text: str) -> list[int]:
    """``"1,2,5"`` or ``"1:10"`` (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _t_values(args) -> np.ndarray:
    if args.t is not None:
        return np.array(args.t, dtype=np.float64)
    if args.t_step <= 0 or args.t_stop < args.t_start:
        raise InputError("t grid must be non-empty with a positive step")
    n = int(np.floor((args.t_stop - args.t_start) / args.t_step + 1e-9)) + 1
    return args.t_start + args.t_step * np.arange(n)


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_fit(args, out) -> int:
    hist = _read_hist(args.input)
    est, report = construct(hist, args.m_max)
    doc = {"estimator": est.to_dict(), "report": report.to_dict()}
    json.dump(doc, out, indent=2)
    out.write("\n")
    return 0


def cmd_extrapolate(args, out) -> int:
    hist = _read_hist(args.input)
    rs = np.array(args.r, dtype=np.int64)
    ts = _t_values(args)
    if np.any(ts < 0):
        raise InputError("t must be non-negative")
    fitted = fit_curve(hist, args.method, args.m_max)
    method = fitted.method
    tag = f"{args.method}->{method}" if args.method == "auto" else method
    rr, tt = np.meshgrid(rs, ts, indexing="ij")
    est = np.asarray(fitted(rr, tt), dtype=np.float64)
    boot = None
    if args.bootstrap:
        boot = bootstrap_grid(hist, rs, ts, args.bootstrap, args.level, args.seed, method, args.m_max)
    rows = []
    for i, r in enumerate(rs):
        for k, t in enumerate(ts):
            row = {"r": int(r), "t": float(t), "estimate": float(est[i, k])}
            if boot is not None:
                row.update(se=float(np.sqrt(boot.variance[i, k])), ci_low=float(boot.ci_low[i, k]),
                           ci_high=float(boot.ci_high[i, k]))
            rows.append(row)
    meta = {"method": tag}
    if args.method == "auto":
        meta["cv"] = fitted.report["cv"].cv
    if boot is not None:
        meta.update(bootstrap=boot.B, level=args.level, seed=args.seed, failed_replicates=boot.failed)
    if args.format == "json":
        json.dump({"meta": meta, "rows": rows}, out, indent=2)
        out.write("\n")
    else:
        out.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        cols = list(rows[0])
        out.write("\t".join(cols) + "\n")
        for row in rows:
            out.write("\t".join(str(row[c]) if c in ("r",) else _fmt(row[c]) for c in cols) + "\n")
    return 0


def _model_from_args(args) -> PopulationModel:
    base = get_model(args.model)
    overrides = {k: getattr(args, k) for k in ("shape", "scale", "mu", "sigma", "offset", "exponent")
                 if getattr(args, k) is not None}
    if not overrides:
        return base
    return PopulationModel(**{**base.__dict__, **overrides})


def _write_truth(path, truth, r_grid, t_grid):
    with open(path, "w") as fh:
        fh.write("r\tt\ttruth\n")
        for i, r in enumerate(r_grid):
            for k, t in enumerate(t_grid):
                fh.write(f"{int(r)}\t{_fmt(t)}\t{_fmt(truth[i, k])}\n")


def read_truth(path):
    """Parse a truth TSV back into ``(r_grid, t_grid, table)``."""
    data = {}
    with open(path) as fh:
        header = fh.readline().split()
        if header != ["r", "t", "truth"]:
            raise InputError(f"{path}: expected header 'r t truth'")
        for line in fh:
            if line.strip():
                r, t, v = line.split("\t")
                data[(int(r), float(t))] = float(v)
    r_grid = np.array(sorted({k[0] for k in data}))
    t_grid = np.array(sorted({k[1] for k in data}))
    table = np.full((len(r_grid), len(t_grid)), np.nan)
    for (r, t), v in data.items():
        table[np.searchsorted(r_grid, r), np.searchsorted(t_grid, t)] = v
    if np.isnan(table).any():
        raise InputError(f"{path}: truth table is not a full grid")
    return r_grid, t_grid, table


def cmd_simulate(args, out) -> int:
    model = _model_from_args(args)
    rates = draw_population(model, args.L, substream(args.seed, 0))
    hist = sample_poisson(rates, args.t, substream(args.seed, 1))
    if args.out_hist:
        with open(args.out_hist, "w") as fh:
            fh.write(dump_histogram(hist))
    if args.out_truth:
        _write_truth(args.out_truth, true_rsac(rates, R_GRID, T_GRID), R_GRID, T_GRID)
    summary = {
        "model": args.model,
        "params": model.__dict__,
        "L": args.L,
        "t": args.t,
        "seed": args.seed,
        "cv": cv_empirical(rates),
        "expected_coverage": expected_coverage(rates / rates.sum(), int(round(rates.sum() * args.t))),
        "n_species": hist.n_species,
        "n_individuals": hist.n_individuals,
    }
    json.dump(summary, out, indent=2)
    out.write("\n")
    if not args.out_hist:
        out.write(dump_histogram(hist))
    return 0


def cmd_compare(args, out) -> int:
    methods = args.methods or list(METHODS)
    out.write("method\tr\trel_error\n")
    if args.model:
        res = run_experiment(args.model, args.L, args.reps, args.seed, methods, args.m_max)
        for m in methods:
            per_r = np.nanmean(res.per_r[m], axis=0) if np.isfinite(res.per_r[m]).any() else res.per_r[m][0]
            for r, v in zip(R_GRID, per_r):
                out.write(f"{m}\t{int(r)}\t{_fmt(v)}\n")
            out.write(f"{m}\tmean\t{_fmt(res.mean(m))}\n")
            out.write(f"{m}\tsd\t{_fmt(res.sd(m))}\n")
            out.write(f"{m}\tfailures\t{len(res.failures[m])}\n")
        return 0
    if not (args.input and args.truth):
        raise InputError("compare needs either --model or both --input and --truth")
    hist = _read_hist(args.input)
    r_grid, t_grid, truth = read_truth(args.truth)
    results, _ = score_histogram(hist, truth, methods, args.m_max, r_grid, t_grid)
    for m in methods:
        res = results[m]
        if isinstance(res, str):
            out.write(f"{m}\tmean\tnan\n")
            continue
        for r, v in zip(r_grid, res.per_r):
            out.write(f"{m}\t{int(r)}\t{_fmt(v)}\n")
        out.write(f"{m}\tmean\t{_fmt(res.mean)}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rsac", description="r-SAC extrapolation from count histograms")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="construct the rational estimator and print it as JSON")
    f.add_argument("input", help="histogram file ('-' for stdin)")
    f.add_argument("--m-max", type=int, default=M_MAX)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("extrapolate", help="tabulate E[S_r(t)] estimates")
    e.add_argument("input")
    e.add_argument("--r", type=_int_list, default=[1], help="e.g. 1,2,5 or 1:20")
    e.add_argument("--t", type=_float_list, default=None, help="explicit t values, e.g. 2,4,6")
    e.add_argument("--t-start", type=float, default=1.0)
    e.add_argument("--t-stop", type=float, default=10.0)
    e.add_argument("--t-step", type=float, default=1.0)
    e.add_argument("--method", choices=("auto",) + METHODS, default="auto")
    e.add_argument("--m-max", type=int, default=M_MAX)
    e.add_argument("--bootstrap", type=int, default=0, metavar="B", help="bootstrap replicates (0 = off)")
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--format", choices=("tsv", "json"), default="tsv")
    e.set_defaults(func=cmd_extrapolate)

    s = sub.add_parser("simulate", help="draw a population and a Poisson sample")
    s.add_argument("--model", choices=sorted(MODELS), required=True)
    s.add_argument("--L", type=int, default=100_000)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    for name in ("shape", "scale", "mu", "sigma", "offset", "exponent"):
        s.add_argument(f"--{name}", type=float, default=None)
    s.add_argument("--out-hist", default=None)
    s.add_argument("--out-truth", default=None)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="relative errors of the estimators against truth curves")
    c.add_argument("--model", choices=sorted(MODELS), default=None)
    c.add_argument("--L", type=int, default=100_000)
    c.add_argument("--reps", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--input", default=None, help="histogram to score (with --truth)")
    c.add_argument("--truth", default=None, help="truth TSV written by 'simulate --out-truth'")
    c.add_argument("--methods", type=lambda s: s.split(","), default=None)
    c.add_argument("--m-max", type=int, default=M_MAX)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except RsacError as exc:
        sys.stderr.write(f"rsac: error: {exc}\n")
        return exc.exit_code
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"rsac: numeric failure: {exc}\n")
        return 4
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
