"""Command-line interface: ``maxent-oie fit | eval | conditional | compare``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import math
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import modelfile
from .core import Dataset
from .density import conditional_density, density_at, evaluation_table
from .errors import (
    DegenerateConditionalError,
    InfeasibleMomentsError,
    MaxEntError,
    NotConvergedError,
    SingularBasisError,
    SupportError,
)
from .quadrature import integrate
from .selection import BENCHMARK_ID, Rival, compare_conditional, compare_unconditional, evidence, sweep_degrees
from .solver import MaxEntFit, SolverConfig, fit_maxent
from .support import parse_support

log = logging.getLogger("maxent_oie")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

HINTS = {
    InfeasibleMomentsError: "hint: enlarge the support (--support) so every observation is strictly inside",
    SingularBasisError: "hint: lower --degree or check for constant columns",
    NotConvergedError: "hint: raise --max-iters, loosen --tol or lower --degree",
    DegenerateConditionalError: "hint: condition on a point closer to the bulk of the data",
}


class InputError(Exception):
    """Bad user input; reported without a traceback and exit code 2."""


def read_csv(path: str) -> Dataset:
    """Numeric CSV, one observation per row, optional header line."""
    try:
        fh = sys.stdin if path == "-" else open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    rows: List[List[float]] = []
    width = None
    with fh if fh is not sys.stdin else contextlib.nullcontext(fh):
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise InputError(f"{path}: line {lineno}: non-numeric value in {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise InputError(f"{path}: line {lineno}: non-finite value in {row!r}")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputError(f"{path}: line {lineno}: expected {width} columns, found {len(values)}")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return Dataset(np.array(rows))


def _parse_point(text: str, dim: int, what: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InputError(f"{what} {text!r} is not a comma-separated list of numbers") from None
    if vals.size != dim:
        raise InputError(f"{what} {text!r} has {vals.size} coordinates, expected {dim}")
    return vals


def _parse_degrees(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--sweep {text!r} must be a comma-separated list of integers") from None


def _parse_rival(text: str) -> Rival:
    parts = text.rsplit(":", 2)
    if len(parts) != 3:
        raise InputError(f"--rival {text!r} must look like name:logL:K")
    try:
        return Rival(parts[0], float(parts[1]), int(parts[2]))
    except ValueError:
        raise InputError(f"--rival {text!r}: logL must be a number and K an integer") from None


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _dump_trace(fit: MaxEntFit) -> None:
    print(f"# solver trace (degree {fit.basis.max_degree})", file=sys.stderr)
    print("iter,dual_value,grad_norm,step,ridge", file=sys.stderr)
    for r in fit.trace:
        print(f"{r.iteration},{r.dual_value!r},{r.grad_norm!r},{r.step_length!r},{r.ridge!r}", file=sys.stderr)


def _write_csv(header: Sequence[str], rows: np.ndarray, out: Optional[str]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    if out:
        with open(out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_fit(args) -> int:
    data = read_csv(args.csv)
    try:
        support = parse_support(args.support, data.points, data.dim)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    config = SolverConfig(grad_tol=args.tol, max_iters=args.max_iters)
    sweep = None
    if args.sweep:
        degrees = _parse_degrees(args.sweep)
        try:
            sweep = sweep_degrees(data, support, degrees, config, args.nodes, allow_odd=args.allow_odd)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        fit = sweep.best
        all_ok = all(r.converged for r in sweep.results)
    else:
        try:
            fit = fit_maxent(data, support, args.degree, args.nodes, config)
        except SupportError as exc:
            raise InputError(str(exc)) from None
        all_ok = fit.converged
    if args.verbose:
        if sweep is not None:
            for r in sweep.results:
                if r.fit is not None:
                    _dump_trace(r.fit)
        else:
            _dump_trace(fit)

    n = data.n_rows
    mass = integrate(fit.grid, np.exp(fit.grid.basis_values @ fit.lambda_hat - fit.log_partition_at_opt))
    print(f"data: N={n}, K={data.dim}")
    print(f"support: {support.describe()}")
    if sweep is not None:
        print("degree  L      logL             evidence         converged")
        for r in sweep.results:
            L = r.fit.n_params if r.fit is not None else "-"
            print(f"{r.degree:<7d} {L!s:<6} {_fmt(r.log_likelihood):<16} {_fmt(r.evidence):<16} {r.converged}")
        print(f"selected A={sweep.selected_degree}")
    print(f"degree A={fit.basis.max_degree}, lambda dimension L={fit.n_params}")
    print(f"lambda_hat: [{', '.join(_fmt(v) for v in fit.lambda_hat)}]")
    print(f"H_min: {_fmt(fit.h_min)}")
    print(f"log-likelihood: {_fmt(fit.log_likelihood)}")
    if n >= 2:
        print(f"evidence: {_fmt(evidence(fit.log_likelihood, fit.n_params, n))}")
    print(f"integral of density: {mass:.12f}")
    print(f"iterations: {fit.iterations}, gradient norm: {fit.grad_norm_final:.3e}, converged: {fit.converged}")
    if args.out:
        modelfile.save_model(args.out, fit, data, sweep)
        print(f"model written to {args.out}")
    if not all_ok:
        print("error: not every requested fit converged", file=sys.stderr)
        print(HINTS[NotConvergedError], file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_eval(args) -> int:
    model = modelfile.load_model(args.model)
    d = model.density
    if not args.at and args.table is None and not args.plot:
        raise InputError("eval needs --at, --table or --plot")
    for text in args.at or ():
        x = _parse_point(text, d.dim, "--at")
        if not model.support.contains(x[None, :])[0]:
            print(f"warning: point {text} is outside the support {model.support.describe()}", file=sys.stderr)
        print(repr(density_at(d, x)))
    if args.table is not None:
        pts, vals = evaluation_table(d, args.table)
        header = [f"x{k + 1}" for k in range(d.dim)] + ["density"]
        _write_csv(header, np.column_stack([pts, vals]), args.out)
        if args.plot:
            from .plotting import plot_density

            plot_density(d, args.plot)
    elif args.plot:
        from .plotting import plot_density

        plot_density(d, args.plot)
    return EXIT_OK


def cmd_conditional(args) -> int:
    model = modelfile.load_model(args.model)
    d = model.density
    if d.dim < 2:
        raise InputError("conditional needs a model fitted on (X, Y) with at least two columns")
    x = _parse_point(args.given, d.dim - 1, "--given")
    try:
        table = conditional_density(d, x, args.nodes)
    except SupportError as exc:
        raise InputError(str(exc)) from None
    if args.expect:
        print(repr(table.expectation()))
    if args.table or not args.expect:
        _write_csv(["y", "density"], np.column_stack([table.y, table.values]), args.out)
    if args.plot:
        from .plotting import plot_conditional

        plot_conditional(table, args.plot)
    return EXIT_OK


def cmd_compare(args) -> int:
    data = read_csv(args.data)
    bench = modelfile.load_model(args.benchmark)
    rivals = [_parse_rival(r) for r in args.rival or ()]
    try:
        if args.conditional:
            if not args.marginal:
                raise InputError("--conditional requires --marginal model.json (fit on the X columns)")
            marginal = modelfile.load_model(args.marginal)
            joint_fit = bench.restore_fit(data)
            marg_fit = marginal.restore_fit(data.columns(slice(0, data.dim - 1)))
            scores = compare_conditional(data, rivals, joint_fit, marg_fit)
        else:
            scores = compare_unconditional(data, bench.restore_fit(data), rivals)
    except modelfile.ModelFileError as exc:
        raise InputError(str(exc)) from None

    report = {
        "mode": "conditional" if args.conditional else "unconditional",
        "n": data.n_rows,
        "models": [s.to_dict() for s in scores],
    }
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.json:
        sys.stdout.write(text)
    else:
        width = max(8, max(len(s.model_id) for s in scores) + 2)
        print(f"{'model':<{width}}{'logL':>18}{'K':>6}{'evidence':>18}{'posterior':>14}")
        for s in scores:
            label = s.model_id + (" *" if s.model_id == BENCHMARK_ID else "")
            print(f"{label:<{width}}{_fmt(s.log_likelihood):>18}{s.k_params:>6d}{_fmt(s.evidence):>18}{s.posterior:>14.6g}")
        print("* model 0 is the maximum-entropy benchmark")
    if scores[0].posterior > 0.5:
        print(
            f"note: P(0|D) = {scores[0].posterior:.4g} > 0.5; the benchmark beats every rival, so all rival models fit poorly",
            file=sys.stderr,
        )
    if args.plot:
        from .plotting import plot_posteriors

        plot_posteriors(scores, args.plot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxent-oie", description="Maximum-entropy density estimation and BIC model comparison")
    p.add_argument("--verbose", "-v", action="store_true", help="debug logging and solver traces on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a maximum-entropy density to CSV data")
    f.add_argument("csv")
    g = f.add_mutually_exclusive_group()
    g.add_argument("--degree", type=int, default=4, help="maximum total degree A (default 4)")
    g.add_argument("--sweep", help='comma-separated degrees, e.g. "2,4,6"; selects by evidence')
    f.add_argument("--allow-odd", action="store_true", help="permit odd degrees in --sweep")
    f.add_argument("--support", default="auto", help='"box:lo1,hi1;lo2,hi2", "ball:R" or "auto" (default)')
    f.add_argument("--nodes", type=int, default=None, help="Gauss-Legendre nodes per dimension")
    f.add_argument("--tol", type=float, default=1e-8, help="gradient infinity-norm tolerance")
    f.add_argument("--max-iters", type=int, default=100)
    f.add_argument("--out", help="model JSON path")
    f.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS, help="dump solver traces")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate a fitted density")
    e.add_argument("model")
    e.add_argument("--at", action="append", help='point "x1,x2,..."; may repeat')
    e.add_argument("--table", type=int, metavar="POINTS_PER_DIM", help="evenly spaced evaluation table")
    e.add_argument("--out", help="CSV path for --table (default stdout)")
    e.add_argument("--plot", help="render the density to this image file")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("conditional", help="conditional density of the last column")
    c.add_argument("model")
    c.add_argument("--given", required=True, help='conditioning point "x1,..."')
    c.add_argument("--expect", action="store_true", help="print E[Y | X = x]")
    c.add_argument("--table", action="store_true", help="print the f(y | x) table as CSV")
    c.add_argument("--nodes", type=int, default=256, help="Gauss-Legendre nodes along y")
    c.add_argument("--out", help="CSV path for --table (default stdout)")
    c.add_argument("--plot", help="render f(y | x) to this image file")
    c.set_defaults(func=cmd_conditional)

    m = sub.add_parser("compare", help="evidence and posterior probabilities against the benchmark")
    m.add_argument("--data", required=True)
    m.add_argument("--benchmark", required=True, help="model JSON fitted on --data (joint fit in conditional mode)")
    m.add_argument("--marginal", help="model JSON fitted on the X columns (conditional mode)")
    m.add_argument("--rival", action="append", help='"name:logL:K"; may repeat')
    m.add_argument("--conditional", action="store_true")
    m.add_argument("--out", help="write the JSON report here")
    m.add_argument("--json", action="store_true", help="print JSON instead of the text table")
    m.add_argument("--plot", help="render posterior probabilities to this image file")
    m.set_defaults(func=cmd_compare)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    threads = os.environ.get("MAXENT_THREADS")
    limiter = contextlib.nullcontext()
    if threads:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=int(threads))
    try:
        with limiter:
            return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except modelfile.ModelFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaxEntError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        hint = HINTS.get(type(exc))
        if hint:
            print(hint, file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
