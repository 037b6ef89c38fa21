"""Diagonal-norm SBP operators: existence, construction and benchmarks.

Exit codes: 0 on success, 1 when the requested operator does not exist or a
computation fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from typing import Sequence

from . import coeffio, pde
from .construct import Representation, assemble, closure_for, solve_closure, verify
from .existence import (
    SbpParameters,
    SearchCapExceeded,
    exists_sbp,
    max_boundary_order,
    min_closure_search,
)
from .stencil import UnsupportedParameters

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _params(s: int, t: int, r: int) -> SbpParameters:
    try:
        return SbpParameters(s, t, r)
    except UnsupportedParameters as exc:
        raise UsageError(str(exc)) from exc


def _table_row(rep) -> str:
    p = rep.params
    return f"s={p.s} t={p.t} r={p.r} dof_P={rep.dof_P} eta={rep.eta_decimal} ({rep.eta})"


def _operator_spec(args) -> pde.OperatorSpec:
    """Operator from files (``--p-file/--d-file``) is handled by callers;
    this builds from parameters, optionally surrogate-optimized."""
    params = _params(args.s, args.t, args.r)
    closure = closure_for(params)
    if getattr(args, "optimize", False):
        return pde.optimized_operator(params)
    return pde.OperatorSpec(closure, (0,) * closure.dof_D)


def cmd_exist(args) -> int:
    rep = exists_sbp(_params(args.s, args.t, args.r))
    verdict = "exists" if rep.exists else "not exists"
    print(f"{verdict} dof_P={rep.dof_P} eta={rep.eta_decimal}")
    print(f"eta_exact={rep.eta}")
    if rep.exists and args.show_norm:
        for i, w in enumerate(rep.norm.weights):
            print(f"{i} {w}")
    return EXIT_OK if rep.exists else EXIT_FAIL


def cmd_search(args) -> int:
    if args.s < 1:
        raise UsageError("s must be at least 1")
    try:
        if args.mode == "min-r":
            if args.t is None:
                raise UsageError("search min-r needs s and t")
            _, rep = min_closure_search(args.s, args.t, cap=args.cap)
        else:
            _, rep = max_boundary_order(args.s)
    except SearchCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(_table_row(rep))
    return EXIT_OK


def cmd_build(args) -> int:
    params = _params(args.s, args.t, args.r)
    rep = exists_sbp(params)
    if not rep.exists:
        print(f"error: no operator for {params} (eta={rep.eta_decimal})", file=sys.stderr)
        return EXIT_FAIL
    closure = solve_closure(params, rep.norm)
    if args.optimize and closure.dof_D:
        xi = pde.optimized_operator(params).xi
    else:
        xi = (0,) * closure.dof_D
    corner = closure.closure_rows(xi)
    files = coeffio.write_files(params, rep.norm.weights, corner, args.out_prefix, args.exact)
    print(files.p_file)
    print(files.d_file)
    return EXIT_OK


def _load_or_build(args, mode: Representation, n: int | None = None, h=None):
    if args.p_file or args.d_file:
        if not (args.p_file and args.d_file):
            raise UsageError("--p-file and --d-file go together")
        return coeffio.load_operator(args.p_file, args.d_file, n=n, h=h, mode=mode)
    if args.s is None or args.t is None or args.r is None:
        raise UsageError("give s t r or --p-file/--d-file")
    spec = _operator_spec(args)
    return assemble(spec.closure, spec.xi, n=n, h=h, mode=mode)


def cmd_verify(args) -> int:
    mode = Representation.FLOAT if args.float else Representation.EXACT
    op = _load_or_build(args, mode, n=args.n)
    report = verify(op)
    for line in report.lines():
        print(line)
    ok = report.passed(args.tol)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_spectrum(args) -> int:
    from .optimize import spectral_radius

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("n", "inv_h", "rho", "rho_h"))
    for n in args.n_list:
        op = _load_or_build(args, Representation.FLOAT, n=n)
        try:
            rho = spectral_radius(op)
        except RuntimeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
        w.writerow((n, repr(1.0 / op.h), repr(rho), repr(rho * op.h)))
    return EXIT_OK


def cmd_converge(args) -> int:
    params = pde.experiment_params(args.s) if args.r is None else _params(args.s, args.s, args.r)
    spec = pde.optimized_operator(params)
    study = pde.derivative_convergence(spec, args.N, digits=args.digits)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("N", "error", "interior_error"))
    for N, e, ei in zip(study.N, study.errors, study.interior_errors):
        w.writerow((N, repr(e), repr(ei)))
    print(f"# fitted_order={study.fitted_order:.3f}")
    return EXIT_OK


def cmd_advect(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(pde.CSV_HEADER)
    status = EXIT_OK
    for N in args.N:
        run = pde.AdvectionRun(args.s, args.q, N)
        try:
            run = pde.solve_advection(run, final_time=args.final_time)
        except pde.Diverged as exc:
            print(f"error: {exc}", file=sys.stderr)
            run.diverged = True
            status = EXIT_FAIL
        w.writerow(pde.csv_row(run))
        sys.stdout.flush()
    return status


def cmd_sweep(args) -> int:
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(pde.CSV_HEADER)

        def emit(run):
            w.writerow(pde.csv_row(run))
            out.flush()

        runs = pde.benchmark_sweep(args.s, args.q, args.N, on_result=emit)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_FAIL if any(r.diverged for r in runs) else EXIT_OK


def _add_params(p: argparse.ArgumentParser, optional: bool = False) -> None:
    nargs = "?" if optional else None
    for name in ("s", "t", "r"):
        p.add_argument(name, type=int, nargs=nargs)


def _add_files(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p-file", help="norm coefficient file (P_s_t_r.txt)")
    p.add_argument("--d-file", help="closure coefficient file (D_s_t_r.txt)")
    p.add_argument("--optimize", action="store_true", help="use the surrogate-optimal closure")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbpexist", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exist", help="decide existence for (s, t, r)")
    _add_params(p)
    p.add_argument("--show-norm", action="store_true", help="print the max-min norm weights")
    p.set_defaults(func=cmd_exist)

    p = sub.add_parser("search", help="smallest r for (s, t), or largest t at r = 2s")
    p.add_argument("mode", choices=("min-r", "max-t"))
    p.add_argument("s", type=int)
    p.add_argument("t", type=int, nargs="?")
    p.add_argument("--cap", type=int, default=None, help="largest r tried by min-r")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("build", help="write P/D coefficient files")
    _add_params(p)
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--exact", action="store_true", help="write exact p/q values")
    p.add_argument("--out-prefix", default=".", help="output directory")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="check SBP identity and accuracy")
    _add_params(p, optional=True)
    _add_files(p)
    p.add_argument("--n", type=int, default=None, help="grid size (default: minimum)")
    p.add_argument("--float", action="store_true", help="verify the float assembly")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum", help="spectral radius against 1/h (CSV)")
    _add_params(p, optional=True)
    _add_files(p)
    p.add_argument("--n-list", type=_int_list, default=[100, 200, 400, 800])
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("converge", help="derivative convergence study on exp(x)")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--N", type=_int_list, default=[60, 120, 240, 480])
    p.add_argument("--digits", type=int, default=None,
                   help="apply the exact operator in decimal arithmetic with this many digits")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("advect", help="advection benchmark runs (CSV)")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--N", type=_int_list, required=True)
    p.add_argument("--final-time", type=float, default=pde.FINAL_TIME)
    p.set_defaults(func=cmd_advect)

    p = sub.add_parser("sweep", help="full advection benchmark (CSV)")
    p.add_argument("--s", type=_int_list, default=list(pde.CFL1))
    p.add_argument("--q", type=_int_list, default=list(pde.CFL2))
    p.add_argument("--N", type=_int_list, default=list(pde.BENCH_N))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return args.func(args)
    except (UsageError, UnsupportedParameters) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
