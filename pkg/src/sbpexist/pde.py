"""Derivative convergence study and the SBP-SAT advection benchmark.

The benchmark solves ``u_t + u_x = 0`` on ``[0, 1000]`` with zero initial
data and a Gaussian pulse fed in at ``x = 0`` through a SAT penalty,

    v_t + D v = -(v_0 - g(t)) P^{-1} e_0,

stepped with Adams-Bashforth of order ``q`` at ``k = h / (cfl1 * cfl2)``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numba
import numpy as np

from .construct import (
    ClosureManifold,
    Representation,
    UnsupportedGrid,
    assemble,
    closure_for,
    min_grid,
)
from .existence import SbpParameters, min_closure_search
from .stencil import UnsupportedParameters, central_coefficients

log = logging.getLogger(__name__)

LENGTH = 1000.0
FINAL_TIME = 1000.0
# pulse width: exp(-a * 10**2) = 1e-16
PULSE_A = -math.log(1e-16) / 100.0
PULSE_CENTER = 10.0

CFL1 = {2: 1.4, 3: 1.6, 4: 1.8, 5: 1.9, 6: 2.0, 7: 2.1}
CFL2 = {3: 1.39, 4: 2.38, 6: 8.93, 7: 17.5, 8: 34.1}
BENCH_N = (2000, 4000, 6000, 8000, 10000, 12000, 14000)
DIVERGENCE_FACTOR = 1e3
TINY = 1e-150


class Diverged(RuntimeError):
    pass


def cfl_lookup(s: int, q: int) -> tuple[float, float]:
    if s not in CFL1 or q not in CFL2:
        raise UnsupportedParameters(f"no CFL multipliers for s={s}, q={q}")
    return CFL1[s], CFL2[q]


# {{{ Adams-Bashforth


@dataclass(frozen=True)
class AbScheme:
    """``v[n+1] = v[n] + k * sum_j beta[j] * F[n-j]``."""

    q: int
    beta: tuple[Fraction, ...]


def _poly_mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


@lru_cache(maxsize=None)
def ab_coefficients(q: int) -> AbScheme:
    """Integrate the Lagrange basis on nodes ``0, -1, ..., -(q-1)`` over
    ``[0, 1]`` (time in units of the step)."""
    if q < 1:
        raise ValueError("order must be >= 1")
    nodes = [-j for j in range(q)]
    beta = []
    for j in range(q):
        poly = [Fraction(1)]
        denom = Fraction(1)
        for m in range(q):
            if m != j:
                poly = _poly_mul(poly, [Fraction(-nodes[m]), Fraction(1)])
                denom *= nodes[j] - nodes[m]
        integral = sum((c / (p + 1) for p, c in enumerate(poly)), Fraction(0))
        beta.append(integral / denom)
    return AbScheme(q, tuple(beta))


# }}}


def boundary_data(t):
    return np.exp(-PULSE_A * (np.asarray(t, dtype=float) - PULSE_CENTER) ** 2)


def exact_solution(x: np.ndarray, t: float) -> np.ndarray:
    return boundary_data(t - x)


# {{{ operators used by the experiments


def experiment_params(s: int) -> SbpParameters:
    """``t = s`` with the smallest closure, except ``r = 15`` for ``s = 6``."""
    if s == 6:
        return SbpParameters(6, 6, 15)
    r, _ = min_closure_search(s, s)
    return SbpParameters(s, s, r)


@dataclass(frozen=True)
class OperatorSpec:
    """A specific closure: the manifold plus exact coordinates on it."""

    closure: ClosureManifold
    xi: tuple[Fraction, ...] = ()

    @property
    def params(self) -> SbpParameters:
        return self.closure.params


@lru_cache(maxsize=None)
def optimized_operator(params: SbpParameters) -> OperatorSpec:
    """Max-min norm plus surrogate-optimal closure, cached per process."""
    from .optimize import optimize_closure

    closure = closure_for(params)
    if closure.dof_D == 0:
        return OperatorSpec(closure, ())
    oc = optimize_closure(closure)
    return OperatorSpec(closure, oc.xi)


# }}}


# {{{ convergence study


@dataclass
class ConvergenceStudy:
    params: SbpParameters
    N: list[int]
    errors: list[float]
    fitted_order: float
    interior_errors: list[float] = field(default_factory=list)


def fit_order(N: Sequence[int], errors: Sequence[float]) -> float:
    """Minus the least-squares slope of log(error) against log(N)."""
    slope = np.polyfit(np.log(np.asarray(N, float)), np.log(np.asarray(errors, float)), 1)[0]
    return float(-slope)


def derivative_convergence(
    spec: OperatorSpec, N_list: Iterable[int], digits: int | None = None
) -> ConvergenceStudy:
    """Max-norm error of ``D exp(x)`` against ``exp(x)`` on ``[0, 1]``.

    By default the operator is applied in double precision, whose rounding
    floor (about 1e-13 here) is reached at modest ``N`` by the wider
    operators.  With ``digits`` the exact operator is applied to samples
    carried with that many decimal digits, which isolates truncation error.
    """
    N_list = list(N_list)
    errs, inner = [], []
    r = spec.params.r
    for N in N_list:
        if N < min_grid(spec.params):
            raise UnsupportedGrid(f"N={N} below minimum grid {min_grid(spec.params)}")
        if digits is None:
            op = assemble(spec.closure, spec.xi, n=N, mode=Representation.FLOAT)
            x = np.linspace(0.0, 1.0, N)
            err = np.abs(op.D @ np.exp(x) - np.exp(x))
        else:
            err = _decimal_errors(spec, N, digits)
        errs.append(float(err.max()))
        inner.append(float(err[r : N - r].max()))
    return ConvergenceStudy(spec.params, N_list, errs, fit_order(N_list, errs), inner)


def _decimal_errors(spec: OperatorSpec, N: int, digits: int) -> np.ndarray:
    op = assemble(spec.closure, spec.xi, n=N, mode=Representation.EXACT)
    with localcontext() as ctx:
        ctx.prec = digits
        f = [(Decimal(i) / (N - 1)).exp() for i in range(N)]
        acc = [Decimal(0)] * N
        for (i, j), v in op.D.items():
            acc[i] += Decimal(v.numerator) / Decimal(v.denominator) * f[j]
        return np.array([float(abs(a - b)) for a, b in zip(acc, f)])


# }}}


# {{{ advection


@dataclass
class AdvectionRun:
    s: int
    q: int
    N: int
    params: SbpParameters | None = None
    h: float = 0.0
    k: float = 0.0
    steps: int = 0
    final_time: float = 0.0
    final_error: float = math.nan
    cpu_time: float = math.nan
    diverged: bool = False
    solution: np.ndarray | None = field(default=None, repr=False)


@numba.njit(cache=True, fastmath=True)
def _apply_rhs(v, out, corner, alpha, r, s, sat_weight, gval):
    """out = -D v - (v[0] - g) * sat_weight * e0, for the step-h operator."""
    n = v.shape[0]
    width = r + s
    for i in range(r):
        acc = 0.0
        for j in range(width):
            acc += corner[i, j] * v[j]
        out[i] = -acc
        acc = 0.0
        for j in range(width):
            acc -= corner[i, j] * v[n - 1 - j]
        out[n - 1 - i] = -acc
    for i in range(r, n - r):
        out[i] = 0.0
    for m in range(s):
        a = alpha[m]
        for i in range(r, n - r):
            out[i] -= a * (v[i + m + 1] - v[i - m - 1])
    out[0] -= (v[0] - gval) * sat_weight


@numba.njit(cache=True, fastmath=True)
def _ab_march(v, hist, head, beta, corner, alpha, r, s, sat_weight, k, t0, steps,
              pulse_a, pulse_c, limit):
    """Advance ``steps`` AB steps from time ``t0``.

    ``hist[(head - j) % q]`` holds F at step n - j.  Returns the number of
    steps taken; fewer than ``steps`` means the amplitude limit was hit.
    """
    q = beta.shape[0]
    n = v.shape[0]
    for m in range(steps):
        for j in range(q):
            row = hist[(head - j) % q]
            c = k * beta[j]
            for i in range(n):
                v[i] += c * row[i]
        # dispersive tails ahead of the pulse decay into subnormals, which
        # are very slow; they are far below any measured error
        for i in range(n):
            if abs(v[i]) < TINY:
                v[i] = 0.0
        t = t0 + (m + 1) * k
        head = (head + 1) % q
        g = math.exp(-pulse_a * (t - pulse_c) ** 2)
        _apply_rhs(v, hist[head], corner, alpha, r, s, sat_weight, g)
        if m % 512 == 0:
            big = 0.0
            for i in range(n):
                a = abs(v[i])
                if a > big:
                    big = a
            if not big < limit:
                return m + 1
    return steps


def step_size(s: int, q: int, h: float) -> float:
    c1, c2 = cfl_lookup(s, q)
    return h / (c1 * c2)


def solve_advection(
    run: AdvectionRun,
    spec: OperatorSpec | None = None,
    final_time: float = FINAL_TIME,
    keep_solution: bool = False,
    start_time: float = 0.0,
    k: float | None = None,
) -> AdvectionRun:
    """Integrate the benchmark and fill in error and timing.

    The first ``q - 1`` history levels are seeded from the exact solution.
    The step ``k`` satisfies ``cfl1 * cfl2 * k = h`` unless given; the run
    takes ``ceil((final_time - start_time) / k)`` steps and is compared with
    the exact solution at the time actually reached.
    """
    s, q, N = run.s, run.q, run.N
    cfl_lookup(s, q)
    if spec is None:
        spec = optimized_operator(experiment_params(s))
    params = spec.params
    if N < min_grid(params):
        raise UnsupportedGrid(f"N={N} below minimum grid {min_grid(params)}")
    h = LENGTH / (N - 1)
    if k is None:
        k = step_size(s, q, h)
    steps_total = math.ceil((final_time - start_time) / k - 1e-9)

    op = assemble(spec.closure, spec.xi, n=N, h=h, mode=Representation.FLOAT)
    corner = np.asarray(op.corner, dtype=float) / h
    alpha = np.array([float(a) for a in central_coefficients(s).alpha]) / h
    sat_weight = 1.0 / float(op.P[0])
    beta = np.array([float(b) for b in ab_coefficients(q).beta])
    x = np.linspace(0.0, LENGTH, N)

    hist = np.zeros((q, N))
    v = np.zeros(N)
    for m in range(q):
        tm = start_time + m * k
        v = exact_solution(x, tm) if (m or start_time) else np.zeros(N)
        _apply_rhs(v, hist[m], corner, alpha, params.r, s, sat_weight, float(boundary_data(tm)))
    head = q - 1
    v = v.copy()
    remaining = steps_total - (q - 1)

    # compile outside the timed region (a no-op once the kernel is cached)
    _ab_march(v.copy(), hist.copy(), head, beta, corner, alpha, params.r, s, sat_weight, k,
              0.0, 0, PULSE_A, PULSE_CENTER, DIVERGENCE_FACTOR)
    t_start = time.process_time()
    done = _ab_march(v, hist, head, beta, corner, alpha, params.r, s, sat_weight, k,
                     start_time + (q - 1) * k, remaining, PULSE_A, PULSE_CENTER, DIVERGENCE_FACTOR)
    cpu = time.process_time() - t_start
    t_end = start_time + ((q - 1) + done) * k
    out = replace(run, params=params, h=h, k=k, steps=steps_total, final_time=t_end,
                  cpu_time=cpu)
    if done < remaining or not np.all(np.isfinite(v)) or np.max(np.abs(v)) >= DIVERGENCE_FACTOR:
        out.diverged = True
        raise Diverged(f"s={s} q={q} N={N} blew up near t={t_end:.3f}")
    out.final_error = float(np.max(np.abs(v - exact_solution(x, t_end))))
    if keep_solution:
        out.solution = v
    return out


def sat_rhs(op, v: np.ndarray, t: float, g: Callable[[float], float]) -> np.ndarray:
    """Semi-discrete right-hand side with a general operator (for checks)."""
    out = -(op.D @ v)
    out[0] -= (v[0] - g(t)) / op.P[0]
    return out


CSV_HEADER = ("s", "q", "N", "final_error", "cpu_seconds")


def benchmark_sweep(
    s_values: Sequence[int] = tuple(CFL1),
    q_values: Sequence[int] = tuple(CFL2),
    N_values: Sequence[int] = BENCH_N,
    on_result: Callable[[AdvectionRun], None] | None = None,
) -> list[AdvectionRun]:
    """Every (s, q, N) combination; diverged runs are recorded, not raised."""
    results = []
    for s in s_values:
        spec = optimized_operator(experiment_params(s))
        for q in q_values:
            for N in N_values:
                run = AdvectionRun(s, q, N)
                try:
                    run = solve_advection(run, spec)
                except Diverged as exc:
                    log.warning("%s", exc)
                    run.diverged = True
                results.append(run)
                if on_result is not None:
                    on_result(run)
    return results


def csv_row(run: AdvectionRun) -> list[str]:
    err = "nan" if run.diverged else repr(run.final_error)
    return [str(run.s), str(run.q), str(run.N), err, repr(run.cpu_time)]


def write_csv(runs: Iterable[AdvectionRun], stream: io.TextIOBase | None = None) -> str:
    buf = stream if stream is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for run in runs:
        w.writerow(csv_row(run))
    return buf.getvalue() if stream is None else ""


def read_csv(text: str) -> list[AdvectionRun]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        err = float(row["final_error"])
        out.append(
            AdvectionRun(
                int(row["s"]), int(row["q"]), int(row["N"]),
                final_error=err, cpu_time=float(row["cpu_seconds"]), diverged=math.isnan(err),
            )
        )
    return out


def best_method(runs: Sequence[AdvectionRun], tolerance: float) -> tuple[int, int] | None:
    """The (s, q) reaching ``final_error <= tolerance`` in the least CPU time."""
    ok = [r for r in runs if not r.diverged and r.final_error <= tolerance]
    if not ok:
        return None
    best = min(ok, key=lambda r: r.cpu_time)
    return best.s, best.q


# }}}
