"""Compatibility conditions on the boundary norm and the existence decision.

An operator with parameters ``(s, t, r)`` and diagonal norm exists exactly
when the norm system below has a solution with all entries positive.  The
decision is a linear solve followed by a max-min linear program, both in
exact arithmetic.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_DOWN, ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Iterable

from .ratlinalg import RationalMatrix, solve_affine
from .simplex import LpStatus, maximize_min_entry
from .stencil import UnsupportedParameters, coupling_block

log = logging.getLogger(__name__)

#: eta reported when the norm system has no solution at all
INFEASIBLE_ETA = Fraction(-1)


@dataclass(frozen=True, order=True)
class SbpParameters:
    s: int
    t: int
    r: int

    def __post_init__(self) -> None:
        if self.s < 1 or self.t < 1:
            raise UnsupportedParameters(f"need s >= 1 and t >= 1, got {self}")
        if self.r < self.s:
            raise UnsupportedParameters(f"closure size r={self.r} is below s={self.s}")

    def __str__(self) -> str:
        return f"({self.s},{self.t},{self.r})"


@dataclass(frozen=True)
class NormCandidate:
    """Positive diagonal boundary norm (the first ``r`` weights, at h = 1)."""

    params: SbpParameters
    weights: tuple[Fraction, ...]
    eta: Fraction
    dof_P: int

    def __post_init__(self) -> None:
        if len(self.weights) != self.params.r:
            raise ValueError("need one weight per closure row")
        if min(self.weights) <= 0:
            raise ValueError("norm weights must be positive")


@dataclass(frozen=True)
class ExistenceReport:
    params: SbpParameters
    exists: bool
    eta: Fraction
    dof_P: int
    norm: NormCandidate | None = None

    @property
    def eta_decimal(self) -> str:
        return sig_digits(self.eta)

    def summary(self) -> str:
        p = self.params
        head = f"s={p.s} t={p.t} r={p.r}"
        if not self.exists:
            return f"{head} not exists dof_P={self.dof_P} eta={self.eta_decimal} ({self.eta})"
        return f"{head} exists dof_P={self.dof_P} eta={self.eta_decimal} ({self.eta})"


def sig_digits(value: Fraction, digits: int = 4, truncate: bool = False) -> str:
    """Scientific rendering with ``digits`` significant digits, e.g. ``2.077e-01``.

    ``truncate`` chops instead of rounding; published tables use both.
    """
    value = Fraction(value)
    with localcontext() as ctx:
        ctx.prec = 60
        d = Decimal(value.numerator) / Decimal(value.denominator)
        if d == 0:
            return f"{0:.{digits - 1}e}"
        exp = d.adjusted()
        q = Decimal(1).scaleb(exp - digits + 1)
        d = d.quantize(q, rounding=ROUND_DOWN if truncate else ROUND_HALF_EVEN)
        mant = d.scaleb(-d.adjusted())
        return f"{mant:.{digits - 1}f}e{d.adjusted():+03d}"


def matches_table(value: Fraction, published: str) -> bool:
    """True if ``published`` is ``value`` rounded or truncated to its digits."""
    digits = len(published.split("e")[0].replace("-", "").replace(".", ""))
    return published in (
        sig_digits(value, digits),
        sig_digits(value, digits, truncate=True),
    )


def _pow(base: int, exp: int) -> int:
    return base**exp


def _deriv_coeff(n: int, k: int) -> int:
    """``n * k**(n-1)`` with ``0 * 0**-1 == 0``."""
    return n * _pow(k, n - 1) if n else 0


def pq_pairs(t: int) -> list[tuple[int, int]]:
    return [(p, q) for p in range(t + 1) for q in range(p, t + 1)]


def _rhs(params: SbpParameters) -> list[Fraction]:
    s, t, r = params.s, params.t, params.r
    C = coupling_block(s, r)
    nz = [(k, ell, C[k, ell]) for k in range(r) for ell in range(s) if C[k, ell]]
    b = []
    for p, q in pq_pairs(t):
        acc = Fraction(0)
        for k, ell, c in nz:
            acc += (_pow(k, p) * _pow(r + ell, q) + _pow(k, q) * _pow(r + ell, p)) * c
        if p == 0 and q == 0:
            acc -= 1
        b.append(acc)
    return b


def build_diagonal_norm_system(params: SbpParameters) -> tuple[RationalMatrix, list[Fraction]]:
    """Rows indexed by ``(p, q)``, ``0 <= p <= q <= t`` in lexicographic order;
    one column per diagonal boundary weight."""
    rows = [
        [_deriv_coeff(p + q, k) for k in range(params.r)] for p, q in pq_pairs(params.t)
    ]
    return RationalMatrix.from_rows(rows, cols=params.r), _rhs(params)


def symmetric_unknowns(r: int) -> list[tuple[int, int]]:
    """Upper-triangle index pairs, row-major."""
    return [(k, ell) for k in range(r) for ell in range(k, r)]


def build_block_norm_system(params: SbpParameters) -> tuple[RationalMatrix, list[Fraction]]:
    """Same conditions for a full symmetric boundary norm.  The unknowns are
    the upper-triangle entries, row-major."""

    def f(p, q, k, ell):
        # q k^p l^(q-1) + p k^q l^(p-1), with 0 * 0^-1 = 0
        return (q * _pow(k, p) * _pow(ell, q - 1) if q else 0) + (
            p * _pow(k, q) * _pow(ell, p - 1) if p else 0
        )

    unknowns = symmetric_unknowns(params.r)
    rows = []
    for p, q in pq_pairs(params.t):
        row = []
        for k, ell in unknowns:
            row.append(f(p, q, k, ell) if k == ell else f(p, q, k, ell) + f(p, q, ell, k))
        rows.append(row)
    return RationalMatrix.from_rows(rows, cols=len(unknowns)), _rhs(params)


def exists_sbp(params: SbpParameters | tuple[int, int, int]) -> ExistenceReport:
    """Decide existence of a diagonal-norm operator for ``params``.

    When it exists, the report carries the norm maximizing the smallest
    weight.
    """
    if not isinstance(params, SbpParameters):
        params = SbpParameters(*params)
    A, b = build_diagonal_norm_system(params)
    sol = solve_affine(A, b)
    if not sol:
        return ExistenceReport(params, False, INFEASIBLE_ETA, 0)
    if sol.dof == 0:
        weights = sol.particular
        eta = min(weights)
    else:
        lp = maximize_min_entry(sol.particular, sol.basis)
        if lp.status is LpStatus.UNBOUNDED:
            # only possible if the weights can all grow together; a bounded
            # witness is enough for existence
            log.warning("unbounded norm LP for %s", params)
        weights, eta = lp.x, lp.eta
    if eta <= 0:
        return ExistenceReport(params, False, eta, sol.dof)
    norm = NormCandidate(params, tuple(weights), eta, sol.dof)
    return ExistenceReport(params, True, eta, sol.dof, norm)


class SearchCapExceeded(RuntimeError):
    pass


def min_closure_search(
    s: int, t: int, cap: int | None = None
) -> tuple[int, ExistenceReport]:
    """Smallest closure size ``r`` admitting an operator for ``(s, t)``.

    Existence is monotone in ``r``, so an upward doubling probe from
    ``r = s`` brackets the answer and bisection finishes it.
    """
    cap = 8 * s if cap is None else cap
    cache: dict[int, ExistenceReport] = {}

    def check(r: int) -> ExistenceReport:
        if r not in cache:
            cache[r] = exists_sbp(SbpParameters(s, t, r))
            log.debug("%s", cache[r].summary())
        return cache[r]

    if check(s).exists:
        return s, cache[s]
    lo, step = s, 1
    while True:
        hi = min(s + step, cap)
        if check(hi).exists:
            break
        if hi >= cap:
            raise SearchCapExceeded(f"no operator for s={s}, t={t} with r <= {cap}")
        lo, step = hi, step * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if check(mid).exists:
            hi = mid
        else:
            lo = mid
    return hi, cache[hi]


def max_boundary_order(s: int, t_top: int | None = None) -> tuple[int, ExistenceReport]:
    """Largest boundary order ``t`` admitting an operator with ``r = 2s``.

    Scans downward from ``t_top`` (default ``2s``); removing accuracy
    conditions can only enlarge the feasible set, so the first hit wins.
    """
    r = 2 * s
    t_top = 2 * s if t_top is None else t_top
    last = None
    for t in range(t_top, 0, -1):
        last = exists_sbp(SbpParameters(s, t, r))
        if last.exists:
            return t, last
    raise SearchCapExceeded(f"no operator with r={r} for s={s} even at t=1")


def sweep(params: Iterable[SbpParameters], workers: int | None = None) -> list[ExistenceReport]:
    """Run many independent existence checks, optionally in worker processes."""
    params = list(params)
    if workers is not None and workers <= 1:
        return [exists_sbp(p) for p in params]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(exists_sbp, params))
