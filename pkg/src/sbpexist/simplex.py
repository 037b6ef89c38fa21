"""Exact simplex solver for the max-min problem

    maximize  eta   subject to   x0 + G y >= eta  (entrywise),   y free.

Free variables are split into positive and negative parts.  The level is
shifted by ``m = min(x0)`` so the all-slack basis is feasible from the start
and the shifted level can be kept non-negative.  Pivoting follows Bland's
rule, so the method terminates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

from .ratlinalg import RationalMatrix, mat_vec

__all__ = ["LpStatus", "LpResult", "maximize_min_entry"]


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    eta: Fraction
    y: tuple[Fraction, ...]
    x: tuple[Fraction, ...]
    pivots: int = 0


def _q(v) -> mpq:
    v = Fraction(v)
    return mpq(v.numerator, v.denominator)


def _f(v) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


def maximize_min_entry(
    x0: Sequence,
    G: RationalMatrix,
    y_start: Sequence | None = None,
    max_pivots: int = 100_000,
) -> LpResult:
    """Maximize ``min_i (x0 + G y)_i`` over ``y``, exactly.

    ``y_start`` optionally moves the starting point of the search; the
    optimal value does not depend on it.  When the objective is unbounded
    the returned ``y`` is a point on an improving ray where every entry of
    ``x`` is at least one.
    """
    x0 = [Fraction(v) for v in x0]
    r = len(x0)
    if r == 0:
        raise ValueError("x0 must be non-empty")
    if G.rows != r:
        raise ValueError(f"G has {G.rows} rows, expected {r}")
    v = G.cols

    if y_start is None:
        y_start = [Fraction(0)] * v
    else:
        y_start = [Fraction(a) for a in y_start]
        if len(y_start) != v:
            raise ValueError("y_start has the wrong length")
    base = [a + b for a, b in zip(x0, mat_vec(G, y_start))] if v else list(x0)

    if v == 0:
        return LpResult(LpStatus.OPTIMAL, min(base), (), tuple(base))

    shift = min(base)
    # columns: y+ (0..v-1), y- (v..2v-1), level (2v), slacks (2v+1 ..)
    nvar = 2 * v + 1 + r
    lvl = 2 * v
    Gq = [[_q(G[i, j]) for j in range(v)] for i in range(r)]
    T = []
    for i in range(r):
        row = [mpq(0)] * (nvar + 1)
        for j in range(v):
            row[j] = -Gq[i][j]
            row[v + j] = Gq[i][j]
        row[lvl] = mpq(1)
        row[lvl + 1 + i] = mpq(1)
        row[nvar] = _q(base[i] - shift)
        T.append(row)
    # reduced costs of the objective "maximize level"
    cost = [mpq(0)] * (nvar + 1)
    cost[lvl] = mpq(1)
    basis = [lvl + 1 + i for i in range(r)]

    pivots = 0
    while True:
        enter = next((j for j in range(nvar) if cost[j] > 0), -1)
        if enter < 0:
            break
        leave = -1
        best = None
        for i in range(r):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][nvar] / a
                if (
                    best is None
                    or ratio < best
                    or (ratio == best and basis[i] < basis[leave])
                ):
                    best, leave = ratio, i
        if leave < 0:
            return _unbounded(T, cost, basis, enter, base, G, y_start, v, nvar, pivots)
        _pivot(T, cost, leave, enter)
        basis[leave] = enter
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex pivot limit exceeded")

    values = _basic_values(T, basis, nvar)
    y = [y_start[j] + _f(values.get(j, 0) - values.get(v + j, 0)) for j in range(v)]
    x = [a + b for a, b in zip(x0, mat_vec(G, y))]
    eta = min(x)
    if eta != shift + _f(values.get(lvl, 0)):
        raise AssertionError("simplex optimum inconsistent with min entry")
    return LpResult(LpStatus.OPTIMAL, eta, tuple(y), tuple(x), pivots)


def _pivot(T, cost, leave: int, enter: int) -> None:
    prow = T[leave]
    inv = 1 / prow[enter]
    nz = [j for j, a in enumerate(prow) if a]
    for j in nz:
        prow[j] *= inv
    for row in T:
        if row is prow:
            continue
        f = row[enter]
        if f:
            for j in nz:
                row[j] -= f * prow[j]
    f = cost[enter]
    if f:
        for j in nz:
            cost[j] -= f * prow[j]


def _basic_values(T, basis, nvar) -> dict[int, mpq]:
    return {b: T[i][nvar] for i, b in enumerate(basis)}


def _unbounded(T, cost, basis, enter, base, G, y_start, v, nvar, pivots) -> LpResult:
    values = _basic_values(T, basis, nvar)
    point = [_f(values.get(j, 0) - values.get(v + j, 0)) for j in range(v)]
    # moving the entering variable by lam changes basic variable i by -lam*T[i][enter]
    step = {b: -T[i][enter] for i, b in enumerate(basis)}
    step[enter] = mpq(1)
    direction = [_f(step.get(j, 0) - step.get(v + j, 0)) for j in range(v)]

    x_now = [a + b for a, b in zip(base, mat_vec(G, point))]
    dx = mat_vec(G, direction)
    lam = Fraction(0)
    for xi, di in zip(x_now, dx):
        if xi < 1:
            if di <= 0:
                raise AssertionError("improving ray does not raise every entry")
            lam = max(lam, (1 - xi) / di)
    y = [ys + p + lam * d for ys, p, d in zip(y_start, point, direction)]
    x = [a + lam * d for a, d in zip(x_now, dx)]
    return LpResult(LpStatus.UNBOUNDED, min(x), tuple(y), tuple(x), pivots)
