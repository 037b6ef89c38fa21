"""Centered difference coefficients, the interior/boundary coupling block and
the monomial matrices used by the accuracy conditions."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .ratlinalg import RationalMatrix, solve_affine


class UnsupportedParameters(ValueError):
    """Raised for parameter combinations outside the supported family."""


@dataclass(frozen=True)
class CenteredStencil:
    """Antisymmetric centered first-derivative stencil of order ``2s``.

    Only the positive offsets are stored: ``alpha[i-1]`` is the weight at
    offset ``+i`` and ``-alpha[i-1]`` the weight at offset ``-i``.
    """

    s: int
    alpha: tuple[Fraction, ...]

    def weight(self, offset: int) -> Fraction:
        if offset == 0 or abs(offset) > self.s:
            return Fraction(0)
        a = self.alpha[abs(offset) - 1]
        return a if offset > 0 else -a

    def full_row(self) -> list[Fraction]:
        return [self.weight(k) for k in range(-self.s, self.s + 1)]


@lru_cache(maxsize=None)
def central_coefficients(s: int) -> CenteredStencil:
    if s < 1:
        raise UnsupportedParameters("stencil half-width s must be >= 1")
    # even moments vanish by antisymmetry; odd moments: sum_i 2 i^k alpha_i = [k == 1]
    rows = [[2 * i**k for i in range(1, s + 1)] for k in range(1, 2 * s, 2)]
    rhs = [1] + [0] * (s - 1)
    sol = solve_affine(RationalMatrix.from_rows(rows), rhs)
    if not sol or sol.dof:
        raise AssertionError("centered accuracy system is not uniquely solvable")
    return CenteredStencil(s, tuple(sol.particular))


def _power(base: int, exp: int) -> int:
    # 0**0 == 1 in Python, which is the convention wanted here
    return base**exp


def coupling_block(s: int, r: int) -> RationalMatrix:
    """The ``r x s`` block of centered weights reaching from interior rows
    back into the closure: ``C[k, l] = alpha_{(r+l)-k}`` when that offset is
    in ``1..s`` and zero otherwise."""
    if r < s:
        raise UnsupportedParameters(f"closure size r={r} smaller than half-width s={s}")
    alpha = central_coefficients(s).alpha
    rows = []
    for k in range(r):
        row = []
        for ell in range(s):
            off = r + ell - k
            row.append(alpha[off - 1] if 1 <= off <= s else Fraction(0))
        rows.append(row)
    return RationalMatrix.from_rows(rows, cols=s)


@dataclass(frozen=True)
class AccuracyMatrices:
    X: RationalMatrix  # r x (t+1), X[i, j] = i**j
    Xtilde: RationalMatrix  # s x (t+1), Xtilde[i, j] = (r+i)**j
    Y: RationalMatrix  # r x (t+1), Y[i, j] = j * i**(j-1)


def accuracy_matrices(s: int, t: int, r: int) -> AccuracyMatrices:
    if t < 1 or r < 1 or s < 1:
        raise UnsupportedParameters("s, t and r must all be >= 1")
    X = [[_power(i, j) for j in range(t + 1)] for i in range(r)]
    Xt = [[_power(r + i, j) for j in range(t + 1)] for i in range(s)]
    Y = [[j * _power(i, j - 1) if j else 0 for j in range(t + 1)] for i in range(r)]
    return AccuracyMatrices(
        RationalMatrix.from_rows(X, cols=t + 1),
        RationalMatrix.from_rows(Xt, cols=t + 1),
        RationalMatrix.from_rows(Y, cols=t + 1),
    )
