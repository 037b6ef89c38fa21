"""Exact rational linear algebra.

Scalars are :class:`fractions.Fraction` at every public boundary.  The
elimination kernel runs on :class:`gmpy2.mpq`, which is the same canonical
rational type implemented in C, and converts back on the way out.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpq

Rational = Fraction

__all__ = [
    "Rational",
    "RationalMatrix",
    "AffineSolutionSet",
    "Infeasible",
    "INFEASIBLE",
    "parse_rational",
    "format_rational",
    "solve_affine",
    "rank",
    "mat_vec",
]


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"``, an integer or a decimal literal into a canonical Fraction."""
    return Fraction(text.strip())


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _to_fraction(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass(frozen=True)
class RationalMatrix:
    """Dense row-major matrix of Fractions."""

    rows: int
    cols: int
    entries: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if self.rows < 0 or self.cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} entries, got {len(self.entries)}"
            )

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence], cols: int | None = None) -> RationalMatrix:
        data = [[Fraction(v) for v in row] for row in rows]
        if cols is None:
            cols = len(data[0]) if data else 0
        for row in data:
            if len(row) != cols:
                raise ValueError("ragged rows")
        return cls(len(data), cols, tuple(v for row in data for v in row))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> RationalMatrix:
        return cls(rows, cols, (Fraction(0),) * (rows * cols))

    @classmethod
    def identity(cls, n: int) -> RationalMatrix:
        return cls.from_rows(
            [[1 if i == j else 0 for j in range(n)] for i in range(n)], cols=n
        )

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(ij)
        return self.entries[i * self.cols + j]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.entries[i * self.cols : (i + 1) * self.cols]

    def column(self, j: int) -> tuple[Fraction, ...]:
        return tuple(self.entries[i * self.cols + j] for i in range(self.rows))

    def tolist(self) -> list[list[Fraction]]:
        return [list(self.row(i)) for i in range(self.rows)]

    def transpose(self) -> RationalMatrix:
        return RationalMatrix.from_rows(
            [self.column(j) for j in range(self.cols)], cols=self.rows
        )

    def __matmul__(self, other: RationalMatrix) -> RationalMatrix:
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        cols = [other.column(j) for j in range(other.cols)]
        out = []
        for i in range(self.rows):
            r = self.row(i)
            out.append([sum((a * b for a, b in zip(r, c) if a and b), Fraction(0)) for c in cols])
        return RationalMatrix.from_rows(out, cols=other.cols)

    def __add__(self, other: RationalMatrix) -> RationalMatrix:
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return RationalMatrix(
            self.rows, self.cols, tuple(a + b for a, b in zip(self.entries, other.entries))
        )

    def __sub__(self, other: RationalMatrix) -> RationalMatrix:
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return RationalMatrix(
            self.rows, self.cols, tuple(a - b for a, b in zip(self.entries, other.entries))
        )

    def scale(self, c) -> RationalMatrix:
        c = Fraction(c)
        return RationalMatrix(self.rows, self.cols, tuple(c * a for a in self.entries))

    def is_zero(self) -> bool:
        return not any(self.entries)


def mat_vec(A: RationalMatrix, x: Sequence) -> list[Fraction]:
    if A.cols != len(x):
        raise ValueError(f"shape mismatch {A.shape} @ ({len(x)},)")
    x = [Fraction(v) for v in x]
    return [
        sum((a * b for a, b in zip(A.row(i), x) if a and b), Fraction(0))
        for i in range(A.rows)
    ]


@dataclass(frozen=True)
class AffineSolutionSet:
    """All solutions ``particular + basis @ y`` of a consistent system."""

    particular: tuple[Fraction, ...]
    basis: RationalMatrix  # n x dof, columns span the nullspace

    @property
    def dof(self) -> int:
        return self.basis.cols

    def point(self, y: Sequence) -> list[Fraction]:
        if len(y) != self.dof:
            raise ValueError(f"expected {self.dof} parameters, got {len(y)}")
        shift = mat_vec(self.basis, y) if self.dof else [Fraction(0)] * len(self.particular)
        return [a + b for a, b in zip(self.particular, shift)]

    def basis_vectors(self) -> list[tuple[Fraction, ...]]:
        return [self.basis.column(j) for j in range(self.dof)]


class Infeasible:
    """Marker returned when ``b`` is not in the range of ``A``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFEASIBLE"

    def __bool__(self) -> bool:
        return False


INFEASIBLE = Infeasible()


def _bitlen(q) -> int:
    return gmpy2.bit_length(q.numerator) + gmpy2.bit_length(q.denominator)


def _rref(rows: list[list], ncols: int) -> list[int]:
    """Reduce ``rows`` in place to reduced row echelon form over the first
    ``ncols`` columns and return the pivot columns.

    Columns are scanned left to right; within a column the pivot is the
    nonzero entry of smallest bit length, which keeps coefficient growth in
    check without changing the (canonical) result.
    """
    m = len(rows)
    pivots: list[int] = []
    top = 0
    for col in range(ncols):
        if top == m:
            break
        best = -1
        best_size = 0
        for i in range(top, m):
            v = rows[i][col]
            if v:
                size = _bitlen(v)
                if best < 0 or size < best_size:
                    best, best_size = i, size
        if best < 0:
            continue
        rows[top], rows[best] = rows[best], rows[top]
        prow = rows[top]
        inv = 1 / prow[col]
        width = len(prow)
        nz = [j for j in range(col, width) if prow[j]]
        for j in nz:
            prow[j] *= inv
        for i in range(m):
            if i == top:
                continue
            row = rows[i]
            f = row[col]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
        pivots.append(col)
        top += 1
    return pivots


def _as_mpq_rows(A: RationalMatrix, extra: Sequence | None = None) -> list[list]:
    out = []
    for i in range(A.rows):
        row = [mpq(v.numerator, v.denominator) for v in A.row(i)]
        if extra is not None:
            e = Fraction(extra[i])
            row.append(mpq(e.numerator, e.denominator))
        out.append(row)
    return out


def rank(A: RationalMatrix) -> int:
    """Exact rank."""
    if A.rows == 0 or A.cols == 0:
        return 0
    return len(_rref(_as_mpq_rows(A), A.cols))


def solve_affine(A: RationalMatrix, b: Sequence) -> AffineSolutionSet | Infeasible:
    """Solve ``A x = b`` exactly.

    Returns the full solution set, or ``INFEASIBLE`` when ``b`` is outside the
    range of ``A``.  Free variables are the non-pivot columns in ascending
    order; basis vector ``k`` has a one in the slot of the ``k``-th free
    variable and zeros in the other free slots, and the particular solution
    sets every free variable to zero.
    """
    if len(b) != A.rows:
        raise ValueError(f"right-hand side has length {len(b)}, matrix has {A.rows} rows")
    n = A.cols
    rows = _as_mpq_rows(A, b)
    pivots = _rref(rows, n)
    for row in rows[len(pivots):]:
        if row[n]:
            return INFEASIBLE
    pivot_set = set(pivots)
    free = [j for j in range(n) if j not in pivot_set]

    x0 = [Fraction(0)] * n
    for i, pc in enumerate(pivots):
        x0[pc] = _to_fraction(rows[i][n])

    basis_cols = []
    for fc in free:
        vec = [Fraction(0)] * n
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v = rows[i][fc]
            if v:
                vec[pc] = -_to_fraction(v)
        basis_cols.append(vec)
    G = RationalMatrix.from_rows(
        [[basis_cols[k][j] for k in range(len(free))] for j in range(n)], cols=len(free)
    )
    return AffineSolutionSet(tuple(x0), G)


def random_rational(rng: random.Random, bound: int = 20) -> Fraction:
    """Small random rational, for seeded property checks."""
    return Fraction(rng.randint(-bound, bound), rng.randint(1, bound))
