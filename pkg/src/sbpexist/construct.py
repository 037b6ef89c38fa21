"""Boundary closures for a given norm and assembly of full operators.

For a positive norm satisfying the compatibility conditions, the closure
block ``B`` of the top rows is ``B = B2 - e0 e0^T / 2`` with ``B2``
antisymmetric and solving ``B2 X = P Y - C Xtilde - B1 X``.  The solutions
form an affine family ``B0 + sum_j xi_j Z_j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .existence import NormCandidate, SbpParameters, exists_sbp
from .ratlinalg import RationalMatrix, solve_affine
from .stencil import accuracy_matrices, central_coefficients, coupling_block


class UnsupportedGrid(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """A system that theory guarantees solvable was not; indicates a bug."""


class Representation(enum.Enum):
    EXACT = "exact"
    FLOAT = "float"


def lower_pairs(r: int) -> list[tuple[int, int]]:
    """Strictly-lower-triangle positions of an r x r matrix, row-major."""
    return [(i, j) for i in range(r) for j in range(i)]


def _antisym(r: int, values: Sequence[Fraction]) -> list[list[Fraction]]:
    M = [[Fraction(0)] * r for _ in range(r)]
    for (i, j), v in zip(lower_pairs(r), values):
        M[i][j] = v
        M[j][i] = -v
    return M


@dataclass(frozen=True)
class ClosureManifold:
    params: SbpParameters
    norm: NormCandidate
    B0: RationalMatrix
    basis: tuple[RationalMatrix, ...]
    C: RationalMatrix

    @property
    def dof_D(self) -> int:
        return len(self.basis)

    def B(self, xi: Sequence = ()) -> RationalMatrix:
        xi = list(xi)
        if len(xi) != self.dof_D:
            raise ValueError(f"expected {self.dof_D} manifold coordinates, got {len(xi)}")
        out = self.B0
        for c, Z in zip(xi, self.basis):
            c = Fraction(c)
            if c:
                out = out + Z.scale(c)
        return out

    def closure_rows(self, xi: Sequence = ()) -> list[list[Fraction]]:
        """Top ``r`` rows of the derivative at h = 1, columns ``0 .. r+s-1``."""
        B = self.B(xi)
        r, s = self.params.r, self.params.s
        w = self.norm.weights
        return [
            [B[i, j] / w[i] for j in range(r)] + [self.C[i, j] / w[i] for j in range(s)]
            for i in range(r)
        ]

    def closure_rows_float(self, xi: Sequence = ()) -> np.ndarray:
        """:meth:`closure_rows` evaluated exactly, then rounded once.

        Float ``xi`` are converted to rationals without loss.  Summing the
        basis in floating point would cancel badly: basis entries reach
        1e9 and beyond for wide closures.
        """
        rows = self.closure_rows([Fraction(c) for c in xi])
        return np.array([[float(v) for v in row] for row in rows])

    def lower_vector(self, M: RationalMatrix) -> list[Fraction]:
        return [M[i, j] for i, j in lower_pairs(self.params.r)]

    def nearest_xi(self, B2_lower: Sequence[float]) -> tuple[Fraction, ...]:
        """Exact coordinates of the manifold member closest (least squares)
        to the antisymmetric target with strictly-lower entries ``B2_lower``."""
        d = self.dof_D
        if d == 0:
            return ()
        V = [self.lower_vector(Z) for Z in self.basis]
        b0 = self.lower_vector(self.B0)
        target = [Fraction(float(v)) - a for v, a in zip(B2_lower, b0)]
        gram = [[sum((a * b for a, b in zip(V[i], V[j]) if a and b), Fraction(0))
                 for j in range(d)] for i in range(d)]
        rhs = [sum((a * b for a, b in zip(V[i], target) if a), Fraction(0)) for i in range(d)]
        sol = solve_affine(RationalMatrix.from_rows(gram, cols=d), rhs)
        if not sol or sol.dof:
            raise ConsistencyError("manifold basis is not linearly independent")
        return sol.particular


def _to_float(M: RationalMatrix) -> np.ndarray:
    return np.array([float(v) for v in M.entries], dtype=float).reshape(M.rows, M.cols)


def closure_system(params: SbpParameters, norm: NormCandidate) -> tuple[RationalMatrix, list[Fraction]]:
    """Linear system for the strictly-lower entries of ``B2``.

    Equation ``(i, c)`` is entry ``(i, c)`` of ``B2 X = P Y - C Xtilde - B1 X``.
    """
    s, t, r = params.s, params.t, params.r
    acc = accuracy_matrices(s, t, r)
    X, Xt, Y = acc.X, acc.Xtilde, acc.Y
    C = coupling_block(s, r)
    pairs = lower_pairs(r)
    w = norm.weights
    rows = []
    rhs = []
    for i in range(r):
        for c in range(t + 1):
            row = [Fraction(0)] * len(pairs)
            for u, (a, b) in enumerate(pairs):
                # B2[a, b] = z, B2[b, a] = -z
                if a == i:
                    row[u] += X[b, c]
                elif b == i:
                    row[u] -= X[a, c]
            val = w[i] * Y[i, c]
            val -= sum((C[i, ell] * Xt[ell, c] for ell in range(s)), Fraction(0))
            if i == 0:
                # B1 = -e0 e0^T / 2
                val += Fraction(1, 2) * X[0, c]
            rows.append(row)
            rhs.append(val)
    return RationalMatrix.from_rows(rows, cols=len(pairs)), rhs


def solve_closure(params: SbpParameters, norm: NormCandidate) -> ClosureManifold:
    A, b = closure_system(params, norm)
    sol = solve_affine(A, b)
    if not sol:
        raise ConsistencyError(f"closure system infeasible for {params} with a compatible norm")
    r = params.r
    half = Fraction(1, 2)
    B0 = _antisym(r, sol.particular)
    B0[0][0] -= half
    basis = tuple(
        RationalMatrix.from_rows(_antisym(r, v), cols=r) for v in sol.basis_vectors()
    )
    return ClosureManifold(
        params, norm, RationalMatrix.from_rows(B0, cols=r), basis, coupling_block(params.s, r)
    )


def closure_for(params: SbpParameters | tuple[int, int, int]) -> ClosureManifold:
    """Existence check plus closure manifold at the max-min norm."""
    if not isinstance(params, SbpParameters):
        params = SbpParameters(*params)
    rep = exists_sbp(params)
    if not rep.exists:
        raise ValueError(f"no diagonal-norm operator exists for {params}")
    return solve_closure(params, rep.norm)


@dataclass(frozen=True)
class AssembledOperator:
    """Concrete ``n x n`` norm/derivative pair.

    ``P`` holds the diagonal of the norm.  ``D`` is a dict of nonzeros in
    exact mode and a CSR matrix in float mode.  ``corner`` is the top closure
    block at h = 1 (``r x (r+s)``), from which everything else follows.
    """

    params: SbpParameters
    n: int
    h: Fraction | float
    P: tuple | np.ndarray
    D: dict | sp.csr_matrix
    xi: tuple
    representation: Representation
    corner: tuple = field(repr=False, default=())

    @property
    def exact(self) -> bool:
        return self.representation is Representation.EXACT

    def dense_D(self):
        if self.exact:
            M = [[Fraction(0)] * self.n for _ in range(self.n)]
            for (i, j), v in self.D.items():
                M[i][j] = v
            return M
        return self.D.toarray()

    def apply(self, v):
        if self.exact:
            out = [Fraction(0)] * self.n
            for (i, j), a in self.D.items():
                out[i] += a * v[j]
            return out
        return self.D @ np.asarray(v, dtype=float)


def min_grid(params: SbpParameters) -> int:
    return 2 * params.r + 2 * params.s


def _entries(params: SbpParameters, n: int, corner, alpha, zero):
    """Nonzero pattern of the h = 1 derivative as ``{(i, j): value}``."""
    r, s = params.r, params.s
    D = {}
    for i in range(r):
        for j in range(r + s):
            v = corner[i][j]
            if v != zero:
                D[(i, j)] = v
                D[(n - 1 - i, n - 1 - j)] = -v
    for i in range(r, n - r):
        for k in range(1, s + 1):
            D[(i, i + k)] = alpha[k - 1]
            D[(i, i - k)] = -alpha[k - 1]
    return D


def assemble(
    closure: ClosureManifold,
    xi: Sequence = (),
    n: int | None = None,
    h=None,
    mode: Representation | str = Representation.EXACT,
) -> AssembledOperator:
    """Build the ``n``-point operator on a grid of step ``h``.

    ``h`` defaults to ``1/(n-1)`` (the unit interval).  Derivative entries
    scale with ``1/h`` and norm weights with ``h``.
    """
    mode = Representation(mode)
    xi = tuple(xi)
    if len(xi) != closure.dof_D:
        raise ValueError(f"expected {closure.dof_D} manifold coordinates, got {len(xi)}")
    if mode is Representation.EXACT:
        xi = tuple(Fraction(c) for c in xi)
        corner = closure.closure_rows(xi)
    else:
        corner = closure.closure_rows_float(xi)
    return assemble_from_corner(
        closure.params, closure.norm.weights, corner, n=n, h=h, mode=mode, xi=xi
    )


def assemble_from_corner(
    params: SbpParameters,
    weights: Sequence,
    corner,
    n: int | None = None,
    h=None,
    mode: Representation | str = Representation.EXACT,
    xi: Sequence = (),
) -> AssembledOperator:
    """Assemble from the boundary weights and the ``r x (r+s)`` top block of
    the step-one derivative (the data stored in coefficient files)."""
    mode = Representation(mode)
    if n is None:
        n = min_grid(params)
    if n < min_grid(params):
        raise UnsupportedGrid(f"n={n} is below the minimum {min_grid(params)} for {params}")
    r, s = params.r, params.s
    if len(weights) != r or len(corner) != r or any(len(row) != r + s for row in corner):
        raise ValueError(f"closure data does not match {params}")
    alpha = central_coefficients(s).alpha

    if mode is Representation.EXACT:
        h = Fraction(1, n - 1) if h is None else Fraction(h)
        corner = [[Fraction(v) for v in row] for row in corner]
        w = [Fraction(v) for v in weights]
        Pd = w + [Fraction(1)] * (n - 2 * r) + w[::-1]
        D1 = _entries(params, n, corner, alpha, Fraction(0))
        P = tuple(h * p for p in Pd)
        D = {ij: v / h for ij, v in D1.items()}
        return AssembledOperator(params, n, h, P, D, tuple(xi), mode, tuple(map(tuple, corner)))

    h = 1.0 / (n - 1) if h is None else float(h)
    corner = np.asarray([[float(v) for v in row] for row in corner], dtype=float)
    w = np.array([float(v) for v in weights])
    Pd = np.concatenate([w, np.ones(n - 2 * r), w[::-1]])
    D1 = _entries(params, n, corner, [float(a) for a in alpha], 0.0)
    keys = np.array(list(D1.keys()), dtype=np.int64)
    vals = np.array(list(D1.values()), dtype=float)
    D = sp.csr_matrix((vals / h, (keys[:, 0], keys[:, 1])), shape=(n, n))
    return AssembledOperator(
        params, n, h, h * Pd, D, tuple(float(c) for c in xi), mode,
        tuple(map(tuple, corner.tolist())),
    )


@dataclass
class VerificationReport:
    sbp_residual: float | Fraction
    corner_residuals: tuple  # residual at (0,0) and (n-1,n-1) against -1/+1
    boundary_accuracy: dict[int, float | Fraction]
    interior_accuracy: dict[int, float | Fraction]
    min_weight: float | Fraction
    exact: bool

    @property
    def max_residual(self):
        vals = [self.sbp_residual, *self.corner_residuals]
        vals += list(self.boundary_accuracy.values()) + list(self.interior_accuracy.values())
        return max(abs(v) for v in vals)

    def passed(self, tol: float = 1e-12) -> bool:
        if self.min_weight <= 0:
            return False
        if self.exact:
            return self.max_residual == 0
        return self.max_residual <= tol

    def lines(self) -> list[str]:
        out = [
            f"sbp identity residual: {self.sbp_residual}",
            f"corner residuals: {' '.join(str(v) for v in self.corner_residuals)}",
            f"min norm weight: {self.min_weight}",
        ]
        for d, v in self.boundary_accuracy.items():
            out.append(f"boundary accuracy degree {d}: {v}")
        for d, v in self.interior_accuracy.items():
            out.append(f"interior accuracy degree {d}: {v}")
        return out


def verify(op: AssembledOperator) -> VerificationReport:
    """Check the energy identity, polynomial accuracy and norm positivity.

    Accuracy is measured on monomials of the node index, ``x_i = i``, which is
    equivalent to any affine grid and keeps exact arithmetic small; the
    derivative is rescaled to h = 1 first.  Float residuals of the monomial
    tests are relative to the largest monomial value.
    """
    n, params = op.n, op.params
    r, s, t = params.r, params.s, params.t
    exact = op.exact
    zero = Fraction(0) if exact else 0.0

    # SBP identity: P D + D^T P = diag(-1, 0, ..., 0, 1)
    if exact:
        M = {}
        for (i, j), v in op.D.items():
            M[(i, j)] = M.get((i, j), zero) + op.P[i] * v
            M[(j, i)] = M.get((j, i), zero) + op.P[i] * v
        c0 = M.get((0, 0), zero) + 1
        c1 = M.get((n - 1, n - 1), zero) - 1
        off = [abs(v) for ij, v in M.items() if ij not in ((0, 0), (n - 1, n - 1))]
        sbp_res = max(off, default=zero)
    else:
        PD = sp.diags(op.P) @ op.D
        M = (PD + PD.T).tocoo()
        c0 = c1 = 0.0
        sbp_res = 0.0
        seen0 = seen1 = False
        for i, j, v in zip(M.row, M.col, M.data):
            if i == j == 0:
                c0 += v
                seen0 = True
            elif i == j == n - 1:
                c1 += v
                seen1 = True
            else:
                sbp_res = max(sbp_res, abs(v))
        c0 = c0 + 1 if seen0 else 1.0
        c1 = c1 - 1 if seen1 else -1.0

    scale = op.h  # D * h is the step-one operator
    if exact:
        D1 = {ij: v * scale for ij, v in op.D.items()}
    else:
        D1 = (op.D * scale).tocsr()

    def apply1(v):
        if exact:
            out = [zero] * n
            for (i, j), a in D1.items():
                out[i] += a * v[j]
            return out
        return D1 @ np.asarray(v, dtype=float)

    boundary, interior = {}, {}
    bottom = list(range(n - r, n))
    top = list(range(r))
    mid = list(range(r, n - r))
    for d in range(0, 2 * s + 1):
        if exact:
            f = [Fraction(i) ** d for i in range(n)]
            fp = [d * Fraction(i) ** (d - 1) if d else zero for i in range(n)]
        else:
            # centre the monomial to tame float cancellation
            c = (n - 1) / 2.0
            f = np.array([(i - c) ** d for i in range(n)], dtype=float)
            fp = np.array([d * (i - c) ** (d - 1) if d else 0.0 for i in range(n)])
        g = apply1(f)
        err = [g[i] - fp[i] for i in range(n)]
        norm = 1 if exact else max(1.0, float(np.max(np.abs(f))))
        if d <= t:
            boundary[d] = max(abs(err[i]) for i in top + bottom) / norm
        interior[d] = max(abs(err[i]) for i in mid) / norm

    return VerificationReport(
        sbp_res,
        (c0, c1),
        boundary,
        interior,
        min(op.P),
        exact,
    )
