"""Choosing a closure from the manifold by minimizing a convex surrogate.

The spectral radius of the derivative is not convex in the manifold
coordinates.  The matrix ``P D - Q/2`` is skew-symmetric for every member of
the family, so its 2-norm equals its spectral radius and is convex; we
minimize that instead, as a semidefinite program.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .construct import (
    AssembledOperator,
    ClosureManifold,
    ConsistencyError,
    Representation,
    lower_pairs,
    min_grid,
)
from .stencil import central_coefficients

log = logging.getLogger(__name__)

DEFAULT_N = 100
SKEW_TOL = 1e-12


@dataclass(frozen=True)
class SurrogateFamily:
    """``C(xi) = C0 + sum_j xi_j Cj`` with every member skew-symmetric.

    Families built from a closure manifold use an orthonormal basis of the
    manifold's direction space (see :func:`surrogate_family`); ``closure``
    and ``directions`` allow mapping a minimizer back to exact manifold
    coordinates.
    """

    n: int
    C0: np.ndarray
    Cj: tuple[np.ndarray, ...]
    closure: ClosureManifold | None = field(default=None, repr=False)
    directions: np.ndarray | None = field(default=None, repr=False)

    @property
    def dof(self) -> int:
        return len(self.Cj)

    def matrix(self, xi: Sequence[float]) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} coordinates, got {xi.shape[0]}")
        out = self.C0.copy()
        for c, M in zip(xi, self.Cj):
            out += c * M
        return out

    def norm(self, xi: Sequence[float]) -> float:
        return skew_norm(self.matrix(xi))

    def manifold_xi(self, xi: Sequence[float]) -> tuple[Fraction, ...]:
        """Exact closure-manifold coordinates for family coordinates ``xi``."""
        if self.closure is None:
            raise ValueError("family was not built from a closure manifold")
        B2 = np.array([float(v) for v in self.closure.lower_vector(self.closure.B0)])
        if self.dof:
            B2 = B2 + self.directions @ np.asarray(xi, dtype=float)
        return self.closure.nearest_xi(B2)


@dataclass(frozen=True)
class OptimizationResult:
    xi: np.ndarray
    norm_value: float
    iterations: int
    converged: bool
    status: str = ""


def skew_norm(C: np.ndarray) -> float:
    """2-norm via the symmetric eigenproblem of the Gram matrix."""
    ev = np.linalg.eigvalsh(C.T @ C)
    return float(np.sqrt(max(ev[-1], 0.0)))


def _embed_corner(n: int, block: np.ndarray) -> np.ndarray:
    """Place an r x r top-left block and its point reflection (negated) in an
    n x n matrix, which is how ``P D`` carries a closure."""
    r = block.shape[0]
    M = np.zeros((n, n))
    M[:r, :r] = block
    M[n - r :, n - r :] = -block[::-1, ::-1]
    return M


def surrogate_family(closure: ClosureManifold, n: int = DEFAULT_N) -> SurrogateFamily:
    """Float surrogate matrices at step one on an ``n``-point grid.

    ``P D`` is formed from exact blocks: inside the closure it is ``B`` itself,
    elsewhere the centered weights and the coupling block.  Subtracting
    ``Q/2`` removes the symmetric part ``-e0 e0^T / 2`` of ``B`` (and its
    mirror), so ``C0`` is built from ``B2`` directly.
    """
    params = closure.params
    if n < min_grid(params):
        raise ValueError(f"n={n} below minimum grid {min_grid(params)}")
    r, s = params.r, params.s
    alpha = [float(a) for a in central_coefficients(s).alpha]

    C0 = np.zeros((n, n))
    for k, a in enumerate(alpha, start=1):
        idx = np.arange(n - k)
        C0[idx, idx + k] = a
        C0[idx + k, idx] = -a
    B2 = closure.B0 + _half_corner(r)
    C0 = C0 + _embed_corner(n, _to_float(B2)) - _embed_corner(
        n, _interior_block(r, alpha)
    )

    pairs = lower_pairs(r)
    if closure.dof_D:
        V = np.column_stack(
            [[float(v) for v in closure.lower_vector(Z)] for Z in closure.basis]
        )
        U, _, _ = np.linalg.svd(V, full_matrices=False)
    else:
        U = np.zeros((len(pairs), 0))
    rows, cols = np.array(pairs, dtype=np.int64).reshape(-1, 2).T
    Cj = []
    for k in range(U.shape[1]):
        Z = np.zeros((r, r))
        Z[rows, cols] = U[:, k]
        Z[cols, rows] = -U[:, k]
        Cj.append(_embed_corner(n, Z))

    for M in (C0, *Cj):
        asym = np.max(np.abs(M + M.T), initial=0.0)
        if asym > SKEW_TOL:
            raise ConsistencyError(f"surrogate not skew-symmetric (defect {asym:.3e})")
    return SurrogateFamily(n, C0, tuple(Cj), closure, U)


def _half_corner(r: int):
    from .ratlinalg import RationalMatrix

    rows = [[Fraction(0)] * r for _ in range(r)]
    rows[0][0] = Fraction(1, 2)
    return RationalMatrix.from_rows(rows, cols=r)


def _interior_block(r: int, alpha: list[float]) -> np.ndarray:
    """The centered-stencil entries that the banded fill put inside the
    closure block; they are replaced by ``B2``."""
    M = np.zeros((r, r))
    for k, a in enumerate(alpha, start=1):
        idx = np.arange(r - k)
        M[idx, idx + k] = a
        M[idx + k, idx] = -a
    return M


def _to_float(M) -> np.ndarray:
    return np.array([float(v) for v in M.entries], dtype=float).reshape(M.rows, M.cols)


def minimize_surrogate_norm(
    family: SurrogateFamily, tol: float = 1e-7, max_iter: int = 10_000
) -> OptimizationResult:
    """Minimize ``||C0 + sum_j xi_j Cj||_2`` over ``xi``.

    Posed as ``sigma_max`` minimization, which cvxpy turns into the SDP
    ``min tau  s.t.  [[tau I, C(xi)], [C(xi)^T, tau I]] >= 0``.
    """
    d = family.dof
    if d == 0:
        return OptimizationResult(np.zeros(0), skew_norm(family.C0), 0, True, "trivial")

    import cvxpy as cp

    xi = cp.Variable(d)
    expr = family.C0 + sum(xi[j] * family.Cj[j] for j in range(d))
    prob = cp.Problem(cp.Minimize(cp.sigma_max(expr)))
    eps = tol * 1e-3
    try:
        prob.solve(
            solver=cp.CLARABEL,
            max_iter=max_iter,
            tol_gap_abs=eps,
            tol_gap_rel=eps,
            tol_feas=eps,
        )
    except cp.error.SolverError as exc:
        log.warning("SDP solver failed: %s", exc)
        return OptimizationResult(np.zeros(d), family.norm(np.zeros(d)), 0, False, "error")
    x = np.asarray(xi.value, dtype=float)
    iters = prob.solver_stats.num_iters or 0
    status = str(prob.status)
    converged = status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    if status != cp.OPTIMAL:
        log.info("SDP solver finished with status %s", status)
    return OptimizationResult(x, family.norm(x), int(iters), converged, status)


@dataclass(frozen=True)
class OptimizedClosure:
    closure: ClosureManifold
    xi: tuple[Fraction, ...]  # exact closure-manifold coordinates
    result: OptimizationResult

    @property
    def xi_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.xi])


def optimize_closure(
    closure: ClosureManifold, n: int = DEFAULT_N, tol: float = 1e-7
) -> OptimizedClosure:
    """Surrogate-optimal member of ``closure``, in exact manifold coordinates."""
    family = surrogate_family(closure, n)
    res = minimize_surrogate_norm(family, tol=tol)
    return OptimizedClosure(closure, family.manifold_xi(res.xi), res)


def spectral_radius(op: AssembledOperator) -> float:
    """Largest eigenvalue magnitude of a float operator's derivative."""
    if op.representation is not Representation.FLOAT:
        raise ValueError("spectral_radius needs a float operator")
    try:
        ev = np.linalg.eigvals(op.D.toarray())
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue computation failed for n={op.n}: {exc}") from exc
    return float(np.max(np.abs(ev)))


def surrogate_matrix(op: AssembledOperator) -> np.ndarray:
    P = np.asarray(op.P, dtype=float)
    S = P[:, None] * op.D.toarray()
    S[0, 0] += 0.5
    S[-1, -1] -= 0.5
    return S


def chain_bound(op: AssembledOperator) -> float:
    """``||P^-1|| (||P D - Q/2|| + 1/2)``, an upper bound on the spectral radius."""
    P = np.asarray(op.P, dtype=float)
    return float(np.max(1.0 / P)) * (skew_norm(surrogate_matrix(op)) + 0.5)
