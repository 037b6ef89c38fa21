"""Exact existence decisions, construction and optimization of diagonal-norm
summation-by-parts first-derivative operators."""

from .construct import (
    AssembledOperator,
    ClosureManifold,
    Representation,
    UnsupportedGrid,
    VerificationReport,
    assemble,
    closure_for,
    solve_closure,
    verify,
)
from .existence import (
    ExistenceReport,
    NormCandidate,
    SbpParameters,
    exists_sbp,
    max_boundary_order,
    min_closure_search,
)
from .stencil import UnsupportedParameters, central_coefficients

__all__ = [
    "AssembledOperator",
    "ClosureManifold",
    "ExistenceReport",
    "NormCandidate",
    "Representation",
    "SbpParameters",
    "UnsupportedGrid",
    "UnsupportedParameters",
    "VerificationReport",
    "assemble",
    "central_coefficients",
    "closure_for",
    "exists_sbp",
    "max_boundary_order",
    "min_closure_search",
    "solve_closure",
    "verify",
]
