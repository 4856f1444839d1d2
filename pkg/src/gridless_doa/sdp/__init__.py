"""Small dense SDP solver and Hermitian linear algebra."""

from .ipm import (
    DUAL_INFEASIBLE,
    MAX_ITERATIONS,
    NUMERICAL_FAILURE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    Block,
    SdpProblem,
    SdpSolution,
    solve_sdp,
)
from .linalg import (
    RankDeficiencyError,
    condition_number,
    eig,
    hermitian_solve,
    hermitian_to_real,
    is_hermitian,
    matrix_sqrt,
    min_eigenvalue,
    real_to_hermitian,
)
from .lmi import LmiBuilder, hermitian_basis, hermitian_from_coords

__all__ = [
    "Block",
    "SdpProblem",
    "SdpSolution",
    "solve_sdp",
    "OPTIMAL",
    "MAX_ITERATIONS",
    "NUMERICAL_FAILURE",
    "PRIMAL_INFEASIBLE",
    "DUAL_INFEASIBLE",
    "LmiBuilder",
    "hermitian_basis",
    "hermitian_from_coords",
    "RankDeficiencyError",
    "condition_number",
    "eig",
    "hermitian_solve",
    "hermitian_to_real",
    "is_hermitian",
    "matrix_sqrt",
    "min_eigenvalue",
    "real_to_hermitian",
]
