"""Grid solver and diagnostics for ``u_t = Lap(phi(u))`` with non-monotone ``phi``."""

from __future__ import annotations

from .dynamics import (
    BlowUpError,
    InvariantSetSpec,
    SolverConfig,
    Trajectory,
    check_invariant_set,
    integrate,
    rhs,
    step,
)
from .grid import (
    GridDomain,
    GridFunction,
    backward_diff,
    forward_diff,
    grid_integral,
    inner_product,
    laplacian_matrix,
    laplacian_neumann,
    lp_norm,
)
from .nonlinearity import (
    BranchId,
    Nonlinearity,
    branch_inverse,
    cubic,
    from_table,
    get_nonlinearity,
    perona_malik,
    potential,
    validate_hypotheses,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "BranchId",
    "GridDomain",
    "GridFunction",
    "InvariantSetSpec",
    "Nonlinearity",
    "SolverConfig",
    "Trajectory",
    "backward_diff",
    "branch_inverse",
    "check_invariant_set",
    "cubic",
    "forward_diff",
    "from_table",
    "get_nonlinearity",
    "grid_integral",
    "inner_product",
    "integrate",
    "laplacian_matrix",
    "laplacian_neumann",
    "lp_norm",
    "perona_malik",
    "potential",
    "rhs",
    "step",
    "validate_hypotheses",
]
