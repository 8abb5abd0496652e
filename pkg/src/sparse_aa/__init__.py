"""Sparse archetypal analysis toolkit.

Distance primitives over convex hulls, a block proximal-gradient solver
for sparse nonnegative factorization with archetypal regularization, a
cut-based mixed-integer initializer, support-swap local search, and an
evaluation suite for the associated robustness bounds.
"""

from .core import (
    Factorization,
    InvalidInputError,
    NumericalError,
    SaaConfig,
    nnz,
    read_matrix_csv,
    spectral_norm,
    support,
    write_matrix_csv,
)
from .evaluation import (
    ClusterMetrics,
    RobustnessReport,
    appendixB_fixture,
    cluster_assign,
    cluster_metrics,
    example1_fixture,
    penalized_constants,
    robustness_report,
    synth_instance,
    robustness_constants,
)
from .geometry import (
    HullDistanceResult,
    archetype_distance,
    archetype_distance_l1,
    archetype_spread,
    hull_distance,
    hull_distance_rows,
    nearest_row_assignment,
    set_hull_distance,
    set_hull_distance_l1,
)
from .local_search import (
    SwapProposal,
    local_search,
    optimal_t,
    select_entering,
    select_leaving,
    swap_refit,
)
from .mip_init import (
    BranchAndBound,
    Cut,
    CutSet,
    MilpBackend,
    MilpSolution,
    OaResult,
    continuation,
    eval_F,
    milp_min_cuts,
    norm_bound_b,
    outer_approximation,
    subgradient_F,
)
from .projections import (
    SparsityPattern,
    clamp_nonneg,
    project_simplex_rows,
    project_simplex_vector,
    project_sparse,
)
from .solver import (
    ObjectiveBreakdown,
    SolveTrace,
    StationarityReport,
    default_init,
    lipschitz_constants,
    objective,
    solve,
    stationarity_residual,
    step_H,
    step_W,
    step_Wt,
)

__version__ = "0.1.0"

__all__ = [
    "BranchAndBound",
    "ClusterMetrics",
    "Cut",
    "CutSet",
    "Factorization",
    "HullDistanceResult",
    "InvalidInputError",
    "MilpBackend",
    "MilpSolution",
    "NumericalError",
    "OaResult",
    "ObjectiveBreakdown",
    "RobustnessReport",
    "SaaConfig",
    "SolveTrace",
    "SparsityPattern",
    "StationarityReport",
    "SwapProposal",
    "appendixB_fixture",
    "archetype_distance",
    "archetype_distance_l1",
    "archetype_spread",
    "clamp_nonneg",
    "cluster_assign",
    "cluster_metrics",
    "continuation",
    "default_init",
    "eval_F",
    "example1_fixture",
    "hull_distance",
    "hull_distance_rows",
    "lipschitz_constants",
    "local_search",
    "milp_min_cuts",
    "nearest_row_assignment",
    "nnz",
    "norm_bound_b",
    "objective",
    "optimal_t",
    "outer_approximation",
    "project_simplex_rows",
    "project_simplex_vector",
    "project_sparse",
    "penalized_constants",
    "read_matrix_csv",
    "robustness_report",
    "select_entering",
    "select_leaving",
    "set_hull_distance",
    "set_hull_distance_l1",
    "solve",
    "spectral_norm",
    "stationarity_residual",
    "step_H",
    "step_W",
    "step_Wt",
    "subgradient_F",
    "support",
    "swap_refit",
    "synth_instance",
    "robustness_constants",
    "write_matrix_csv",
]
