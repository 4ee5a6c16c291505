"""Equilibria of security games with non-additive utilities and multiple attacker resources."""
from .compact import (
    SupportSet,
    attacker_vertex,
    build_weights,
    compact_payoff,
    coverage_marginals,
    defender_vertex,
    direct_payoff,
    marginals_to_distribution,
    project_attacker,
    project_defender,
    support_set,
    vertex_to_strategy,
)
from .lpengine import (
    IterationLimitError,
    LPStatus,
    SolverConfig,
    SolverError,
    convex_decompose,
    lp_solve_dense,
    membership,
    separation_compact_lp,
    solve_compact_lp,
    u0_bound,
)
from .model import (
    AdditiveSetFunction,
    AttackerSpace,
    GameInstance,
    ModelError,
    SetFunction,
    UtilityProfile,
    common_utilities,
    is_additive,
    mobius_transform,
    network_value_benefits,
    zero_sum_complete,
    zeta_transform,
)
from .oracles import (
    Bipartite,
    Budget,
    Explicit,
    OracleError,
    Separable,
    UniformMatroid,
    dop_linear,
    enumerate_system,
    oracle_solve,
    to_pseudo_boolean,
)
from .solvers import (
    EquilibriumResult,
    SaddleTransform,
    apply_h,
    attacker_best_response,
    solve_ne_additive,
    solve_sse,
    solve_zero_sum,
)
from .verify import brute_minimax, brute_sse, check_ne, check_sse, expand_normal_form

__version__ = "0.1.0"
