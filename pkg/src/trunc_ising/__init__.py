"""Inverse temperature estimation for Ising models truncated to the
satisfying assignments of a bounded-degree CNF formula.

The estimator maximizes the single-sample pseudolikelihood over the flippable
coordinates by projected gradient descent; samplers, combinatorial
subroutines, and empirical checkers for the supporting guarantees live in the
submodules re-exported here.
"""

from .backend import BACKEND, USE_NUMBA
from .cnf import (
    CnfFormula,
    Literal,
    as_spin_vector,
    empty_formula,
    flippable_mask,
    flippable_matrix,
    flippable_set,
    formula_stats,
    is_flippable,
    load_cnf,
    parse_dimacs,
    restrict,
    satisfies,
    satisfies_batch,
    save_cnf,
    serialize_dimacs,
)
from .diagnostics import (
    LemmaCheckResult,
    RegimeReport,
    check_conditional_magnetization,
    check_curvature_floor,
    check_flippable_fraction,
    check_gradient_concentration,
    check_regime,
    check_shielding_probability,
    check_symmetric_lll,
    results_to_csv,
)
from .errors import (
    DegenerateObjectiveError,
    DimacsError,
    EmptySupportError,
    GraphFileError,
    InfeasibleInstanceError,
    SampleFileError,
    SampleNotInSupportError,
    TruncIsingError,
)
from .graph import (
    CoveringSetResult,
    InteractionGraph,
    clause_coverage,
    generate_regular_signed_graph,
    greedy_2hop_disjoint,
    inclusion_probability_estimate,
    load_graph,
    magnetization,
    all_magnetizations,
    parse_graph,
    partner_assignment,
    rank_local_maxima,
    save_graph,
    search_covering_independent_set,
    serialize_graph,
)
from .harness import (
    RunConfig,
    SweepResult,
    TrialRecord,
    consistency_sweep,
    generate_regime_formula,
    run_trials,
    sweep_to_csv,
    trials_to_csv,
    write_outputs,
)
from .model import (
    ExactDistribution,
    TruncatedIsingModel,
    conditional_flip_probability,
    default_burn_in,
    energy,
    enumerate_exact,
    fatness_estimate,
    find_satisfying_config,
    flip_graph_components,
    glauber_occupation_codes,
    glauber_step,
    load_samples,
    parse_samples,
    run_glauber,
    sample_exact,
    save_samples,
    serialize_samples,
)
from .mple import (
    ErrorBound,
    EstimateReport,
    PseudolikelihoodContext,
    curvature,
    error_decomposition,
    estimate_mple,
    gradient,
    min_curvature,
    mle_oracle,
    objective,
)

__version__ = "0.1.0"
