"""Controlled random walks with KL control cost.

A library and CLI for Markov decision processes whose action is the next
state distribution itself, priced by state cost plus KL divergence from a
fixed passive kernel: the certified eigenproblem solver for the optimal
stationary policy, the phased online strategy with sublinear regret, and
a reproducible graph target-tracking experiment harness.
"""

from ._accel import NUMBA_ENABLED
from .chains import (
    CostFunction,
    Distribution,
    ErgodicityReport,
    StateSpace,
    StochasticMatrix,
    dobrushin_coefficient,
    ergodicity_report,
    invariant_distribution,
    kl_divergence,
    sample_next,
    span_seminorm,
    total_variation,
)
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    GraphError,
    NotErgodicError,
    NotUnichainError,
    ParseError,
)
from .evaluate import (
    BEST_IN_HINDSIGHT,
    FIXED_POLICY,
    SAMPLED_POOL_BEST,
    ExperimentResult,
    ExperimentSpec,
    MonteCarloSummary,
    RegretTrace,
    best_in_hindsight,
    growth_exponent,
    monte_carlo,
    pool_best_realized_cost,
    realized_expected_comparator_cost,
    regret_trace,
    run_experiment,
    run_tracking_once,
    sample_policy_pool,
    split_seed,
    steady_state_comparator_cost,
    summarize,
)
from .online import (
    CostStream,
    PhaseSchedule,
    RunTrace,
    StepRecord,
    StrategyState,
    begin_phase,
    make_schedule,
    run_episode,
    start_strategy,
    step,
)
from .policy import (
    BoundConstants,
    KlPolicy,
    bound_constants,
    kernel_sup_distance,
    optimal_policy,
    passive_policy,
    policy_from_rows,
    rows_kl,
    state_action_cost,
    steady_state_cost,
    twisted_kernel,
    twisted_pair_kl,
)
from .spectral import (
    MpeSolution,
    SolverSettings,
    acoe_residual,
    eigen_oracle,
    solve_mpe,
)
from .world import (
    Graph,
    ReplayCostStream,
    TrackingEnv,
    bfs_distances,
    build_passive,
    grid_graph,
    load_graph,
    make_tracking_env,
    tracking_cost,
)

__version__ = "0.1.0"
