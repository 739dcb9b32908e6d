"""Regret computation, baselines and Monte-Carlo replication.

Two comparators are supported: the best stationary policy in hindsight
(solved against the average of all revealed costs, charged at its steady
state) and the best of a pool of randomly sampled stationary policies
(charged at its realized cost on the shared cost sequence). Replications
are embarrassingly parallel; each run owns its seeds, and summaries are
reduced in run order so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _accel
from .chains import CostFunction, StochasticMatrix, invariant_distribution
from .errors import DimensionMismatchError, NotUnichainError
from .online import RunTrace, run_episode
from .policy import KlPolicy, optimal_policy, rows_kl
from .spectral import SolverSettings
from .world import Graph, build_passive, make_tracking_env

BEST_IN_HINDSIGHT = "best-in-hindsight"
FIXED_POLICY = "fixed-policy"
SAMPLED_POOL_BEST = "sampled-pool-best"
_COMPARATOR_KINDS = (BEST_IN_HINDSIGHT, FIXED_POLICY, SAMPLED_POOL_BEST)

_MASK64 = (1 << 64) - 1
_SPLIT_GAMMA = 0x9E3779B97F4A7C15  # splitmix64 increment
_POOL_STREAM = 0x706F6F6C
_POOL_SIM_STREAM = 0x73696D


def split_seed(base_seed: int, index: int) -> int:
    """Derive the index-th child seed from a base seed (splitmix64 mix).

    Children are statistically independent yet fully reproducible, so
    replications can run in any order or in parallel.
    """
    z = (base_seed + (index + 1) * _SPLIT_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RegretTrace:
    """Prefix regret of a run against one comparator."""

    horizon: int
    per_step: np.ndarray
    comparator_kind: str
    comparator_cost: np.ndarray

    def __post_init__(self):
        if self.comparator_kind not in _COMPARATOR_KINDS:
            raise ValueError(f"unknown comparator kind {self.comparator_kind!r}")
        for name in ("per_step", "comparator_cost"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.per_step.shape != (self.horizon,) or self.comparator_cost.shape != (self.horizon,):
            raise DimensionMismatchError("regret traces must match the horizon")


@dataclass(frozen=True)
class MonteCarloSummary:
    """Per-step mean and sample standard deviation over replications."""

    runs: int
    mean: np.ndarray
    stddev: np.ndarray
    seeds: tuple[int, ...]

    def __post_init__(self):
        for name in ("mean", "stddev"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


def _cost_matrix(costs: Sequence[CostFunction]) -> np.ndarray:
    if not costs:
        raise ValueError("empty cost sequence")
    return np.stack([c.values for c in costs])


def steady_state_comparator_cost(
    policy: KlPolicy, costs: Sequence[CostFunction]
) -> np.ndarray:
    """Prefix sums of the policy's steady-state cost under each revealed f_t."""
    fmat = _cost_matrix(costs)
    if fmat.shape[1] != policy.n:
        raise DimensionMismatchError("costs and policy live on different state spaces")
    pi = invariant_distribution(policy.kernel).weights
    support = pi > 0
    control = float(pi[support] @ policy.control_cost[support])
    per_step = fmat[:, support] @ pi[support] + control
    return np.cumsum(per_step)


def realized_expected_comparator_cost(
    policy: KlPolicy, costs: Sequence[CostFunction], start: int
) -> np.ndarray:
    """Prefix sums of the policy's expected cost with the state law
    propagated exactly from a point mass at ``start``."""
    fmat = _cost_matrix(costs)
    n = policy.n
    if fmat.shape[1] != n:
        raise DimensionMismatchError("costs and policy live on different state spaces")
    if not 0 <= start < n:
        raise IndexError(f"start state {start} out of range for n={n}")
    nu = np.zeros(n)
    nu[start] = 1.0
    out = np.empty(fmat.shape[0])
    for t in range(fmat.shape[0]):
        out[t] = nu @ (fmat[t] + policy.control_cost)
        nu = nu @ policy.kernel.rows
    return np.cumsum(out)


def best_in_hindsight(
    passive: StochasticMatrix,
    costs: Sequence[CostFunction],
    settings: Optional[SolverSettings] = None,
) -> KlPolicy:
    """The twisted-kernel policy solved against the average revealed cost;
    the steady-state optimum over all stationary unichain policies."""
    fmat = _cost_matrix(costs)
    return optimal_policy(passive, CostFunction(fmat.mean(axis=0)), settings)


def sample_policy_pool(
    passive: StochasticMatrix, pool_size: int, seed: int
) -> list[KlPolicy]:
    """Random stationary policies supported inside the passive support.

    Rows are flat Dirichlet draws over the support of the matching passive
    row, so the control cost is finite by construction; draws without a
    unique invariant distribution are rejected and resampled.
    """
    if pool_size < 1:
        raise ValueError(f"pool_size must be >= 1, got {pool_size}")
    rng = np.random.default_rng([seed, _POOL_STREAM])
    n = passive.n
    supports = [np.nonzero(passive.rows[x])[0] for x in range(n)]
    pool: list[KlPolicy] = []
    while len(pool) < pool_size:
        rows = np.zeros((n, n))
        for x in range(n):
            sup = supports[x]
            rows[x, sup] = rng.dirichlet(np.ones(sup.shape[0]))
        kernel = StochasticMatrix(rows)
        try:
            invariant_distribution(kernel)
        except NotUnichainError:
            continue
        pool.append(
            KlPolicy(kernel=kernel, control_cost=rows_kl(rows, passive.rows))
        )
    return pool


def pool_best_realized_cost(
    pool: Sequence[KlPolicy],
    passive: StochasticMatrix,
    costs: Sequence[CostFunction],
    start: int,
    seed: int,
) -> tuple[KlPolicy, np.ndarray]:
    """Simulate every pooled policy on the same cost sequence and return
    the cheapest one with its prefix cost trace.

    Each policy gets its own derived seed, so adding policies never
    perturbs the trajectories of the others; ties go to the lowest pool
    index.
    """
    if not pool:
        raise ValueError("empty policy pool")
    fmat = _cost_matrix(costs)
    horizon = fmat.shape[0]
    steps = np.arange(horizon)
    best_policy = None
    best_per_step = None
    best_total = math.inf
    for i, candidate in enumerate(pool):
        rng = np.random.default_rng(split_seed(seed, i))
        cdf = np.cumsum(candidate.kernel.rows, axis=1)
        states = _accel.markov_path(cdf, start, rng.random(horizon - 1))
        per_step = fmat[steps, states] + candidate.control_cost[states]
        total = float(per_step.sum())
        if total < best_total:
            best_total = total
            best_policy = candidate
            best_per_step = per_step
    return best_policy, np.cumsum(best_per_step)


def regret_trace(run: RunTrace, comparator_cost, kind: str) -> RegretTrace:
    """Prefix regret: the run's cumulative cost minus the comparator's."""
    comparator_cost = np.asarray(comparator_cost, dtype=np.float64)
    if comparator_cost.shape != run.cumulative.shape:
        raise DimensionMismatchError(
            f"comparator has {comparator_cost.shape[0]} steps, run has {run.horizon}"
        )
    return RegretTrace(
        horizon=run.horizon,
        per_step=run.cumulative - comparator_cost,
        comparator_kind=kind,
        comparator_cost=comparator_cost,
    )


def growth_exponent(trace, burn_in: Optional[int] = None) -> float:
    """Least-squares slope of log R_t against log t past the burn-in.

    ``burn_in`` defaults to 10% of the horizon (dropping the transient
    phases). Returns nan (the flag value) when the tail is not strictly
    positive; the all-equal tail is rejected as degenerate.
    """
    values = np.asarray(trace, dtype=np.float64)
    horizon = values.shape[0]
    if burn_in is None:
        burn_in = horizon // 10
    if burn_in < 0 or horizon - burn_in < 2:
        raise ValueError(f"need at least two points past burn_in={burn_in}, got {horizon}")
    tail = values[burn_in:]
    if np.all(tail == tail[0]):
        raise ValueError("degenerate (all-equal) trace")
    if np.any(tail <= 0):
        return math.nan
    t = np.arange(burn_in + 1, horizon + 1, dtype=np.float64)
    slope, _ = np.polyfit(np.log(t), np.log(tail), 1)
    return float(slope)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one tracking replication needs, minus its seed."""

    graph: Graph
    horizon: int = 1000
    epsilon: float = 0.05
    stay_prob: float = 0.01
    delta: float = 0.01
    home: int = 0
    start: int = 0
    dirichlet_alpha: float = 1.0
    cost_cap: float = 1.0
    solver: SolverSettings = field(default_factory=SolverSettings)

    def passive(self) -> StochasticMatrix:
        return build_passive(self.graph, self.stay_prob, self.delta, self.home)


def run_tracking_once(spec: ExperimentSpec, run_seed: int) -> tuple[RunTrace, tuple]:
    """One full episode against a freshly sampled target; returns the
    trace and the cost sequence it consumed."""
    passive = spec.passive()
    env = make_tracking_env(spec.graph, seed=run_seed, dirichlet_alpha=spec.dirichlet_alpha)
    stream = env.stream(spec.horizon)
    costs = stream.costs
    trace = run_episode(
        passive,
        stream,
        horizon=spec.horizon,
        epsilon=spec.epsilon,
        start=spec.start,
        seed=run_seed,
        settings=spec.solver,
        cost_cap=spec.cost_cap,
    )
    return trace, costs


def _tracking_worker(args: tuple) -> tuple:
    spec, run_seed = args
    trace, costs = run_tracking_once(spec, run_seed)
    passive = spec.passive()
    comparator = best_in_hindsight(passive, costs, spec.solver)
    hindsight = trace.cumulative - steady_state_comparator_cost(comparator, costs)
    return trace, costs, hindsight


@dataclass(frozen=True)
class ExperimentResult:
    """All traces and regret curves of one replicated experiment."""

    spec: ExperimentSpec
    seeds: tuple[int, ...]
    traces: tuple[RunTrace, ...]
    hindsight_regret: np.ndarray  # (runs, horizon)
    pool_regret: Optional[np.ndarray] = None  # (runs, horizon) when a pool was evaluated

    @property
    def runs(self) -> int:
        return len(self.seeds)


def run_experiment(
    spec: ExperimentSpec,
    runs: int,
    base_seed: int,
    pool_size: int = 0,
    workers: int = 1,
    seeds: Optional[Sequence[int]] = None,
) -> ExperimentResult:
    """Replicate the tracking experiment ``runs`` times.

    Run i draws its environment and agent streams from
    ``split_seed(base_seed, i)``. With ``pool_size > 0`` a single policy
    pool (seeded from the base seed, shared by all runs) is additionally
    raced against each run's cost sequence. ``workers`` bounds the number
    of parallel replication processes; the reduction is in run order
    either way, so output does not depend on the worker count.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    if seeds is None:
        seeds = [split_seed(base_seed, i) for i in range(runs)]
    elif len(seeds) != runs:
        raise ValueError(f"got {len(seeds)} explicit seeds for {runs} runs")
    jobs = [(spec, int(s)) for s in seeds]
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=min(workers, runs)) as pool_exec:
            outcomes = list(pool_exec.map(_tracking_worker, jobs))
    else:
        outcomes = [_tracking_worker(job) for job in jobs]
    traces = tuple(out[0] for out in outcomes)
    hindsight = np.stack([out[2] for out in outcomes])

    pool_regret = None
    if pool_size > 0:
        passive = spec.passive()
        shared_pool = sample_policy_pool(passive, pool_size, split_seed(base_seed, _POOL_STREAM))
        rows = []
        for (_, costs, _), run_seed, trace in zip(outcomes, seeds, traces):
            _, comparator_cost = pool_best_realized_cost(
                shared_pool, passive, costs, spec.start, split_seed(run_seed, _POOL_SIM_STREAM)
            )
            rows.append(trace.cumulative - comparator_cost)
        pool_regret = np.stack(rows)

    return ExperimentResult(
        spec=spec,
        seeds=tuple(int(s) for s in seeds),
        traces=traces,
        hindsight_regret=hindsight,
        pool_regret=pool_regret,
    )


def summarize(regret_rows: np.ndarray, seeds: Sequence[int]) -> MonteCarloSummary:
    """Mean and sample standard deviation (n-1 divisor) across runs."""
    rows = np.asarray(regret_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError("summaries need at least two replications")
    return MonteCarloSummary(
        runs=rows.shape[0],
        mean=rows.mean(axis=0),
        stddev=rows.std(axis=0, ddof=1),
        seeds=tuple(seeds),
    )


def monte_carlo(
    spec: ExperimentSpec,
    runs: int,
    base_seed: int,
    workers: int = 1,
    seeds: Optional[Sequence[int]] = None,
) -> MonteCarloSummary:
    """Mean/stddev of the best-in-hindsight regret over replications."""
    if runs < 2:
        raise ValueError(f"monte_carlo needs runs >= 2, got {runs}")
    result = run_experiment(spec, runs, base_seed, pool_size=0, workers=workers, seeds=seeds)
    return summarize(result.hindsight_regret, result.seeds)
