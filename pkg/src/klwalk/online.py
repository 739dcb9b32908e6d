"""The phased online strategy.

Time is cut into phases of slowly growing length tau_m = ceil(m^(1/3-eps)).
At the start of each phase the eigenproblem is re-solved against the
average of all state costs revealed during completed phases, and the
resulting twisted kernel is frozen for the whole phase. Costs revealed
mid-phase accumulate in a buffer that is merged only when the phase
closes, so the policy never peeks at the current phase.

The environment is oblivious by construction: a cost stream exposes only
``next() -> CostFunction`` and never receives states or actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Protocol

import numpy as np

from .chains import CostFunction, StochasticMatrix, sample_next
from .errors import DimensionMismatchError
from .policy import KlPolicy, optimal_policy
from .spectral import SolverSettings

_CEIL_SNAP = 1e-9  # keep ceil exact when m^(1/3-eps) is an integer up to fp noise


class CostStream(Protocol):
    """One cost function per step, blind to the agent (no state input)."""

    def next(self) -> CostFunction: ...


@dataclass(frozen=True)
class PhaseSchedule:
    """Phase lengths and boundaries for a horizon.

    ``tau[k]`` is the length of phase k+1 (phases are numbered from 1) and
    ``tau_cum`` its prefix sum; generation stops once the horizon is
    covered. ``complete_phases`` is the number M of phases that finish
    within the horizon.
    """

    epsilon: float
    horizon: int
    tau: np.ndarray
    tau_cum: np.ndarray
    complete_phases: int

    def __post_init__(self):
        for name in ("tau", "tau_cum"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def phase_length(self, m: int) -> int:
        """tau_m for any phase index m >= 1 (the formula, not the table)."""
        if m < 1:
            raise ValueError(f"phases are numbered from 1, got {m}")
        if m <= self.tau.shape[0]:
            return int(self.tau[m - 1])
        return _phase_length(m, self.epsilon)


def _phase_length(m: int, epsilon: float) -> int:
    p = m ** (1.0 / 3.0 - epsilon)
    nearest = round(p)
    if abs(p - nearest) < _CEIL_SNAP:
        return max(int(nearest), 1)
    return int(math.ceil(p))


def make_schedule(epsilon: float, horizon: int) -> PhaseSchedule:
    """Generate phases until their total length covers the horizon."""
    if not 0.0 < epsilon < 1.0 / 3.0:
        raise ValueError(f"epsilon must lie in (0, 1/3), got {epsilon}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    lengths = []
    total = 0
    m = 1
    while total < horizon:
        tau_m = _phase_length(m, epsilon)
        lengths.append(tau_m)
        total += tau_m
        m += 1
    tau = np.array(lengths, dtype=np.int64)
    tau_cum = np.cumsum(tau)
    complete = len(lengths) if total == horizon else len(lengths) - 1
    return PhaseSchedule(
        epsilon=epsilon,
        horizon=horizon,
        tau=tau,
        tau_cum=tau_cum,
        complete_phases=complete,
    )


@dataclass(frozen=True)
class StepRecord:
    """Cost realized at the pre-transition state of one step."""

    phase: int
    state: int
    state_cost: float
    control_cost: float

    @property
    def total(self) -> float:
        return self.state_cost + self.control_cost


@dataclass(frozen=True)
class StrategyState:
    """Everything the strategy carries between steps.

    ``cost_sum``/``steps_seen`` cover completed phases only;
    ``phase_cost_sum`` buffers the running phase and is merged when it
    closes. Owned by exactly one episode at a time.
    """

    passive: StochasticMatrix
    schedule: PhaseSchedule
    settings: SolverSettings
    cost_cap: float
    enforce_cost_cap: bool
    current_phase: int
    policy: Optional[KlPolicy]
    cost_sum: np.ndarray
    steps_seen: int
    phase_cost_sum: np.ndarray
    current_state: int
    phase_step: int


def start_strategy(
    passive: StochasticMatrix,
    schedule: PhaseSchedule,
    start: int,
    settings: Optional[SolverSettings] = None,
    cost_cap: float = 1.0,
    enforce_cost_cap: bool = True,
) -> StrategyState:
    """A fresh strategy positioned at ``start`` with phase 1 already begun
    (its policy is the passive kernel, solved from the zero cost)."""
    if not 0 <= start < passive.n:
        raise IndexError(f"start state {start} out of range for n={passive.n}")
    shell = StrategyState(
        passive=passive,
        schedule=schedule,
        settings=settings or SolverSettings(),
        cost_cap=cost_cap,
        enforce_cost_cap=enforce_cost_cap,
        current_phase=0,
        policy=None,
        cost_sum=np.zeros(passive.n),
        steps_seen=0,
        phase_cost_sum=np.zeros(passive.n),
        current_state=start,
        phase_step=0,
    )
    return begin_phase(shell, passive, shell.settings)


def begin_phase(
    state: StrategyState, passive: StochasticMatrix, settings: SolverSettings
) -> StrategyState:
    """Close the current phase and solve for the next policy.

    Merges the phase buffer into the completed-phase totals, averages them
    into the empirical cost (zero before any step) and twists the passive
    kernel by the solved relative value function.
    """
    if state.current_phase > 0:
        expected = state.schedule.phase_length(state.current_phase)
        if state.phase_step != expected:
            raise RuntimeError(
                f"phase {state.current_phase} is not complete "
                f"({state.phase_step}/{expected} steps)"
            )
    cost_sum = state.cost_sum + state.phase_cost_sum
    steps_seen = state.steps_seen + state.phase_step
    if steps_seen > 0:
        f_hat = CostFunction(cost_sum / steps_seen)
    else:
        f_hat = CostFunction(np.zeros(passive.n))
    new_policy = optimal_policy(passive, f_hat, settings)
    return replace(
        state,
        current_phase=state.current_phase + 1,
        policy=new_policy,
        cost_sum=cost_sum,
        steps_seen=steps_seen,
        phase_cost_sum=np.zeros(passive.n),
        phase_step=0,
    )


def step(
    state: StrategyState, f_t: CostFunction, rng: np.random.Generator
) -> tuple[StrategyState, StepRecord]:
    """Charge the revealed cost at the current state, then transition.

    The realized cost pairs f_t with the state occupied when the policy
    was applied; the cost itself only influences policies of later phases.
    Closing step of a phase triggers the next phase's solve.
    """
    if f_t.n != state.passive.n:
        raise DimensionMismatchError(f"cost has {f_t.n} states, chain has {state.passive.n}")
    if state.enforce_cost_cap and f_t.max() > state.cost_cap + 1e-12:
        raise ValueError(
            f"state cost peaks at {f_t.max()}, above the admissible cap "
            f"{state.cost_cap}; construct the strategy with enforce_cost_cap=False to override"
        )
    x = state.current_state
    record = StepRecord(
        phase=state.current_phase,
        state=x,
        state_cost=float(f_t.values[x]),
        control_cost=float(state.policy.control_cost[x]),
    )
    next_state = sample_next(state.policy.kernel, x, rng)
    state = replace(
        state,
        current_state=next_state,
        phase_step=state.phase_step + 1,
        phase_cost_sum=state.phase_cost_sum + f_t.values,
    )
    if state.phase_step == state.schedule.phase_length(state.current_phase):
        state = begin_phase(state, state.passive, state.settings)
    return state, record


@dataclass(frozen=True)
class RunTrace:
    """Per-step record of one episode.

    ``phase_boundaries`` holds the step indices at which the acting policy
    took effect (0 for phase 1, then each in-horizon phase start).
    ``cumulative`` is the prefix sum of state plus control costs.
    """

    states: np.ndarray
    state_costs: np.ndarray
    control_costs: np.ndarray
    cumulative: np.ndarray
    phase_boundaries: np.ndarray

    def __post_init__(self):
        for name in ("states", "phase_boundaries"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("state_costs", "control_costs", "cumulative"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    def phase_of_step(self, t: int) -> int:
        """1-based phase number acting at step index t."""
        return int(np.searchsorted(self.phase_boundaries, t, side="right"))


def run_episode(
    passive: StochasticMatrix,
    env: CostStream,
    horizon: int,
    epsilon: float,
    start: int,
    seed: int,
    settings: Optional[SolverSettings] = None,
    cost_cap: float = 1.0,
    enforce_cost_cap: bool = True,
) -> RunTrace:
    """Run the phased strategy for ``horizon`` steps against a cost stream.

    The stream is consumed strictly in step order and never sees the
    agent; the agent's sampling noise comes from a generator seeded with
    ``seed`` only.
    """
    schedule = make_schedule(epsilon, horizon)
    state = start_strategy(
        passive, schedule, start, settings, cost_cap=cost_cap, enforce_cost_cap=enforce_cost_cap
    )
    rng = np.random.default_rng(seed)
    states = np.empty(horizon, dtype=np.int64)
    state_costs = np.empty(horizon)
    control_costs = np.empty(horizon)
    boundaries = [0]
    previous_phase = state.current_phase
    for t in range(horizon):
        f_t = env.next()
        state, record = step(state, f_t, rng)
        states[t] = record.state
        state_costs[t] = record.state_cost
        control_costs[t] = record.control_cost
        if state.current_phase != previous_phase:
            previous_phase = state.current_phase
            if t + 1 < horizon:
                boundaries.append(t + 1)
    return RunTrace(
        states=states,
        state_costs=state_costs,
        control_costs=control_costs,
        cumulative=np.cumsum(state_costs + control_costs),
        phase_boundaries=np.array(boundaries, dtype=np.int64),
    )
