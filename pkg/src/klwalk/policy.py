"""Twisted-kernel policies and their cost structure.

A policy here is a full transition kernel; its per-state control cost is
the KL divergence of each row against the passive row. The optimal policy
for a state cost f is the passive kernel reweighted by e^{-h_f} and
renormalized (the "twisted" kernel), which this module builds in log
space so that the passive support is preserved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel
from .chains import (
    CostFunction,
    StochasticMatrix,
    ergodicity_report,
    invariant_distribution,
    span_seminorm,
)
from .errors import DimensionMismatchError, NotErgodicError
from .spectral import SolverSettings, solve_mpe


@dataclass(frozen=True)
class KlPolicy:
    """A stationary policy with its per-state deviation price.

    ``control_cost[x]`` is D(kernel(x,.) || passive(x,.)); ``source_h`` is
    the twisting function when the policy came out of a solve.
    """

    kernel: StochasticMatrix
    control_cost: np.ndarray
    source_h: Optional[np.ndarray] = None

    def __post_init__(self):
        cc = np.asarray(self.control_cost, dtype=np.float64)
        cc.setflags(write=False)
        object.__setattr__(self, "control_cost", cc)
        if cc.shape != (self.kernel.n,):
            raise DimensionMismatchError(
                f"control_cost has shape {cc.shape}, kernel has n={self.kernel.n}"
            )
        if np.any(cc < 0):
            raise ValueError("control costs must be nonnegative")
        if self.source_h is not None:
            h = np.asarray(self.source_h, dtype=np.float64)
            h.setflags(write=False)
            object.__setattr__(self, "source_h", h)

    @property
    def n(self) -> int:
        return self.kernel.n


@dataclass(frozen=True)
class BoundConstants:
    """Explicit constants entering the cost and value bounds.

    ``k0 = cost_cap + log(1/p_star)`` caps every realized state-action
    cost of a policy supported inside the passive support; ``k1`` bounds
    the span of any relative value function for costs below the cap.
    """

    k0: float
    k1: float
    alpha_passive: float
    p_star: float
    theta: float
    nbar: int


def rows_kl(a_rows: np.ndarray, b_rows: np.ndarray) -> np.ndarray:
    """Row-wise KL divergence between two kernels; +inf where the support
    of an a-row escapes the matching b-row."""
    a = np.asarray(a_rows, dtype=np.float64)
    b = np.asarray(b_rows, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a > 0, a / np.where(b > 0, b, 1.0), 1.0)
        terms = np.where(a > 0, a * np.log(ratio), 0.0)
        terms = np.where((a > 0) & (b == 0), math.inf, terms)
    return terms.sum(axis=1)


def twisted_kernel(passive: StochasticMatrix, phi) -> KlPolicy:
    """Reweight each passive row by e^{-phi} and renormalize.

    Computed in log space; a constant phi is short-circuited to the
    passive kernel itself (the normalization provably cancels constants,
    and the shortcut keeps that identity exact). The support of every
    output row equals the support of the matching passive row, so the
    control cost is always finite; it is evaluated through the closed form
    -E_row[phi] - log(P e^{-phi}) rather than generic summation.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (passive.n,):
        raise DimensionMismatchError(f"phi has shape {phi.shape}, expected ({passive.n},)")
    if not np.all(np.isfinite(phi)):
        raise ValueError("twisting function must be finite")
    if span_seminorm(phi) == 0.0:
        return KlPolicy(
            kernel=passive,
            control_cost=np.zeros(passive.n),
            source_h=phi,
        )
    log_passive = _accel.log_rows(passive.rows)
    log_z = _accel.log_matvec(log_passive, -phi)
    rows = np.exp(log_passive - phi[np.newaxis, :] - log_z[:, np.newaxis])
    control = np.maximum(-(rows @ phi) - log_z, 0.0)
    return KlPolicy(kernel=StochasticMatrix(rows), control_cost=control, source_h=phi)


def twisted_pair_kl(passive: StochasticMatrix, phi_a, phi_b) -> np.ndarray:
    """Per-state KL divergence between the two twisted kernels of passive.

    Uses the closed form E_a[phi_b - phi_a] + log(Z_b/Z_a), which stays
    well conditioned for large twisting functions; generic row-by-row
    summation over the kernels agrees and serves as a cross-check in
    tests.
    """
    pa = twisted_kernel(passive, phi_a)
    phi_a = np.asarray(phi_a, dtype=np.float64)
    phi_b = np.asarray(phi_b, dtype=np.float64)
    if phi_b.shape != (passive.n,):
        raise DimensionMismatchError(f"phi_b has shape {phi_b.shape}, expected ({passive.n},)")
    log_passive = _accel.log_rows(passive.rows)
    log_za = _accel.log_matvec(log_passive, -phi_a)
    log_zb = _accel.log_matvec(log_passive, -phi_b)
    diff = pa.kernel.rows @ (phi_b - phi_a)
    return np.maximum(diff + log_zb - log_za, 0.0)


def state_action_cost(f: CostFunction, policy: KlPolicy, x: int) -> float:
    """f(x) plus the policy's control cost at x; +inf saturates."""
    if not 0 <= x < policy.n:
        raise IndexError(f"state index {x} out of range for n={policy.n}")
    if f.n != policy.n:
        raise DimensionMismatchError(f"cost has {f.n} states, policy has {policy.n}")
    return float(f.values[x] + policy.control_cost[x])


def steady_state_cost(f: CostFunction, policy: KlPolicy) -> float:
    """Expected state-action cost under the policy's invariant distribution."""
    if f.n != policy.n:
        raise DimensionMismatchError(f"cost has {f.n} states, policy has {policy.n}")
    pi = invariant_distribution(policy.kernel).weights
    support = pi > 0
    per_state = f.values[support] + policy.control_cost[support]
    if not np.all(np.isfinite(per_state)):
        return math.inf
    return float(pi[support] @ per_state)


def optimal_policy(
    passive: StochasticMatrix, f: CostFunction, settings: Optional[SolverSettings] = None
) -> KlPolicy:
    """Solve the eigenproblem for f and twist the passive kernel by its
    relative value function.

    A constant cost provably yields h = 0 (only the average cost shifts),
    so the twist is applied with an exact zero vector in that case; the
    solve still runs so its certificate is exercised uniformly.
    """
    sol = solve_mpe(passive, f, settings)
    if span_seminorm(f.values) == 0.0:
        return twisted_kernel(passive, np.zeros(passive.n))
    return twisted_kernel(passive, sol.h)


def bound_constants(passive: StochasticMatrix, cost_cap: float = 1.0) -> BoundConstants:
    """Constants for the uniform cost/value bounds under the passive kernel.

    ``p_star`` is the smallest nonzero transition probability (zeros are
    excluded: transitions forbidden by the passive dynamics never carry
    mass under any finite-cost policy).
    """
    if cost_cap < 0:
        raise ValueError(f"cost_cap must be nonnegative, got {cost_cap}")
    report = ergodicity_report(passive)
    if not report.ergodic:
        raise NotErgodicError(
            "bound constants need an irreducible aperiodic passive kernel "
            f"(irreducible={report.irreducible}, aperiodic={report.aperiodic})"
        )
    alpha = report.dobrushin
    if not alpha < 1.0:
        raise NotErgodicError(f"Dobrushin coefficient must be < 1, got {alpha}")
    rows = passive.rows
    p_star = min(float(row[row > 0].min()) for row in rows)
    return BoundConstants(
        k0=cost_cap + math.log(1.0 / p_star),
        k1=math.log(1.0 / report.theta) + report.nbar * cost_cap,
        alpha_passive=alpha,
        p_star=p_star,
        theta=report.theta,
        nbar=report.nbar,
    )


def kernel_sup_distance(a: StochasticMatrix, b: StochasticMatrix) -> float:
    """Largest L1 distance between matching rows; in [0, 2]."""
    if a.n != b.n:
        raise DimensionMismatchError(f"kernels have {a.n} and {b.n} states")
    return float(np.abs(a.rows - b.rows).sum(axis=1).max())


def policy_from_rows(passive: StochasticMatrix, rows) -> KlPolicy:
    """Wrap explicit transition rows as a policy, pricing them against the
    passive kernel."""
    kernel = StochasticMatrix(rows)
    if kernel.n != passive.n:
        raise DimensionMismatchError(f"kernel has {kernel.n} states, passive has {passive.n}")
    return KlPolicy(kernel=kernel, control_cost=rows_kl(kernel.rows, passive.rows))


def passive_policy(passive: StochasticMatrix) -> KlPolicy:
    """The passive dynamics viewed as a (zero control cost) policy."""
    return KlPolicy(kernel=passive, control_cost=np.zeros(passive.n))
