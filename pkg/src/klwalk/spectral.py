"""Certified solver for the multiplicative Poisson equation.

For a passive kernel P and state cost f, the optimal average cost and
relative value function come out of the dominant eigenpair of the
nonnegative irreducible matrix A = e^{-f} P:

    e^{-f} P V = e^{-lambda} V,      h = -log V,  h(pin) = 0.

``solve_mpe`` runs a power iteration in log space with per-iteration
normalization V(pin) = 1 and stops once the running Collatz bracket
[min_x (AV)(x)/V(x), max_x (AV)(x)/V(x)] on the eigenvalue is narrower
than the requested tolerance; the bracket is part of the returned
solution and is a machine-checkable optimality certificate.
``eigen_oracle`` recomputes the same eigenpair by repeated squaring and
exists purely to cross-examine the solver in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel
from .chains import CostFunction, StochasticMatrix, ergodicity_report
from .errors import ConvergenceError, DimensionMismatchError, NotErgodicError

ORACLE_MAX_STATES = 12


@dataclass(frozen=True)
class SolverSettings:
    """Knobs for the power iteration.

    ``tolerance`` is the certified width of the eigenvalue bracket on
    e^{-lambda}; ``pin_index`` is the state where the relative value
    function is pinned to zero.
    """

    tolerance: float = 1e-12
    max_iterations: int = 100_000
    pin_index: int = 0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.pin_index < 0:
            raise ValueError(f"pin_index must be a valid state, got {self.pin_index}")


@dataclass(frozen=True)
class MpeSolution:
    """Eigenpair of e^{-f} P plus its certificate.

    ``lam`` is the optimal average cost, ``h`` the relative value function
    with h(pin) = 0, ``v = e^{-h}`` the positive eigenvector with
    v(pin) = 1, and ``bracket`` the certified enclosure of e^{-lam}.
    """

    lam: float
    h: np.ndarray
    v: np.ndarray
    bracket: tuple[float, float]
    iterations: int

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        h.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)
        if not np.all(v > 0):
            raise ValueError("eigenvector must be entrywise positive")
        lo, hi = self.bracket
        if not (lo <= hi and lo > 0):
            raise ValueError(f"invalid eigenvalue bracket {self.bracket}")

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]


def _validate_inputs(passive: StochasticMatrix, f: CostFunction, settings: SolverSettings):
    if f.n != passive.n:
        raise DimensionMismatchError(f"cost has {f.n} states, kernel has {passive.n}")
    if settings.pin_index >= passive.n:
        raise ValueError(f"pin_index {settings.pin_index} out of range for n={passive.n}")
    report = ergodicity_report(passive)
    if not report.ergodic:
        raise NotErgodicError(
            "passive kernel is not ergodic "
            f"(irreducible={report.irreducible}, aperiodic={report.aperiodic})"
        )


def solve_mpe(
    passive: StochasticMatrix,
    f: CostFunction,
    settings: Optional[SolverSettings] = None,
    initial_v: Optional[np.ndarray] = None,
) -> MpeSolution:
    """Solve e^{-f} P V = e^{-lambda} V by certified power iteration.

    The cost is shifted by its minimum before iterating (the shift factors
    out of the eigenproblem exactly), which keeps the bracket well
    conditioned for costs with a large common offset; the reported bracket
    is rescaled back, so its width never exceeds the tolerance. All
    products with e^{-f} and e^{-h} are evaluated in log space.

    ``initial_v`` overrides the default all-ones start; any strictly
    positive vector converges to the same pinned solution.
    """
    settings = settings or SolverSettings()
    _validate_inputs(passive, f, settings)
    fv = f.values
    base = float(fv.min())
    log_passive = _accel.log_rows(passive.rows)
    if initial_v is None:
        w0 = None
    else:
        v0 = np.asarray(initial_v, dtype=np.float64)
        if v0.shape != (passive.n,):
            raise DimensionMismatchError(f"initial_v has shape {v0.shape}, expected ({passive.n},)")
        if not np.all(v0 > 0):
            raise ValueError("initial_v must be strictly positive")
        w0 = np.log(v0)
        w0 = w0 - w0[settings.pin_index]
    w, lo, hi, iterations, converged = _power_iterate(
        log_passive, fv - base, settings, w0
    )
    scale = math.exp(-base)
    bracket = (lo * scale, hi * scale)
    if not converged:
        raise ConvergenceError(
            f"no convergence after {iterations} iterations "
            f"(bracket width {hi - lo:.3e} > tolerance {settings.tolerance:.3e})",
            bracket=bracket,
            iterations=iterations,
        )
    lam = base - math.log(0.5 * (lo + hi))
    h = -w
    h = h - h[settings.pin_index]  # exact zero at the pin (clears -0.0 too)
    v = np.exp(-h)
    return MpeSolution(lam=lam, h=h, v=v, bracket=bracket, iterations=iterations)


def _power_iterate(log_passive, f_shifted, settings, w0):
    if w0 is None:
        return _accel.mpe_power_iteration(
            log_passive, f_shifted, settings.pin_index, settings.tolerance, settings.max_iterations
        )
    # custom start: run the numpy loop seeded at w0 (the compiled kernel
    # always starts from ones; both converge to the same pinned solution)
    n = log_passive.shape[0]
    w = np.array(w0, dtype=np.float64)
    lo_cert, hi_cert = 0.0, math.inf
    it = 0
    while it < settings.max_iterations:
        y = _accel.log_matvec(log_passive, w) - f_shifted
        d = y - w
        lo_cert = max(lo_cert, math.exp(d.min()))
        hi_cert = min(hi_cert, math.exp(d.max()))
        w = y - y[settings.pin_index]
        it += 1
        if hi_cert - lo_cert <= settings.tolerance:
            return w, lo_cert, hi_cert, it, True
    return w, lo_cert, hi_cert, it, False


def acoe_residual(passive: StochasticMatrix, f: CostFunction, sol: MpeSolution) -> float:
    """max_x |h(x) + lambda - f(x) + log(P e^{-h})(x)|, in log-sum-exp form.

    Zero for an exact solution of the optimality equation; accepted solver
    output stays below 1e-8.
    """
    if f.n != passive.n or sol.h.shape[0] != passive.n:
        raise DimensionMismatchError("passive, cost and solution dimensions disagree")
    log_lambda_h = _accel.log_matvec(_accel.log_rows(passive.rows), -sol.h)
    return float(np.abs(sol.h + sol.lam - f.values + log_lambda_h).max())


def eigen_oracle(passive: StochasticMatrix, f: CostFunction) -> tuple[float, np.ndarray]:
    """Brute-force dominant eigenpair of e^{-f} P for desk-scale checks.

    Squares the matrix 60 times (renormalizing by the max entry) so the
    column space collapses onto the dominant eigenvector, then takes one
    Collatz bracket for the eigenvalue. Deliberately shares no code with
    the power iteration in ``solve_mpe``; guarded to n <= 12.
    """
    if passive.n > ORACLE_MAX_STATES:
        raise ValueError(f"eigen_oracle is desk-scale only (n <= {ORACLE_MAX_STATES})")
    if f.n != passive.n:
        raise DimensionMismatchError(f"cost has {f.n} states, kernel has {passive.n}")
    a = np.exp(-f.values)[:, None] * passive.rows
    b = a / a.max()
    for _ in range(60):
        b = b @ b
        b = b / b.max()
    v = b @ np.ones(passive.n)
    v = v / v[0]
    ratios = (a @ v) / v
    lam = -math.log(0.5 * (float(ratios.min()) + float(ratios.max())))
    return lam, v
