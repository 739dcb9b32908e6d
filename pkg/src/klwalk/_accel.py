"""Hot numeric kernels with optional numba compilation.

Two inner loops dominate the runtime of the experiment harness: the
log-domain power iteration behind the eigenproblem solver and the
step-by-step simulation of Markov chains for policy evaluation. Both are
provided in a pure-numpy flavour and, when numba is importable, in a
compiled flavour. Setting the environment variable ``KLWALK_NO_NUMBA=1``
before import forces the numpy fallback; ``benchmarks/bench_kernels.py``
times the two paths against each other.

The selected implementations are exported as ``mpe_power_iteration`` and
``markov_path``; the numpy versions stay importable under ``*_numpy`` so
the two backends can be compared directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("KLWALK_NO_NUMBA", "").strip().lower()
_NUMBA_DISABLED = _FLAG in ("1", "true", "yes")

if not _NUMBA_DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _NUMBA_DISABLED = True

NUMBA_ENABLED = not _NUMBA_DISABLED


def log_rows(rows: np.ndarray) -> np.ndarray:
    """Entrywise log of a nonnegative matrix, -inf where the entry is 0."""
    out = np.full(rows.shape, -np.inf)
    np.log(rows, out=out, where=rows > 0)
    return out


def log_matvec(log_rows_: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp of ``log_rows_ + w``, i.e. log(exp(L) @ exp(w)).

    Every row is assumed to contain at least one finite entry (true for
    the log of any stochastic matrix), so the max-shift is always finite.
    """
    b = log_rows_ + w[np.newaxis, :]
    mx = b.max(axis=1)
    return mx + np.log(np.exp(b - mx[:, np.newaxis]).sum(axis=1))


def mpe_power_iteration_numpy(log_passive, f, pin, tol, max_iter):
    """Power iteration on A = e^{-f} P in log space with certified bounds.

    Maintains w = log V normalized so w[pin] = 0 and the running
    Collatz bracket [lo, hi] on the dominant eigenvalue of A (linear
    domain). Each raw Collatz bound is valid for any positive iterate, so
    the running max/min is a certificate at every iteration.

    Returns (w, lo, hi, iterations, converged).
    """
    n = log_passive.shape[0]
    w = np.zeros(n)
    lo_cert = 0.0
    hi_cert = math.inf
    it = 0
    while it < max_iter:
        y = log_matvec(log_passive, w) - f  # log(A V)
        d = y - w
        lo_cert = max(lo_cert, math.exp(d.min()))
        hi_cert = min(hi_cert, math.exp(d.max()))
        w = y - y[pin]
        it += 1
        if hi_cert - lo_cert <= tol:
            return w, lo_cert, hi_cert, it, True
    return w, lo_cert, hi_cert, it, False


def _bisect_right_py(cdf, u):
    # smallest j with cdf[j] > u (numpy scalar-friendly bisect)
    return int(np.searchsorted(cdf, u, side="right"))


def pick_from_cdf_numpy(cdf: np.ndarray, u: float) -> int:
    """Inverse-CDF draw; always lands on an index with positive mass."""
    n = cdf.shape[0]
    j = _bisect_right_py(cdf, u)
    if j >= n:  # u fell in the rounding gap above cdf[-1]
        j = n - 1
        while j > 0 and cdf[j] <= cdf[j - 1]:
            j -= 1
    return j


def markov_path_numpy(cdf_rows, start, uniforms):
    """Walk a chain given per-row CDFs and pre-drawn uniforms.

    Returns the visited states as int64, length ``len(uniforms) + 1``,
    beginning with ``start``.
    """
    t_steps = uniforms.shape[0]
    states = np.empty(t_steps + 1, dtype=np.int64)
    x = int(start)
    states[0] = x
    for t in range(t_steps):
        x = pick_from_cdf_numpy(cdf_rows[x], uniforms[t])
        states[t + 1] = x
    return states


if NUMBA_ENABLED:

    @njit(cache=True)
    def _mpe_power_nb(log_passive, f, pin, tol, max_iter):  # pragma: no cover
        n = log_passive.shape[0]
        w = np.zeros(n)
        y = np.empty(n)
        lo_cert = 0.0
        hi_cert = math.inf
        it = 0
        while it < max_iter:
            for x in range(n):
                mx = -math.inf
                for z in range(n):
                    v = log_passive[x, z] + w[z]
                    if v > mx:
                        mx = v
                acc = 0.0
                for z in range(n):
                    v = log_passive[x, z]
                    if v > -math.inf:
                        acc += math.exp(v + w[z] - mx)
                y[x] = mx + math.log(acc) - f[x]
            lo = math.inf
            hi = -math.inf
            for x in range(n):
                d = y[x] - w[x]
                if d < lo:
                    lo = d
                if d > hi:
                    hi = d
            lo_lin = math.exp(lo)
            hi_lin = math.exp(hi)
            if lo_lin > lo_cert:
                lo_cert = lo_lin
            if hi_lin < hi_cert:
                hi_cert = hi_lin
            piv = y[pin]
            for x in range(n):
                w[x] = y[x] - piv
            it += 1
            if hi_cert - lo_cert <= tol:
                return w, lo_cert, hi_cert, it, True
        return w, lo_cert, hi_cert, it, False

    @njit(cache=True)
    def _markov_path_nb(cdf_rows, start, uniforms):  # pragma: no cover
        t_steps = uniforms.shape[0]
        n = cdf_rows.shape[1]
        states = np.empty(t_steps + 1, dtype=np.int64)
        x = start
        states[0] = x
        for t in range(t_steps):
            u = uniforms[t]
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if u < cdf_rows[x, mid]:
                    hi = mid
                else:
                    lo = mid + 1
            j = lo
            if j >= n:
                j = n - 1
                while j > 0 and cdf_rows[x, j] <= cdf_rows[x, j - 1]:
                    j -= 1
            x = j
            states[t + 1] = x
        return states

    def mpe_power_iteration(log_passive, f, pin, tol, max_iter):
        w, lo, hi, it, ok = _mpe_power_nb(
            np.ascontiguousarray(log_passive, dtype=np.float64),
            np.ascontiguousarray(f, dtype=np.float64),
            int(pin),
            float(tol),
            int(max_iter),
        )
        return w, lo, hi, it, bool(ok)

    def markov_path(cdf_rows, start, uniforms):
        return _markov_path_nb(
            np.ascontiguousarray(cdf_rows, dtype=np.float64),
            int(start),
            np.ascontiguousarray(uniforms, dtype=np.float64),
        )

else:
    mpe_power_iteration = mpe_power_iteration_numpy
    markov_path = markov_path_numpy
