import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klwalk import (
    CostFunction,
    Distribution,
    DimensionMismatchError,
    NotUnichainError,
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
from klwalk._accel import markov_path

from conftest import random_ergodic_kernel


def dist_pairs(min_n=2, max_n=6):
    """Two distributions over the same state space, as a hypothesis strategy."""

    def normalize(raw):
        arr = np.array(raw)
        return arr / arr.sum()

    return st.integers(min_n, max_n).flatmap(
        lambda n: st.tuples(
            st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n).map(normalize),
            st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n).map(normalize),
        )
    )


def kernels(min_n=2, max_n=6):
    def normalize(raw):
        arr = np.array(raw)
        return arr / arr.sum(axis=1, keepdims=True)

    return st.integers(min_n, max_n).flatmap(
        lambda n: st.lists(
            st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n),
            min_size=n,
            max_size=n,
        ).map(normalize)
    )


class TestContainers:
    def test_state_space_labels(self):
        s = StateSpace(2, labels=("a", "b"))
        assert s.n == 2
        with pytest.raises(ValueError):
            StateSpace(0)
        with pytest.raises(ValueError):
            StateSpace(2, labels=("a",))
        with pytest.raises(ValueError):
            StateSpace(2, labels=("a", "a"))

    def test_distribution_validation(self):
        d = Distribution([0.25, 0.75])
        assert d.n == 2
        assert not d.weights.flags.writeable
        with pytest.raises(ValueError):
            Distribution([0.5, 0.6])
        with pytest.raises(ValueError):
            Distribution([-0.1, 1.1])

    def test_matrix_validation_and_renormalize(self):
        with pytest.raises(ValueError):
            StochasticMatrix([[0.5, 0.6], [0.5, 0.5]])
        with pytest.raises(ValueError):
            StochasticMatrix([[1.2, -0.2], [0.5, 0.5]])
        fixed = StochasticMatrix.renormalized([[2.0, 2.0], [1.0, 3.0]])
        np.testing.assert_allclose(fixed.rows, [[0.5, 0.5], [0.25, 0.75]])
        with pytest.raises(ValueError):
            StochasticMatrix.renormalized([[0.0, 0.0], [1.0, 1.0]])

    def test_cost_function_validation(self):
        with pytest.raises(ValueError):
            CostFunction([-0.5, 0.5])
        with pytest.raises(ValueError):
            CostFunction([np.inf, 0.0])
        assert CostFunction([0.2, 0.9]).max() == 0.9


class TestTotalVariation:
    def test_disjoint_point_masses(self):
        assert total_variation(Distribution([1, 0]), Distribution([0, 1])) == 2.0

    def test_identical(self):
        mu = Distribution([0.3, 0.7])
        assert total_variation(mu, mu) == 0.0

    def test_direct_summation(self):
        # |0.5-0.25| + |0.5-0.75| = 0.5
        assert total_variation([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.5, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            total_variation([1.0], [0.5, 0.5])


class TestKlDivergence:
    def test_identical(self):
        mu = Distribution([0.3, 0.7])
        assert kl_divergence(mu, mu) == 0.0

    def test_support_violation(self):
        assert kl_divergence([1, 0], [0, 1]) == math.inf

    def test_direct_summation(self):
        # 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75) = 0.5 ln(4/3)
        expected = 0.5 * math.log(4 / 3)
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.143841, abs=1e-6)

    def test_zero_log_zero_convention(self):
        # mass-0 states never contribute, even against zero mass
        assert kl_divergence([0.0, 1.0], [0.0, 1.0]) == 0.0

    def test_infinity_saturates(self):
        v = kl_divergence([1, 0], [0, 1])
        assert v + 1.0 == math.inf and v > 1e300

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            kl_divergence([1.0], [0.5, 0.5])


class TestSpanSeminorm:
    def test_examples(self):
        assert span_seminorm([1, 3, 2]) == 2.0
        assert span_seminorm([5.5, 5.5, 5.5]) == 0.0
        assert span_seminorm([0.0, math.log(2)]) == pytest.approx(math.log(2), abs=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            span_seminorm([])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(-100, 100))
    def test_shift_invariance_and_sup_bound(self, values, c):
        arr = np.array(values)
        assert span_seminorm(arr + c) == pytest.approx(span_seminorm(arr), abs=1e-9)
        assert span_seminorm(arr) <= 2 * np.abs(arr).max() + 1e-12


class TestDobrushin:
    def test_rank_one(self):
        p = StochasticMatrix([[0.3, 0.7], [0.3, 0.7]])
        assert dobrushin_coefficient(p) == 0.0

    def test_identity(self):
        assert dobrushin_coefficient(StochasticMatrix(np.eye(2))) == 1.0

    def test_direct_formula(self):
        p = StochasticMatrix([[0.5, 0.5], [0.25, 0.75]])
        assert dobrushin_coefficient(p) == pytest.approx(0.25, abs=1e-15)

    @given(kernels(), dist_pairs())
    @settings(max_examples=40, deadline=None)
    def test_contraction(self, rows, pair):
        n = rows.shape[0]
        mu, nu = pair
        if mu.shape[0] != n:
            mu = np.resize(mu, n)
            mu = mu / mu.sum()
            nu = np.resize(nu, n)
            nu = nu / nu.sum()
        p = StochasticMatrix(rows)
        alpha = dobrushin_coefficient(p)
        assert 0.0 <= alpha <= 1.0
        lhs = np.abs(mu @ rows - nu @ rows).sum()
        rhs = alpha * np.abs(mu - nu).sum()
        assert lhs <= rhs + 1e-12


@given(dist_pairs())
@settings(max_examples=60)
def test_pinsker_inequality(pair):
    mu, nu = pair
    kl = kl_divergence(mu, nu)
    assert total_variation(mu, nu) <= math.sqrt(2 * kl) + 1e-12


class TestErgodicityReport:
    def test_period_two_swap(self):
        report = ergodicity_report(StochasticMatrix([[0, 1], [1, 0]]))
        assert report.irreducible and not report.aperiodic
        assert report.nbar is None and report.theta is None

    def test_already_positive(self):
        report = ergodicity_report(StochasticMatrix([[0.5, 0.5], [0.5, 0.5]]))
        assert report.irreducible and report.aperiodic
        assert report.nbar == 1 and report.theta == 0.5

    def test_lazy_path_walk(self):
        rows = np.array([
            [0.5, 0.5, 0.0],
            [0.25, 0.5, 0.25],
            [0.0, 0.5, 0.5],
        ])
        report = ergodicity_report(StochasticMatrix(rows))
        assert report.nbar == 2
        # matrix-power oracle for theta and nbar minimality
        squared = rows @ rows
        assert report.theta == pytest.approx(float(squared.min()), abs=1e-15)
        assert squared.min() > 0 and rows.min() == 0.0

    def test_reducible(self):
        rows = np.array([
            [1.0, 0.0],
            [0.5, 0.5],
        ])
        report = ergodicity_report(StochasticMatrix(rows))
        assert not report.irreducible
        assert report.nbar is None

    def test_nbar_minimality_randomized(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 7))
            rows = rng.dirichlet(np.ones(n), size=n)
            # sparsify while keeping state 0 a positive hub and the diagonal alive
            mask = rng.random((n, n)) < 0.5
            mask[:, 0] = True
            mask[0, :] = True
            np.fill_diagonal(mask, True)
            rows = rows * mask
            p = StochasticMatrix.renormalized(rows)
            report = ergodicity_report(p)
            assert report.irreducible and report.aperiodic
            power = np.linalg.matrix_power(p.rows, report.nbar)
            assert power.min() > 0
            assert report.theta == pytest.approx(float(power.min()), rel=1e-12)
            if report.nbar > 1:
                below = np.linalg.matrix_power(p.rows, report.nbar - 1)
                assert below.min() == 0.0


class TestInvariantDistribution:
    def test_rank_one(self):
        mu = [0.2, 0.5, 0.3]
        p = StochasticMatrix([mu, mu, mu])
        np.testing.assert_allclose(invariant_distribution(p).weights, mu, atol=1e-12)

    def test_doubly_stochastic_symmetric(self):
        p = StochasticMatrix([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])
        np.testing.assert_allclose(invariant_distribution(p).weights, np.full(3, 1 / 3), atol=1e-12)

    def test_two_state_solve(self):
        p = StochasticMatrix([[0.9, 0.1], [0.5, 0.5]])
        np.testing.assert_allclose(invariant_distribution(p).weights, [5 / 6, 1 / 6], atol=1e-12)

    def test_fixed_point_randomized(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 9))
            p = random_ergodic_kernel(rng, n)
            pi = invariant_distribution(p).weights
            assert np.abs(pi @ p.rows - pi).sum() <= 1e-10

    def test_not_unichain(self):
        block = StochasticMatrix([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(NotUnichainError):
            invariant_distribution(block)


class TestSampleNext:
    def test_point_mass(self):
        p = StochasticMatrix([[0.0, 1.0], [1.0, 0.0]])
        for seed in (0, 1, 99):
            assert sample_next(p, 0, np.random.default_rng(seed)) == 1

    def test_determinism(self):
        p = StochasticMatrix([[0.25, 0.75], [0.6, 0.4]])
        a = [sample_next(p, 0, np.random.default_rng(42)) for _ in range(5)]
        b = [sample_next(p, 0, np.random.default_rng(42)) for _ in range(5)]
        assert a == b

    def test_out_of_range(self):
        p = StochasticMatrix([[1.0]])
        with pytest.raises(IndexError):
            sample_next(p, 3, np.random.default_rng(0))

    def test_never_lands_off_support(self, rng):
        row = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
        p = StochasticMatrix([row] * 5)
        draws = {sample_next(p, 0, np.random.default_rng(s)) for s in range(200)}
        assert draws <= {1, 3}

    def test_law_of_large_numbers(self):
        # frequencies over 1e6 draws from the row (0.25, 0.75)
        rows = np.array([[0.25, 0.75], [0.25, 0.75]])
        cdf = np.cumsum(rows, axis=1)
        u = np.random.default_rng(7).random(10**6)
        states = markov_path(cdf, 0, u)
        freq = np.bincount(states[1:], minlength=2) / 10**6
        np.testing.assert_allclose(freq, [0.25, 0.75], atol=0.005)
