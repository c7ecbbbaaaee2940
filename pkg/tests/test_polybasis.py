import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatgp import (
    Design,
    count_monomials,
    count_poly_dim,
    enumerate_monomials,
    unisolvency_rank,
    vandermonde,
)
from flatgp.errors import FlatGpError


def brute_count(k, d):
    return sum(1 for e in itertools.product(range(k + 1), repeat=d) if sum(e) == k)


class TestCounts:
    def test_three_monomials_of_degree_two_in_dim_two(self):
        assert count_monomials(2, 2) == 3

    def test_only_the_constant_at_degree_zero(self):
        assert count_monomials(0, 7) == 1

    def test_degree_three_dim_two_by_enumeration(self):
        assert count_monomials(3, 2) == brute_count(3, 2) == 4

    def test_linear_space_dimension(self):
        for d in range(1, 6):
            assert count_poly_dim(1, d) == d + 1

    def test_degree_minus_one_is_zero(self):
        assert count_poly_dim(-1, 3) == 0

    def test_quadratics_in_dim_two(self):
        assert count_poly_dim(2, 2) == 1 + 2 + 3 == 6

    def test_partial_sums_identity(self):
        for k in range(9):
            for d in range(1, 9):
                assert count_poly_dim(k, d) == sum(
                    count_monomials(i, d) for i in range(k + 1)
                )


class TestEnumeration:
    def test_linear_dim_two(self):
        assert [m.exponents for m in enumerate_monomials(1, 2)] == [(0, 0), (1, 0), (0, 1)]

    def test_degree_zero(self):
        for d in (1, 3, 6):
            assert [m.exponents for m in enumerate_monomials(0, d)] == [(0,) * d]

    def test_degree_two_block_order(self):
        block = [m.exponents for m in enumerate_monomials(2, 2) if m.degree == 2]
        assert block == [(2, 0), (1, 1), (0, 2)]

    @given(st.integers(0, 5), st.integers(1, 4))
    @settings(max_examples=60, deadline=None)
    def test_graded_sorted_and_complete(self, k, d):
        mis = enumerate_monomials(k, d)
        assert len(mis) == count_poly_dim(k, d)
        degrees = [m.degree for m in mis]
        assert degrees == sorted(degrees)
        assert len({m.exponents for m in mis}) == len(mis)
        assert all(m.degree == sum(m.exponents) for m in mis)


class TestVandermonde:
    def test_matches_papers_two_dim_example(self):
        pts = np.array([[1.5, -2.0], [0.25, 3.0], [-1.0, 0.5]])
        vb = vandermonde(pts, 2)
        y, z = pts[:, 0], pts[:, 1]
        expect = np.column_stack([np.ones(3), y, z, y**2, y * z, z**2])
        np.testing.assert_allclose(vb.assembled, expect)
        assert [b.shape[1] for b in vb.blocks] == [1, 2, 3]

    def test_degree_zero_is_column_of_ones(self):
        vb = vandermonde(np.random.default_rng(0).normal(size=(6, 3)), 0)
        np.testing.assert_array_equal(vb.assembled, np.ones((6, 1)))

    def test_univariate_direct_evaluation(self):
        vb = vandermonde(np.array([0.0, 1.0, 2.0]), 2)
        np.testing.assert_allclose(
            vb.assembled, [[1, 0, 0], [1, 1, 1], [1, 2, 4]], atol=0
        )

    def test_orthonormal_columns(self, rng):
        vb = vandermonde(rng.uniform(0, 1, size=(12, 2)), 2)
        Q = vb.q_prefix(2)
        assert np.abs(Q.T @ Q - np.eye(Q.shape[1])).max() <= 1e-10

    def test_projector_property(self, rng):
        vb = vandermonde(rng.uniform(0, 1, size=(15, 2)), 3)
        Q = vb.q_prefix(3)
        P = Q @ Q.T
        assert np.abs(P @ P - P).max() <= 1e-9

    def test_prefix_spans_match_raw_monomials(self, rng):
        # span(Q_{<=j}) must equal span(V_{<=j}) for every prefix degree j
        vb = vandermonde(rng.uniform(-2, 2, size=(14, 2)), 3)
        for j in range(4):
            Q = vb.q_prefix(j)
            V = np.hstack(vb.blocks[: j + 1])
            resid = V - Q @ (Q.T @ V)
            assert np.abs(resid).max() <= 1e-9 * max(1.0, np.abs(V).max())

    def test_assembled_is_block_concatenation(self, rng):
        vb = vandermonde(rng.normal(size=(7, 2)), 2)
        np.testing.assert_array_equal(vb.assembled, np.hstack(vb.blocks))


class TestUnisolvency:
    def test_collinear_points_fail_for_quadratics(self, rng):
        t = rng.uniform(0, 1, 10)
        pts = np.column_stack([t, t])  # x1 == x2
        rank, ok = unisolvency_rank(pts, 2)
        assert not ok

    def test_any_point_set_unisolvent_for_constants(self, rng):
        for n in (1, 2, 5):
            _, ok = unisolvency_rank(rng.normal(size=(n, 1)), 0)
            assert ok

    def test_distinct_univariate_points_full_vandermonde(self, rng):
        x = np.sort(rng.uniform(0, 1, 6))
        rank, ok = unisolvency_rank(x, 5)
        assert ok and rank == 6

    def test_tol_must_be_positive(self):
        with pytest.raises(ValueError):
            unisolvency_rank(np.array([0.0, 1.0]), 1, tol=0.0)


class TestDesign:
    def test_rejects_nonfinite(self):
        with pytest.raises(FlatGpError):
            Design(np.array([[0.0], [np.inf]]))

    def test_one_dim_array_promoted(self):
        d = Design(np.array([1.0, 2.0]))
        assert d.points.shape == (2, 1) and d.n == 2 and d.d == 1
