"""Tests for the dense tensor core and its constant tensors."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from polarmem.tensors import (
    Tensor,
    TensorError,
    cnot,
    contract,
    fix_index,
    ones,
    outer,
    parity,
    point,
    point0,
    point1,
    sum_index,
)


class TestTensor:
    def test_row_major_strides(self):
        T = Tensor(np.zeros((2, 3, 4)))
        assert T.dims == (2, 3, 4)
        assert T.strides == (12, 4, 1)
        assert T.flat().shape == (24,)

    def test_immutable(self):
        T = Tensor(np.ones(3))
        with pytest.raises(ValueError):
            T.data[0] = 5.0

    def test_rejects_non_finite(self):
        with pytest.raises(TensorError):
            Tensor(np.array([1.0, np.nan]))

    def test_label_count_must_match_rank(self):
        with pytest.raises(TensorError):
            Tensor(np.zeros((2, 2)), ("a",))


class TestContract:
    def test_rank_two_is_matrix_product(self, rng):
        A, B = rng.random((3, 4)), rng.random((4, 5))
        C = contract(Tensor(A), [1], Tensor(B), [0])
        assert_allclose(C.data, A @ B, rtol=1e-12)

    def test_ones_with_ones_is_extent(self):
        assert contract(ones(7), [0], ones(7), [0]).scalar() == 7.0

    def test_two_axes_against_loops(self, rng):
        A, B = rng.random((3, 4, 5)), rng.random((5, 4))
        C = contract(Tensor(A), [1, 2], Tensor(B), [1, 0])
        expected = np.zeros(3)
        for i, j, k in itertools.product(range(3), range(4), range(5)):
            expected[i] += A[i, j, k] * B[k, j]
        assert_allclose(C.data, expected, rtol=1e-12)

    def test_free_axes_order(self, rng):
        A = Tensor(rng.random((2, 3)), ("i", "j"))
        B = Tensor(rng.random((3, 4, 5)), ("j", "k", "l"))
        C = contract(A, [1], B, [0])
        assert C.dims == (2, 4, 5)
        assert C.labels == ("i", "k", "l")

    @pytest.mark.parametrize(
        "axes_a, axes_b",
        [([0], [0]), ([3], [0]), ([1, 1], [0, 1]), ([1], [0, 1])],
    )
    def test_bad_axes(self, rng, axes_a, axes_b):
        A, B = Tensor(rng.random((2, 3))), Tensor(rng.random((3, 3)))
        with pytest.raises(TensorError):
            contract(A, axes_a, B, axes_b)

    def test_bilinear(self, rng):
        A, B = Tensor(rng.random((3, 4))), Tensor(rng.random((4, 2)))
        lhs = contract(A * 2.5, [1], B, [0])
        rhs = contract(A, [1], B, [0]) * 2.5
        assert_allclose(lhs.data, rhs.data, rtol=1e-12)

    def test_chain_associativity(self, rng):
        A, B, C = (Tensor(rng.random(s)) for s in ((3, 4), (4, 5), (5, 2)))
        left = contract(contract(A, [1], B, [0]), [1], C, [0])
        right = contract(A, [1], contract(B, [1], C, [0]), [0])
        assert_allclose(left.data, right.data, rtol=1e-12)


class TestIndexOps:
    def test_fix_cnot_inputs(self):
        fixed = fix_index(fix_index(cnot(), 0, 1), 0, 1)
        assert_array_equal(fixed.data, outer(point1(), point0()).data)

    def test_fix_point_to_scalar(self):
        assert fix_index(point0(), 0, 0).scalar() == 1.0

    def test_fix_matches_slice(self, rng):
        A = rng.random((2, 3, 4))
        assert_array_equal(fix_index(Tensor(A), 1, 2).data, A[:, 2, :])

    def test_fix_equals_contract_with_point(self, rng):
        A = Tensor(rng.random((3, 2)))
        assert_allclose(fix_index(A, 1, 1).data, contract(A, [1], point1(), [0]).data)

    def test_fix_out_of_range(self):
        with pytest.raises(TensorError):
            fix_index(point0(), 0, 2)

    def test_sum_cnot_outputs(self):
        assert_array_equal(sum_index(sum_index(cnot(), 3), 2).data, np.ones((2, 2)))

    def test_sum_of_outer_points(self):
        both = outer(point0(), point1())
        assert_array_equal(sum_index(both, 0).data, point1().data)
        assert_array_equal(sum_index(both, 1).data, point0().data)

    def test_sum_matches_loops(self, rng):
        A = rng.random((3, 4, 2))
        expected = np.zeros((3, 2))
        for i, j, k in itertools.product(range(3), range(4), range(2)):
            expected[i, k] += A[i, j, k]
        assert_allclose(sum_index(Tensor(A), 1).data, expected, rtol=1e-12)
        assert_allclose(sum_index(Tensor(A), 1).data, contract(Tensor(A), [1], ones(4), [0]).data, rtol=1e-12)


class TestOuter:
    def test_points(self):
        assert_array_equal(outer(point0(), point1()).flat(), [0, 1, 0, 0])

    def test_ones(self):
        assert_array_equal(outer(ones(2), ones(2)).data, np.ones((2, 2)))

    def test_against_loops(self, rng):
        A, B = rng.random((2, 3)), rng.random(4)
        C = outer(Tensor(A), Tensor(B))
        for i, j, k in itertools.product(range(2), range(3), range(4)):
            assert C.data[i, j, k] == A[i, j] * B[k]


class TestConstants:
    def test_points_and_ones(self):
        assert_array_equal(point0().data, [1, 0])
        assert_array_equal(point1().data, [0, 1])
        assert_array_equal(point(2, extent=3).data, [0, 0, 1])
        assert_array_equal(ones(4).data, np.ones(4))

    def test_cnot_entries(self):
        G = cnot().data
        for a, b, c, d in itertools.product((0, 1), repeat=4):
            assert G[a, b, c, d] == (1.0 if (c == a and d == a ^ b) else 0.0)

    def test_cnot_is_an_involution(self):
        twice = contract(cnot(), [2, 3], cnot(), [0, 1])
        expected = np.einsum("ae,bf->abef", np.eye(2), np.eye(2))
        assert_array_equal(twice.data, expected)

    def test_full_sum_of_cnot(self):
        total = cnot()
        for _ in range(4):
            total = sum_index(total, 0)
        assert total.scalar() == cnot().data.sum() == 4.0

    def test_parity(self):
        P = parity().data
        for c, b, d in itertools.product((0, 1), repeat=3):
            assert P[c, b, d] == (1.0 if d == c ^ b else 0.0)
