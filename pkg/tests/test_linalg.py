import numpy as np
import pytest

from splitopt.errors import (
    DimensionMismatch,
    InvalidPartition,
    NegativeThreshold,
    NonFiniteEntries,
    NotPositiveSemidefiniteQuadraticForm,
    NotSquare,
    NotSymmetric,
)
from splitopt.linalg import (
    block_soft_threshold,
    is_psd,
    soft_threshold,
    symmetric_eigenvalues,
    weighted_norm,
)


def grid_argmin_l1_prox(v, a, lo=-5.0, hi=5.0, step=1e-3):
    """Independent oracle: coordinatewise dense grid search for
    argmin 0.5*(u - v)^2 + a*|u|."""
    grid = np.arange(lo, hi + step, step)
    out = np.empty_like(v)
    for i, vi in enumerate(v):
        vals = 0.5 * (grid - vi) ** 2 + a * np.abs(grid)
        out[i] = grid[np.argmin(vals)]
    return out


def grid_argmin_group_prox(v, a, step=1e-3):
    """Independent oracle for argmin 0.5||u - v||^2 + a||u||_2: the minimizer
    lies on the segment [0, v], so search the scalar multiple."""
    ts = np.arange(0.0, 1.0 + step, step)
    cands = ts[:, None] * v[None, :]
    vals = 0.5 * np.sum((cands - v) ** 2, axis=1) + a * np.linalg.norm(cands, axis=1)
    return cands[np.argmin(vals)]


class TestWeightedNorm:
    def test_identity_is_euclidean(self):
        assert weighted_norm([3.0, 4.0], np.eye(2)) == pytest.approx(5.0)

    def test_zero_vector(self):
        g = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert weighted_norm([0.0, 0.0], g) == 0.0

    def test_diagonal_quadratic_form(self):
        # direct evaluation: 1*4 + 1*9 = 13
        val = weighted_norm([1.0, 1.0], np.diag([4.0, 9.0]))
        assert val == pytest.approx(np.sqrt(13.0), abs=1e-12)

    def test_matches_euclidean_for_random_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            v = rng.standard_normal(5)
            assert weighted_norm(v, np.eye(5)) == pytest.approx(np.linalg.norm(v), rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            weighted_norm([1.0, 2.0, 3.0], np.eye(2))

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetric):
            weighted_norm([1.0, 2.0], np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_indefinite_form_raises(self):
        g = np.array([[-1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(NotPositiveSemidefiniteQuadraticForm):
            weighted_norm([1.0, 0.0], g)

    def test_tiny_negative_clamps_to_zero(self):
        g = np.array([[-1e-12, 0.0], [0.0, 1.0]])
        assert weighted_norm([1.0, 0.0], g) == 0.0

    def test_rejects_nan(self):
        with pytest.raises(NonFiniteEntries):
            weighted_norm([np.nan, 0.0], np.eye(2))


class TestIsPsd:
    def test_identity(self):
        assert is_psd(np.eye(2), tol=1e-10)

    def test_indefinite_by_characteristic_polynomial(self):
        # [[1,2],[2,1]]: lambda^2 - 2 lambda - 3 = 0 -> {-1, 3}
        g = np.array([[1.0, 2.0], [2.0, 1.0]])
        assert not is_psd(g, tol=1e-10)
        eigs = symmetric_eigenvalues(g)
        assert eigs == pytest.approx([-1.0, 3.0], abs=1e-12)

    def test_zero_matrix_zero_tol(self):
        assert is_psd(np.zeros((3, 3)), tol=0.0)

    def test_monotone_in_tol(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.standard_normal((4, 4))
            g = (a + a.T) / 2
            tols = [0.0, 1e-10, 1e-6, 1e-2, 1.0, 10.0]
            flags = [is_psd(g, tol=t) for t in tols]
            # once true, stays true as tol grows
            assert all(b or not a_ for a_, b in zip(flags, flags[1:]))

    def test_not_square(self):
        with pytest.raises((NotSquare, DimensionMismatch)):
            is_psd(np.ones((2, 3)))

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            is_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestSoftThreshold:
    def test_three_cases(self):
        out = soft_threshold([2.0, -0.5, -3.0], 1.0)
        assert np.allclose(out, [1.0, 0.0, -2.0])

    def test_zero_threshold_is_identity(self):
        v = np.array([0.3, -1.7, 0.0, 2.2])
        assert np.array_equal(soft_threshold(v, 0.0), v)

    def test_boundary(self):
        assert soft_threshold([0.7], 0.7) == pytest.approx([0.0])

    def test_negative_threshold(self):
        with pytest.raises(NegativeThreshold):
            soft_threshold([1.0], -0.1)

    def test_matches_grid_search_prox(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            v = rng.uniform(-3, 3, size=3)
            a = rng.uniform(0.0, 2.0)
            expected = grid_argmin_l1_prox(v, a)
            assert np.max(np.abs(soft_threshold(v, a) - expected)) <= 2e-3


class TestBlockSoftThreshold:
    def test_factor_exactly_zero(self):
        out = block_soft_threshold([3.0, 4.0], [[0, 1]], 5.0)
        assert np.allclose(out, [0.0, 0.0])

    def test_half_shrink(self):
        # ||v|| = 5, factor 1 - 2.5/5 = 0.5
        out = block_soft_threshold([3.0, 4.0], [[0, 1]], 2.5)
        assert np.allclose(out, [1.5, 2.0])
        oracle = grid_argmin_group_prox(np.array([3.0, 4.0]), 2.5)
        assert np.max(np.abs(out - oracle)) <= 2e-3

    def test_zero_threshold_identity(self):
        v = np.array([1.0, -2.0, 0.5])
        out = block_soft_threshold(v, [[0, 2], [1]], 0.0)
        assert np.allclose(out, v)

    def test_zero_block_stays_zero(self):
        out = block_soft_threshold([0.0, 0.0, 1.0], [[0, 1], [2]], 0.5)
        assert np.allclose(out, [0.0, 0.0, 0.5])

    def test_singleton_blocks_equal_soft_threshold(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            v = rng.standard_normal(6)
            a = rng.uniform(0, 1.5)
            blocks = [[i] for i in range(6)]
            assert np.array_equal(block_soft_threshold(v, blocks, a),
                                  soft_threshold(v, a))

    def test_matches_grid_search_prox(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            v = rng.uniform(-2, 2, size=3)
            a = rng.uniform(0.0, 1.5)
            out = block_soft_threshold(v, [[0, 1, 2]], a)
            oracle = grid_argmin_group_prox(v, a)
            assert np.max(np.abs(out - oracle)) <= 2e-3

    def test_invalid_partition(self):
        with pytest.raises(InvalidPartition):
            block_soft_threshold([1.0, 2.0], [[0]], 0.1)
        with pytest.raises(InvalidPartition):
            block_soft_threshold([1.0, 2.0], [[0, 1], [1]], 0.1)

    def test_negative_threshold(self):
        with pytest.raises(NegativeThreshold):
            block_soft_threshold([1.0], [[0]], -1.0)
