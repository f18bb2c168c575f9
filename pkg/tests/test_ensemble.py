"""Tests for ensemble containers and sample statistics."""

import numpy as np
import pytest

from otfilter.ensemble import (
    Ensemble,
    covariance,
    cross_covariance,
    from_gaussian,
    mean,
)
from otfilter.errors import (
    DecompositionError,
    InsufficientSamplesError,
    InvalidEnsembleError,
)


class TestEnsemble:
    def test_shape_properties(self):
        e = Ensemble(np.zeros((5, 4)))
        assert e.size == 5 and e.dim == 4

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidEnsembleError):
            Ensemble(np.array([[1.0, np.nan]]))

    def test_empty_rejected(self):
        with pytest.raises(InvalidEnsembleError):
            Ensemble(np.zeros((0, 3)))


class TestMean:
    def test_two_members(self):
        np.testing.assert_array_equal(
            mean(Ensemble([[1.0, 0.0], [3.0, 0.0]])), [2.0, 0.0]
        )

    def test_single_member(self):
        np.testing.assert_array_equal(mean(Ensemble([[4.0, -2.0]])), [4.0, -2.0])

    def test_symmetric_pair(self):
        np.testing.assert_array_equal(
            mean(Ensemble([[1.0, 1.0], [-1.0, -1.0]])), [0.0, 0.0]
        )


class TestCovariance:
    def test_scalar_pair(self):
        np.testing.assert_allclose(covariance(Ensemble([[0.0], [2.0]])), [[2.0]])

    def test_identical_members(self):
        e = Ensemble(np.tile([1.0, 2.0, 3.0], (6, 1)))
        np.testing.assert_array_equal(covariance(e), np.zeros((3, 3)))

    def test_degenerate_direction(self):
        e = Ensemble(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        cov = covariance(e)
        np.testing.assert_array_equal(cov[1, :], [0.0, 0.0])
        np.testing.assert_array_equal(cov[:, 1], [0.0, 0.0])

    def test_single_member_rejected(self):
        with pytest.raises(InsufficientSamplesError):
            covariance(Ensemble([[1.0]]))

    def test_symmetric_psd_property(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            e = Ensemble(rng.normal(size=(int(rng.integers(2, 40)), 4)))
            cov = covariance(e)
            assert np.max(np.abs(cov - cov.T)) <= 1e-12
            assert np.linalg.eigvalsh(cov).min() >= -1e-10

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        members = rng.normal(size=(12, 3))
        e = Ensemble(members)
        p = Ensemble(members[rng.permutation(12)])
        np.testing.assert_allclose(mean(e), mean(p), atol=1e-14)
        np.testing.assert_allclose(covariance(e), covariance(p), atol=1e-14)


class TestCrossCovariance:
    def test_self_equals_covariance(self):
        rng = np.random.default_rng(6)
        members = rng.normal(size=(9, 3))
        np.testing.assert_allclose(
            cross_covariance(members, members),
            covariance(Ensemble(members)),
            atol=1e-13,
        )

    def test_constant_second_argument(self):
        a = np.random.default_rng(8).normal(size=(7, 2))
        b = np.ones((7, 3))
        np.testing.assert_array_equal(cross_covariance(a, b), np.zeros((2, 3)))

    def test_hand_computed_value(self):
        a = np.array([[0.0], [2.0]])
        b = np.array([[0.0], [4.0]])
        np.testing.assert_allclose(cross_covariance(a, b), [[4.0]])

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=(15, 3))
        b = rng.normal(size=(15, 2))
        np.testing.assert_allclose(
            cross_covariance(a, b), cross_covariance(b, a).T, atol=1e-12
        )

    def test_count_mismatch_rejected(self):
        with pytest.raises(InsufficientSamplesError):
            cross_covariance(np.zeros((3, 2)), np.zeros((4, 2)))


class TestFromGaussian:
    def test_tiny_variance_collapses_to_mean(self):
        rng = np.random.default_rng(12)
        center = np.array([1.0, -2.0])
        e = from_gaussian(center, 1e-20 * np.eye(2), 50, rng)
        assert np.max(np.abs(e.members - center)) <= 1e-8

    def test_large_sample_mean(self):
        rng = np.random.default_rng(14)
        n, dim = 10_000, 3
        e = from_gaussian(np.zeros(dim), np.eye(dim), n, rng)
        # 5-sigma margin on the standard error 1/sqrt(N)
        assert np.linalg.norm(mean(e)) <= 5e-2 * np.sqrt(dim)

    def test_deterministic_given_seed(self):
        cov = np.diag([1.0, 2.0])
        a = from_gaussian(np.zeros(2), cov, 20, np.random.default_rng(99))
        b = from_gaussian(np.zeros(2), cov, 20, np.random.default_rng(99))
        np.testing.assert_array_equal(a.members, b.members)

    def test_non_spd_rejected(self):
        rng = np.random.default_rng(16)
        with pytest.raises(DecompositionError):
            from_gaussian(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 5, rng)
