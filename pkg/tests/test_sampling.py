"""Tests for transport-based sampling from constrained supports."""

import math

import numpy as np
import pytest

from otfilter.ensemble import Ensemble
from otfilter.errors import EmptySupportError
from otfilter.sampling import (
    TargetDensity,
    annulus_coverage,
    annulus_proposal,
    bimodal_target,
    ot_sample,
    uniform_annulus_target,
)

from helpers import (
    CHI2_99_DOF19,
    convex_hull_2d,
    ks_statistic,
    mixture_inverse_cdf_sample,
    points_in_hull,
)


class TestOTSample:
    def test_matching_density_is_fixed_point(self):
        rng = np.random.default_rng(1)
        proposal = annulus_proposal(80, 0.5, 1.0, rng)
        out = ot_sample(proposal, uniform_annulus_target(0.5, 1.0))
        np.testing.assert_allclose(out.members, proposal.members, atol=1e-10)

    def test_concentrated_target_collapses(self):
        proposal = Ensemble(np.array([[-1.0], [0.0], [1.0]]))
        spike = TargetDensity(
            pdf=lambda x: np.where(np.abs(x.reshape(-1)) < 1e-9, 1.0, 0.0)
        )
        out = ot_sample(proposal, spike)
        np.testing.assert_allclose(out.members, 0.0, atol=1e-12)

    def test_empty_support_rejected(self):
        proposal = Ensemble(np.array([[0.0], [1.0]]))
        zero = TargetDensity(pdf=lambda x: np.zeros(len(x)))
        with pytest.raises(EmptySupportError):
            ot_sample(proposal, zero)

    def test_negative_pdf_rejected(self):
        proposal = Ensemble(np.array([[0.0], [1.0]]))
        bad = TargetDensity(pdf=lambda x: np.full(len(x), -1.0))
        with pytest.raises(ValueError):
            ot_sample(proposal, bad)

    def test_weighted_mean_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            proposal = Ensemble(rng.uniform(-3, 3, size=(40, 2)))
            target = TargetDensity(
                pdf=lambda x: np.exp(-0.5 * np.sum(x**2, axis=1))
            )
            values = target.pdf(proposal.members)
            w = values / values.sum()
            out = ot_sample(proposal, target)
            np.testing.assert_allclose(
                out.members.mean(axis=0), w @ proposal.members, atol=1e-8
            )

    def test_bimodal_ks_against_inverse_cdf_oracle(self):
        rng = np.random.default_rng(3)
        proposal = Ensemble(rng.uniform(-6, 6, size=(400, 1)))
        out = ot_sample(proposal, bimodal_target())
        reference = mixture_inverse_cdf_sample(4000, np.random.default_rng(99))
        assert ks_statistic(out.members, reference) < 0.12

    def test_outputs_inside_proposal_hull(self):
        rng = np.random.default_rng(4)
        proposal = annulus_proposal(150, 0.5, 1.0, rng)
        out = ot_sample(proposal, uniform_annulus_target(0.5, 1.0))
        hull = convex_hull_2d(proposal.members)
        assert points_in_hull(out.members, hull).all()


class TestAnnulusProposal:
    def test_radii_within_bounds(self):
        rng = np.random.default_rng(5)
        e = annulus_proposal(2000, 0.5, 1.0, rng)
        radii = np.hypot(e.members[:, 0], e.members[:, 1])
        assert radii.min() >= 0.5 and radii.max() <= 1.0

    def test_mean_radius_closed_form(self):
        rng = np.random.default_rng(6)
        r_in, r_out = 0.5, 1.0
        e = annulus_proposal(40_000, r_in, r_out, rng)
        radii = np.hypot(e.members[:, 0], e.members[:, 1])
        expected = (2.0 / 3.0) * (r_out**3 - r_in**3) / (r_out**2 - r_in**2)
        assert abs(radii.mean() - expected) < 5e-3

    def test_angular_uniformity_chi_square(self):
        rng = np.random.default_rng(7)
        e = annulus_proposal(10_000, 0.5, 1.0, rng)
        angles = np.arctan2(e.members[:, 1], e.members[:, 0])
        counts, _ = np.histogram(angles, bins=20, range=(-math.pi, math.pi))
        expected = len(angles) / 20
        stat = np.sum((counts - expected) ** 2 / expected)
        assert stat < CHI2_99_DOF19

    def test_deterministic_given_seed(self):
        a = annulus_proposal(50, 0.5, 1.0, np.random.default_rng(8))
        b = annulus_proposal(50, 0.5, 1.0, np.random.default_rng(8))
        np.testing.assert_array_equal(a.members, b.members)

    def test_bad_radii_rejected(self):
        with pytest.raises(ValueError):
            annulus_proposal(10, 1.0, 0.5, np.random.default_rng(9))


class TestBimodalTarget:
    def test_single_component_limit(self):
        target = bimodal_target(m1=1.0, s1=0.3, m2=5.0, s2=1.0, p=1.0)
        x = np.linspace(-2, 4, 100)
        expected = np.exp(-0.5 * ((x - 1.0) / 0.3) ** 2) / (0.3 * math.sqrt(2 * math.pi))
        np.testing.assert_allclose(target.pdf(x[:, None]), expected, rtol=1e-12)

    def test_symmetric_mixture_is_even(self):
        target = bimodal_target(m1=-2.0, s1=0.5, m2=2.0, s2=0.5, p=0.5)
        x = np.linspace(0.0, 6.0, 50)
        np.testing.assert_allclose(
            target.pdf(x[:, None]), target.pdf(-x[:, None]), rtol=1e-12
        )

    def test_normalization_by_quadrature(self):
        target = bimodal_target()
        x = np.linspace(-2 - 10 * 0.5, 2 + 10 * 0.5, 40_001)
        integral = np.trapezoid(target.pdf(x[:, None]), x)
        assert abs(integral - 1.0) < 1e-6


class TestAnnulusCoverage:
    def test_coverage_of_proposal_is_total(self):
        rng = np.random.default_rng(10)
        e = annulus_proposal(500, 0.5, 1.0, rng)
        assert annulus_coverage(e, 0.5, 1.0) == 1.0

    def test_resampled_outputs_may_enter_hole(self):
        # Convex combinations of annulus points can fall inside the hole;
        # coverage reports the retained fraction.
        rng = np.random.default_rng(11)
        proposal = annulus_proposal(200, 0.5, 1.0, rng)
        out = ot_sample(proposal, uniform_annulus_target(0.5, 1.0))
        coverage = annulus_coverage(out, 0.5, 1.0)
        assert 0.0 <= coverage <= 1.0


class TestConvergenceInN:
    def test_ks_median_nonincreasing_in_n(self):
        sizes = (100, 200, 500)
        reference = mixture_inverse_cdf_sample(4000, np.random.default_rng(1234))
        medians = []
        for n in sizes:
            stats = []
            for seed in range(20):
                rng = np.random.default_rng(1000 + seed)
                proposal = Ensemble(rng.uniform(-6, 6, size=(n, 1)))
                out = ot_sample(proposal, bimodal_target())
                stats.append(ks_statistic(out.members, reference))
            medians.append(np.median(stats))
        assert medians[0] >= medians[1] >= medians[2]
