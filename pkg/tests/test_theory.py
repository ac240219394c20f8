"""Bound verifiers: Lipschitz constants, concentration, bias certificates."""

import numpy as np
import pytest

from antijam.geometry import GeometryConfig, project, ula
from antijam.model import random_scenario, true_covariance
from antijam import theory

GEOM = GeometryConfig(n_antennas=8, min_spacing=0.5, aperture=8.0)


class TestClosedFormConstants:
    def test_single_jammer_plugin(self):
        from antijam.model import DesiredPaths, JammerSet, ScenarioConfig

        scen = ScenarioConfig(
            wavelength=1.0,
            sigma_s2=0.0,
            sigma_n2=1.0,
            paths=DesiredPaths(angles=np.array([0.0]), gains=np.array([0.0 + 0j])),
            jammers=JammerSet(
                angles=np.array([np.pi / 2]),
                gains=np.array([1.0 + 0j]),
                powers=np.array([1.0]),
            ),
        )
        # 2 * k * sqrt(N) * sum(powers |zeta|^2 |sin phi|) with k = 2pi, N = 4
        assert theory.lipschitz_constant(scen, 4) == pytest.approx(
            2.0 * 2.0 * np.pi * 2.0, rel=1e-12
        )

    def test_gap_constant_positive(self):
        rng = np.random.default_rng(0)
        scen = random_scenario(rng)
        assert theory.gap_constant(scen) > 0.0

    def test_bounds_bundle(self):
        rng = np.random.default_rng(1)
        scen = random_scenario(rng)
        bounds = theory.bounds_for(scen, 8)
        assert bounds.lipschitz_r == pytest.approx(
            theory.lipschitz_constant(scen, 8)
        )
        assert bounds.n_antennas == 8


class TestLipschitzChecks:
    def test_steering_no_violations(self):
        rng = np.random.default_rng(2)
        violations, slack = theory.check_steering_lipschitz(2000, rng)
        assert violations == 0
        assert slack <= 1e-9

    def test_covariance_no_violations(self):
        rng = np.random.default_rng(3)
        violations, slack = theory.check_covariance_lipschitz(2000, rng)
        assert violations == 0

    def test_covariance_bound_not_vacuous(self):
        # the bound should be within a few orders of magnitude of equality
        rng = np.random.default_rng(4)
        scen = random_scenario(rng)
        l_r = theory.lipschitz_constant(scen, 8)
        worst = 0.0
        for _ in range(200):
            x = rng.uniform(0, 8, 8)
            y = rng.uniform(0, 8, 8)
            lhs = theory.spectral_norm(
                true_covariance(x, scen).matrix - true_covariance(y, scen).matrix
            )
            worst = max(worst, lhs / (l_r * np.linalg.norm(x - y)))
        assert worst > 1e-3


class TestConcentration:
    def test_slope_near_half(self):
        rng = np.random.default_rng(5)
        scen = random_scenario(rng)
        t_values = (25, 100, 400, 1600)
        errors = theory.concentration_curve(scen, ula(GEOM), t_values, 100, rng)
        slope = theory.loglog_slope(t_values, errors)
        assert -0.65 <= slope <= -0.35

    def test_errors_decrease(self):
        rng = np.random.default_rng(6)
        scen = random_scenario(rng)
        errors = theory.concentration_curve(
            scen, ula(GEOM), (25, 400), 100, rng
        )
        assert errors[1] < errors[0]


class TestGapProfile:
    def test_monotone_growth(self):
        rng = np.random.default_rng(7)
        scen = random_scenario(rng)
        t_grid = np.arange(0.0, 0.501, 0.05)
        gaps = theory.surrogate_gap_profile(
            scen, ula(GEOM), t_grid, 100, 200, rng
        )
        from scipy.stats import spearmanr

        rho = float(spearmanr(t_grid, gaps).statistic)
        assert rho > 0.9

    def test_zero_at_anchor_is_smallest(self):
        rng = np.random.default_rng(8)
        scen = random_scenario(rng)
        t_grid = np.array([0.0, 0.25, 0.5])
        gaps = theory.surrogate_gap_profile(
            scen, ula(GEOM), t_grid, 100, 100, rng
        )
        assert gaps[0] <= gaps[1] <= gaps[2] * 1.05


class TestInversePerturbation:
    def test_no_violations(self):
        rng = np.random.default_rng(9)
        out = theory.check_inverse_perturbation(2000, rng)
        assert out["lower_violations"] == 0
        assert out["upper_violations"] == 0


class TestBiasCertificate:
    def random_feasible(self, rng):
        return project(rng.uniform(0.0, GEOM.aperture, 8), GEOM)

    def test_margin_holds_exact(self):
        rng = np.random.default_rng(10)
        passes = total = 0
        for _ in range(100):
            scen = random_scenario(rng)
            x_star = self.random_feasible(rng)
            anchors = [self.random_feasible(rng) for _ in range(3)]
            _, p, t = theory.geometric_bias_check(x_star, anchors, scen, rng)
            passes += p
            total += t
        assert passes == total

    def test_certificate_constants(self):
        rng = np.random.default_rng(11)
        scen = random_scenario(rng)
        x_star = self.random_feasible(rng)
        anchors = [self.random_feasible(rng) for _ in range(3)]
        cert, _, _ = theory.geometric_bias_check(x_star, anchors, scen, rng)
        assert cert.mu == pytest.approx(scen.sigma_n2)
        assert cert.a0 > 0
        assert cert.c0 > 0
        assert cert.rho0 == pytest.approx(cert.c0 / (4.0 * cert.c1))
        assert cert.margin == pytest.approx(0.5 * cert.c0)

    def test_identical_anchors_vacuous(self):
        rng = np.random.default_rng(12)
        scen = random_scenario(rng)
        x_star = self.random_feasible(rng)
        with pytest.raises(ValueError):
            theory.geometric_bias_check(x_star, [x_star.copy()] * 3, scen, rng)

    def test_sampled_certificate_mostly_holds(self):
        rng = np.random.default_rng(13)
        passes = total = 0
        for _ in range(30):
            scen = random_scenario(rng)
            x_star = self.random_feasible(rng)
            anchors = [self.random_feasible(rng) for _ in range(3)]
            _, p, t = theory.geometric_bias_check(
                x_star, anchors, scen, rng, n_snapshots=1000
            )
            passes += p
            total += t
        assert passes >= 0.95 * total


class TestErrorComparison:
    def test_averaged_surrogate_worse_near_x_star(self):
        rng = np.random.default_rng(14)
        wins = total = 0
        for _ in range(50):
            scen = random_scenario(rng)
            x_star = project(rng.uniform(0.0, 8.0, 8), GEOM)
            anchors = [project(rng.uniform(0.0, 8.0, 8), GEOM) for _ in range(3)]
            try:
                w, t = theory.surrogate_error_comparison(
                    x_star, anchors, scen, rng
                )
            except ValueError:
                continue
            wins += w
            total += t
        assert total > 0
        assert wins >= 0.95 * total
