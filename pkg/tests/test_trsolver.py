"""Trust-region machinery: subproblem solver, step control, and the driver."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antijam.geometry import GeometryConfig, is_feasible, project, ula
from antijam.model import generate_snapshots, random_scenario, sample_covariance
from antijam.objective import SurrogateContext, surrogate_value
from antijam.trsolver import (
    BlockResult,
    TrustRegionConfig,
    cauchy_gain,
    evaluate_step,
    maximize_surrogate,
    ptrso,
    run_block,
    steihaug_cg,
    update_radius,
)
from oracles import exact_tr_maximize, model_value

GEOM = GeometryConfig(n_antennas=8, min_spacing=0.5, aperture=8.0)


def random_instance(rng, n=4, definite=None):
    g = rng.normal(0.0, 1.0, n)
    q = np.linalg.qr(rng.normal(0.0, 1.0, (n, n)))[0]
    eig = rng.uniform(-2.0, 2.0, n)
    if definite == "neg":
        eig = -np.abs(eig) - 0.1
    h = q @ np.diag(eig) @ q.T
    return g, h


class TestSteihaug:
    def test_zero_gradient_stationary(self):
        p, reason, iters = steihaug_cg(
            np.zeros(4), lambda v: v, 1.0, 1e-8, 8
        )
        np.testing.assert_allclose(p, np.zeros(4))
        assert reason == "stationary"

    def test_newton_step_interior(self):
        # maximize g.p - .5 p.p  ->  p = g when inside the radius
        g = np.array([0.3, -0.2, 0.1, 0.0])
        p, reason, _ = steihaug_cg(g, lambda v: -v, 10.0, 1e-12, 8)
        np.testing.assert_allclose(p, g, atol=1e-10)
        assert reason == "converged"

    def test_boundary_when_radius_binds(self):
        g = np.array([1.0, 0.0])
        p, reason, _ = steihaug_cg(g, lambda v: -v, 0.25, 1e-12, 4)
        assert np.linalg.norm(p) == pytest.approx(0.25, rel=1e-9)
        assert reason in ("boundary", "negative_curvature")

    def test_positive_curvature_pushes_to_boundary(self):
        # ascent on a convex bowl: the best model point sits on the sphere
        g = np.array([1.0, 0.5])
        p, reason, _ = steihaug_cg(g, lambda v: v, 1.0, 1e-12, 4)
        assert np.linalg.norm(p) == pytest.approx(1.0, rel=1e-9)
        assert reason == "negative_curvature"

    def test_model_gain_at_least_cauchy(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n = int(rng.integers(2, 9))
            g, h = random_instance(rng, n)
            radius = rng.uniform(0.05, 2.0)
            p, _, _ = steihaug_cg(g, lambda v: h @ v, radius)
            gain = model_value(g, h, p)
            ref = cauchy_gain(g, lambda v: h @ v, radius)
            assert gain >= ref - 1e-10 * max(1.0, abs(ref))

    def test_within_one_percent_of_exact_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            g, h = random_instance(rng, 4)
            radius = rng.uniform(0.05, 2.0)
            p, _, _ = steihaug_cg(g, lambda v: h @ v, radius)
            gain = model_value(g, h, p)
            p_star = exact_tr_maximize(g, h, radius)
            best = model_value(g, h, p_star)
            assert gain >= best - 0.01 * abs(best) - 1e-12

    def test_respects_radius(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            g, h = random_instance(rng, 5)
            radius = rng.uniform(0.05, 2.0)
            p, _, _ = steihaug_cg(g, lambda v: h @ v, radius)
            assert np.linalg.norm(p) <= radius * (1.0 + 1e-9)

    def test_max_iter_cap(self):
        rng = np.random.default_rng(3)
        g, h = random_instance(rng, 8)
        _, reason, iters = steihaug_cg(g, lambda v: h @ v, 1.0, 1e-16, 2)
        assert iters <= 2


class TestRadiusUpdate:
    CFG = TrustRegionConfig(radius0=1.0, radius_max=4.0)

    def test_shrink_on_poor_agreement(self):
        assert update_radius(1.0, 0.1, 1.0, self.CFG) == 0.25

    def test_grow_on_good_full_step(self):
        assert update_radius(1.0, 0.9, 1.0, self.CFG) == 2.0

    def test_growth_capped(self):
        assert update_radius(4.0, 0.9, 4.0, self.CFG) == 4.0

    def test_hold_on_interior_step(self):
        assert update_radius(1.0, 0.9, 0.3, self.CFG) == 1.0

    def test_hold_on_middling_rho(self):
        assert update_radius(1.0, 0.5, 1.0, self.CFG) == 1.0


class TestStepEvaluation:
    def test_rho_one_on_exact_quadratic(self):
        from antijam.trsolver import _evaluate_step

        g = np.array([1.0, -0.5])
        h = -np.eye(2)

        class Point:
            value = 0.0
            grad = g

            @staticmethod
            def hvp(v):
                return h @ v

        def value_fn(x):
            return g @ x + 0.5 * x @ h @ x

        ev = _evaluate_step(value_fn, np.zeros(2), np.array([0.3, 0.1]), Point)
        assert ev.ok
        assert ev.rho == pytest.approx(1.0, rel=1e-10)

    def test_nonpositive_predicted_gain_rejected(self):
        from antijam.trsolver import _evaluate_step

        g = np.zeros(2)

        class Point:
            value = 0.0
            grad = g

            @staticmethod
            def hvp(v):
                return -v

        ev = _evaluate_step(lambda x: 0.0, np.zeros(2), np.array([0.5, 0.0]), Point)
        assert not ev.ok
        assert ev.rho is None

    def test_public_wrapper_on_real_surrogate(self):
        rng = np.random.default_rng(42)
        ctx, _ = make_context(rng)
        x0 = ula(GEOM)
        d = np.full(8, 0.01)
        ev = evaluate_step(x0, d, ctx)
        assert ev.ared == pytest.approx(
            surrogate_value(x0 + d, ctx) - surrogate_value(x0, ctx), rel=1e-10
        )


def make_context(rng, snapshots=100):
    scen = random_scenario(rng)
    x0 = ula(GEOM)
    block = generate_snapshots(x0, scen, snapshots, rng)
    return (
        SurrogateContext(
            anchor=x0,
            cov=sample_covariance(block),
            paths=scen.paths,
            wavenumber=scen.wavenumber,
        ),
        scen,
    )


class TestDriver:
    def test_monotone_feasible_ascent(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            ctx, _ = make_context(rng)
            cfg = TrustRegionConfig.for_geometry(GEOM)
            x, state = ptrso(ula(GEOM), ctx, GEOM, cfg)
            assert is_feasible(x, GEOM)
            hist = state.value_history
            assert all(b > a for a, b in zip(hist, hist[1:]))
            assert surrogate_value(x, ctx) >= surrogate_value(ula(GEOM), ctx)

    def test_terminates_within_cap(self):
        rng = np.random.default_rng(5)
        ctx, _ = make_context(rng)
        cfg = TrustRegionConfig.for_geometry(GEOM)
        _, state = ptrso(ula(GEOM), ctx, GEOM, cfg)
        assert state.n_iters <= cfg.max_iters
        assert state.stop_reason in ("gradient", "step", "radius", "max_iterations")

    def test_infeasible_start_rejected(self):
        rng = np.random.default_rng(6)
        ctx, _ = make_context(rng)
        cfg = TrustRegionConfig.for_geometry(GEOM)
        bad = np.zeros(8)
        with pytest.raises(ValueError):
            ptrso(bad, ctx, GEOM, cfg)

    def test_concave_quadratic_reaches_optimum(self):
        # synthetic strictly concave objective with interior optimum
        target = np.array([0.7, 1.9, 3.1, 4.3])
        geom = GeometryConfig(n_antennas=4, min_spacing=0.5, aperture=8.0)

        class Point:
            def __init__(self, x):
                self.value = -0.5 * float((x - target) @ (x - target))
                self.grad = -(x - target)

            @staticmethod
            def hvp(v):
                return -v

        x, state = maximize_surrogate(
            Point,
            lambda x: -0.5 * float((x - target) @ (x - target)),
            ula(geom),
            geom,
            TrustRegionConfig.for_geometry(geom),
        )
        np.testing.assert_allclose(x, target, atol=1e-4)

    def test_radius_never_exceeds_cap(self):
        rng = np.random.default_rng(7)
        ctx, _ = make_context(rng)
        cfg = TrustRegionConfig.for_geometry(GEOM)
        _, state = ptrso(ula(GEOM), ctx, GEOM, cfg)
        assert all(rec.radius <= cfg.radius_max + 1e-12 for rec in state.trace)

    def test_trace_schema(self):
        rng = np.random.default_rng(8)
        ctx, _ = make_context(rng)
        cfg = TrustRegionConfig.for_geometry(GEOM)
        _, state = ptrso(ula(GEOM), ctx, GEOM, cfg)
        rec = state.trace[0]
        assert rec.k == 0
        assert rec.cg_iters >= 1
        assert rec.step_norm >= 0.0


class TestRunBlock:
    def test_contract(self):
        rng = np.random.default_rng(9)
        scen = random_scenario(rng)
        cfg = TrustRegionConfig.for_geometry(GEOM)
        res = run_block(ula(GEOM), scen, 100, GEOM, cfg, rng)
        assert isinstance(res, BlockResult)
        np.testing.assert_allclose(res.anchor, ula(GEOM))
        assert is_feasible(res.next_anchor, GEOM)
        # optimized anchor improves the block's surrogate
        assert surrogate_value(res.next_anchor, res.context) >= surrogate_value(
            ula(GEOM), res.context
        )

    def test_chaining_blocks_keeps_feasibility(self):
        rng = np.random.default_rng(10)
        scen = random_scenario(rng)
        cfg = TrustRegionConfig.for_geometry(GEOM)
        anchor = ula(GEOM)
        for b in range(5):
            res = run_block(anchor, scen, 100, GEOM, cfg, rng, block_index=b)
            anchor = res.next_anchor
            assert is_feasible(anchor, GEOM)


class TestConfig:
    def test_rejects_bad_radii(self):
        with pytest.raises(ValueError):
            TrustRegionConfig(radius0=3.0, radius_max=2.0)

    def test_rejects_bad_thresholds(self):
        with pytest.raises(ValueError):
            TrustRegionConfig(eta1=0.9, eta2=0.75)

    def test_geometry_defaults(self):
        cfg = TrustRegionConfig.for_geometry(GEOM, wavelength=1.0)
        assert cfg.radius0 == pytest.approx(0.25)
        assert cfg.radius_max == pytest.approx(2.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_steihaug_gain_dominates_cauchy_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    g = rng.normal(0.0, 1.0, n)
    h = rng.normal(0.0, 1.0, (n, n))
    h = 0.5 * (h + h.T)
    radius = float(rng.uniform(0.05, 2.0))
    p, _, _ = steihaug_cg(g, lambda v: h @ v, radius)
    assert np.linalg.norm(p) <= radius * (1.0 + 1e-9)
    gain = model_value(g, h, p)
    ref = cauchy_gain(g, lambda v: h @ v, radius)
    assert gain >= ref - 1e-10 * max(1.0, abs(ref))
