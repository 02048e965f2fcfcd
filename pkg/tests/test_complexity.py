"""Ellipsoid geometry, Monte-Carlo complexity estimates and inclusion checks."""

import math

import numpy as np
import pytest

from kernreg.complexity import (
    MCConfig,
    SamplingStarvationError,
    dual_sudakov_bound,
    dudley_gamma2_bound,
    ellipsoid_axes,
    ellipsoid_support,
    exact_intersection_support,
    gaussian_sup_norm,
    isomorphism_mc,
    isomorphism_worst_multipliers,
    low_excess_inclusion,
    sup_ratio_floor,
    localized_gaussian_complexity,
)
from kernreg.regfunc import sum_min
from kernreg.spectrum import build_spec
from kernreg.synth import default_g, draw_sample, make_target, with_noise

SQRT_2_OVER_PI = 0.797884560802865356  # E|N(0,1)|, frozen from mpmath


@pytest.fixture(scope="module")
def spec():
    return build_spec(0.5, 201)


class TestEllipsoidAxes:
    def test_zero_localization(self, spec):
        assert np.all(ellipsoid_axes(0.0, 2.0, spec).axes == 0.0)

    def test_pure_ball_regime(self, spec):
        x = 2.0 * spec.eigenvalues[0]  # x >= r^2 lam_1 at r = 1
        assert np.all(ellipsoid_axes(x, 1.0, spec).axes == 1.0)

    def test_hand_values(self):
        spec2 = build_spec(0.5, 3)
        lam = spec2.eigenvalues.copy()
        object.__setattr__(spec2, "eigenvalues", np.array([4.0, 1.0, 1.0]))
        ell = ellipsoid_axes(1.0, 1.0, spec2)
        assert ell.axes[0] == pytest.approx(0.5)
        assert ell.axes[1] == 1.0
        object.__setattr__(spec2, "eigenvalues", lam)

    def test_monotone_in_x_and_r(self, spec):
        a1 = ellipsoid_axes(0.01, 1.0, spec).axes
        a2 = ellipsoid_axes(0.02, 1.0, spec).axes
        a3 = ellipsoid_axes(0.01, 2.0, spec).axes
        assert np.all(a2 >= a1) and np.all(a3 >= a1)
        assert np.all(a1 <= 1.0)


class TestEllipsoidSupport:
    def test_zero_vector(self, spec):
        ell = ellipsoid_axes(0.5, 1.0, spec)
        assert ellipsoid_support(ell, np.zeros(spec.N)) == 0.0

    def test_pure_ball_is_euclidean(self, spec):
        x = 2.0 * spec.eigenvalues[0]
        ell = ellipsoid_axes(x, 1.0, spec)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(spec.N)
        assert ellipsoid_support(ell, v) == pytest.approx(np.linalg.norm(v))

    def test_homogeneous_and_subadditive(self, spec):
        ell = ellipsoid_axes(0.01, 1.5, spec)
        rng = np.random.default_rng(1)
        for _ in range(50):
            v, w = rng.standard_normal((2, spec.N))
            s = rng.uniform(-3, 3)
            assert ellipsoid_support(ell, s * v) == pytest.approx(
                abs(s) * ellipsoid_support(ell, v), rel=1e-12
            )
            assert ellipsoid_support(ell, v + w) <= ellipsoid_support(
                ell, v
            ) + ellipsoid_support(ell, w) + 1e-12

    def test_sandwich_against_exact_support(self, spec):
        # E subset K subset sqrt(2) E, so support <= exact <= sqrt(2) support;
        # in particular half the exact support never exceeds the surrogate
        rng = np.random.default_rng(2)
        ell = ellipsoid_axes(0.03, 1.0, spec)
        for _ in range(40):
            v = rng.standard_normal(spec.N)
            sup = ellipsoid_support(ell, v)
            exact = exact_intersection_support(0.03, 1.0, spec, v)
            assert sup <= exact * (1.0 + 1e-9)
            assert exact <= math.sqrt(2.0) * sup * (1.0 + 1e-9)
            assert 0.5 * exact <= sup * (1.0 + 1e-9)

    def test_exact_support_matches_pure_cases(self, spec):
        rng = np.random.default_rng(3)
        v = rng.standard_normal(spec.N)
        # huge r: constraint is the population ellipsoid alone
        exact = exact_intersection_support(0.04, 1e9, spec, v)
        pure = math.sqrt(float(np.sum(v**2 * 0.04 / spec.eigenvalues)))
        assert exact == pytest.approx(pure, rel=1e-6)


class TestLocalizedGaussianComplexity:
    def test_zero_level(self, spec):
        est, se = localized_gaussian_complexity(spec, 8, 0.0, 1.0, MCConfig(100, 1))
        assert est == 0.0 and se == 0.0

    def test_monotone_under_common_randomness(self, spec):
        mc = MCConfig(200, 42)
        e1, _ = localized_gaussian_complexity(spec, 32, 0.01, 1.0, mc)
        e2, _ = localized_gaussian_complexity(spec, 32, 0.05, 1.0, mc)
        e3, _ = localized_gaussian_complexity(spec, 32, 0.01, 2.0, mc)
        assert e2 >= e1 and e3 >= e1

    def test_exact_homogeneity_with_shared_seeds(self, spec):
        # estimate at (x r^2, r) equals r times estimate at (x, 1) draw by draw
        mc = MCConfig(150, 7)
        r = 3.0
        e1, _ = localized_gaussian_complexity(spec, 16, 0.02, 1.0, mc)
        e2, _ = localized_gaussian_complexity(spec, 16, 0.02 * r * r, r, mc)
        assert e2 == pytest.approx(r * e1, rel=1e-12)

    def test_scaling_against_sum_min_bound(self, spec):
        ratios = []
        for n in (64, 256, 1024):
            mc = MCConfig(400, 1000 + n)
            for x in (1e-3, 1e-1):
                est, _ = localized_gaussian_complexity(spec, n, x, 1.0, mc)
                ratios.append(est / math.sqrt(sum_min(x, 1.0, spec.eigenvalues) / n))
        assert max(ratios) / min(ratios) <= 3.0


class TestDualSudakov:
    def test_degenerate_images(self, spec):
        xs = np.linspace(0.1, 0.9, 5)
        # x = 0 collapses every axis, so all mapped points vanish
        assert dual_sudakov_bound(spec, xs, 0.0, 1.0, 0.5, MCConfig(100, 3)) == 0.0

    def test_single_point_half_normal_oracle(self, spec):
        xs = np.array([0.37])
        mean, se, wmax = gaussian_sup_norm(spec, xs, 0.02, 1.0, MCConfig(4000, 5))
        assert mean == pytest.approx(SQRT_2_OVER_PI * wmax, abs=4 * se)

    def test_sqrt_log_n_drift(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        c2s = []
        for k in (4, 6, 8, 10, 12):
            n = 2**k
            s = draw_sample(task, n, 900 + k)
            mean, _, wmax = gaussian_sup_norm(spec, s.xs, 0.01, 1.0, MCConfig(800, k))
            c2s.append(mean / (math.sqrt(math.log(n)) * wmax))
        assert max(c2s) / min(c2s) <= 2.0


class TestDudley:
    def test_zero_level(self, spec):
        xs = np.linspace(0.1, 0.9, 8)
        assert dudley_gamma2_bound(spec, xs, 0.0, 1.0, MCConfig(100, 1)) == 0.0

    def test_small_scale_closed_form(self):
        # int_0^{e0} n e ln(e0/e) de = n e0^2 / 4, cross-checked by quadrature
        from scipy.integrate import quad

        n, e0 = 37.0, 0.83
        val, _ = quad(lambda e: n * e * math.log(e0 / e), 0.0, e0)
        assert val == pytest.approx(n * e0**2 / 4.0, rel=1e-9)

    def test_ratio_bounded_over_sweep(self, spec):
        from kernreg.experiments import fit_loglog_slope
        from kernreg.regfunc import localized_width

        task = make_target(spec, 0.5, default_g(spec))
        ns = (2**6, 2**8, 2**10, 2**12)
        over_q, over_qlog = [], []
        for n in ns:
            s = draw_sample(task, n, 700 + n)
            bound = dudley_gamma2_bound(spec, s.xs, 0.01, 1.0, MCConfig(800, 70 + n))
            Q = localized_width(0.01, 1.0, spec)
            over_q.append(bound / Q)
            over_qlog.append(bound / (Q * math.log(n)))
        assert max(over_qlog) <= 5.0
        # pre-square-root form grows between the linear and squared log rates
        sq_exponent, _, _ = fit_loglog_slope(
            np.log(np.asarray(ns, dtype=float)), np.asarray(over_q) ** 2
        )
        assert 1.0 <= sq_exponent <= 2.0


class TestIsomorphism:
    def test_realizable_noiseless_never_fails(self, spec):
        g = default_g(spec)
        task = with_noise(make_target(spec, 0.5, g), 0.0)
        r = float(np.linalg.norm(g)) + 1.0
        rate = isomorphism_mc(task, r, 128, 100, seed=5, u=1.0)
        assert rate == 0.0

    def test_calibrated_failure_rate(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        calib = isomorphism_worst_multipliers(task, 2.0, 256, 40, seed=11, u=1.0)
        scale = max(1.0, 1.2 * float(calib.max()))
        rate = isomorphism_mc(task, 2.0, 256, 100, seed=13, u=1.0, budget_scale=scale)
        assert rate <= 0.05

    def test_requires_enough_trials(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        with pytest.raises(ValueError, match="100"):
            isomorphism_mc(task, 2.0, 64, 10, seed=1)


class TestLowExcessInclusion:
    def test_inclusion_holds(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        x = task.l2_norm_sq()
        worst = low_excess_inclusion(task, 2.0, x, 2000, seed=3)
        assert 0.0 < worst <= 1.0

    def test_tiny_budget_starves(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        with pytest.raises(SamplingStarvationError):
            low_excess_inclusion(task, 2.0, 1e-12, 500, seed=4, max_proposals=20_000)


class TestSupRatioFloor:
    def test_min_ratio_positive_and_stable(self, spec):
        r1 = sup_ratio_floor(spec, 300, seed=21)
        spec2 = build_spec(0.5, 401)
        r2 = sup_ratio_floor(spec2, 300, seed=21)
        assert r1 > 0.0 and r2 > 0.0
        assert max(r1, r2) / min(r1, r2) <= 2.0

    def test_scale_invariance_of_ratio(self, spec):
        # the ratio functional is 0-homogeneous: doubling f leaves it fixed
        rng = np.random.default_rng(9)
        t = rng.standard_normal(spec.N)
        from kernreg.spectrum import basis_matrix

        grid = (np.arange(4001) + 0.5) / 4001
        p = spec.p
        out = []
        for s in (1.0, 2.0):
            c = np.sqrt(spec.eigenvalues) * t * s
            ef2 = float(c @ c)
            sup = float(np.max(np.abs(basis_matrix(spec, grid) @ c)))
            hn = float(np.linalg.norm(t) * s)
            out.append(ef2 * (hn**p / sup) ** (2.0 / (1.0 - p)))
        assert out[0] == pytest.approx(out[1], rel=1e-10)

    def test_constant_function_case(self):
        spec1 = build_spec(0.5, 1)
        val = sup_ratio_floor(spec1, 100, seed=2)
        # f = const c: Ef^2 = c^2, sup = |c|, ratio = c^2 (h^p/|c|)^{2/(1-p)} > 0
        assert val > 0.0


class TestMCConfig:
    def test_minimum_draws(self):
        with pytest.raises(ValueError, match="100"):
            MCConfig(draws=10)
