"""Synthetic task construction, exact risks and the constrained projection."""

import numpy as np
import pytest
from helpers import eta_grid_projection_oracle

from kernreg.spectrum import build_spec
from kernreg.synth import (
    best_in_ball,
    check_approx_bound,
    default_g,
    draw_sample,
    make_target,
    population_risk_excess,
    sample_from_csv,
    sample_to_csv,
    with_noise,
)


@pytest.fixture(scope="module")
def spec():
    return build_spec(0.5, 201)


class TestMakeTarget:
    def test_sigma_half_unit_vector_in_H(self, spec):
        g = np.zeros(spec.N)
        g[0] = 1.0
        task = make_target(spec, 0.5, g)
        assert task.a[0] == pytest.approx(np.sqrt(spec.eigenvalues[0]))
        assert np.all(task.a[1:] == 0.0)
        # H-norm of f_rho is ||g|| = 1 at sigma = 1/2
        t = task.a / np.sqrt(spec.eigenvalues)
        assert np.linalg.norm(t) == pytest.approx(1.0, abs=1e-14)

    def test_sigma_zero_is_identity(self, spec):
        g = default_g(spec)
        task = make_target(spec, 0.0, g)
        assert np.allclose(task.a, g)

    def test_sigma_one_entrywise_oracle(self, spec):
        rng = np.random.default_rng(2)
        g = rng.standard_normal(spec.N)
        task = make_target(spec, 1.0, g)
        # independent recomputation, elementwise in pure python
        for j in range(0, spec.N, 17):
            assert task.a[j] == pytest.approx(spec.eigenvalues[j] * g[j], rel=1e-15)

    def test_rejects_bad_sigma(self, spec):
        with pytest.raises(ValueError):
            make_target(spec, -0.2, default_g(spec))


class TestDrawSample:
    def test_noiseless_is_exact(self, spec):
        task = with_noise(make_target(spec, 0.5, default_g(spec)), 0.0)
        s = draw_sample(task, 50, 123)
        assert np.allclose(s.ys, task.f_rho(s.xs), atol=0.0)

    def test_determinism(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        s1 = draw_sample(task, 64, 99)
        s2 = draw_sample(task, 64, 99)
        assert np.array_equal(s1.xs, s2.xs) and np.array_equal(s1.ys, s2.ys)

    def test_noise_mean_clt(self, spec):
        # uniform noise on [-b, b]: mean over 1e5 draws within 3 sd of zero
        task = make_target(spec, 0.5, default_g(spec))
        n = 100_000
        s = draw_sample(task, n, 7)
        resid = s.ys - task.f_rho(s.xs)
        assert abs(resid.mean()) <= 3.0 * task.b / np.sqrt(3.0 * n)
        assert np.max(np.abs(resid)) <= task.b


class TestPopulationRisk:
    def test_zero_at_truth(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        assert population_risk_excess(task.a, task) == 0.0

    def test_zero_function(self, spec):
        g = default_g(spec)
        task = make_target(spec, 0.35, g)
        expected = np.sum(spec.eigenvalues ** 0.7 * g**2)
        assert population_risk_excess(np.zeros(spec.N), task) == pytest.approx(expected)

    def test_monte_carlo_oracle(self, spec):
        # E (f - f_rho)^2 estimated by quadrature-free MC within 3 stderr
        rng = np.random.default_rng(31)
        task = make_target(spec, 0.5, default_g(spec))
        c = task.a + 0.05 * rng.standard_normal(spec.N)
        exact = population_risk_excess(c, task)
        xs = rng.uniform(0, 1, 100_000)
        from kernreg.spectrum import basis_matrix

        diff = basis_matrix(spec, xs) @ (c - task.a)
        mc = float(np.mean(diff**2))
        se = float(np.std(diff**2, ddof=1) / np.sqrt(xs.size))
        assert abs(mc - exact) <= 3.0 * se


class TestBestInBall:
    def test_interior_at_sigma_half(self, spec):
        g = default_g(spec)
        task = make_target(spec, 0.5, g)
        r = float(np.linalg.norm(g)) + 0.01
        t, excess = best_in_ball(task, r)
        assert excess == pytest.approx(0.0, abs=1e-20)
        assert np.allclose(t, g, atol=1e-12)

    def test_radius_zero(self, spec):
        task = make_target(spec, 0.4, default_g(spec))
        t, excess = best_in_ball(task, 0.0)
        assert np.all(t == 0.0)
        assert excess == pytest.approx(float(task.a @ task.a))

    def test_grid_oracle(self, spec):
        rng = np.random.default_rng(8)
        g = np.abs(rng.standard_normal(spec.N)) * default_g(spec)
        task = make_target(spec, 0.3, g)
        for r in (0.2, 0.7, 1.9):
            _, excess = best_in_ball(task, r)
            oracle = eta_grid_projection_oracle(spec.eigenvalues, task.a, r)
            assert excess == pytest.approx(oracle, rel=1e-8)

    def test_excess_nonincreasing_and_continuous_in_r(self, spec):
        task = make_target(spec, 0.3, default_g(spec))
        rs = np.linspace(0.0, 3.0, 121)
        ex = np.array([best_in_ball(task, float(r))[1] for r in rs])
        assert np.all(np.diff(ex) <= 1e-12)
        # continuity: no jump exceeds a Lipschitz-style multiple of the step
        jumps = -np.diff(ex)
        assert np.max(jumps) <= 0.2  # coarse continuity guard on a fine grid

    def test_pythagoras_when_interior(self, spec):
        # at eta = 0 (interior optimum), total excess decomposes exactly
        g = default_g(spec)
        task = make_target(spec, 0.5, g)
        r = float(np.linalg.norm(g)) + 1.0
        t_star, ex_star = best_in_ball(task, r)
        rng = np.random.default_rng(4)
        t = t_star + 0.01 * rng.standard_normal(spec.N)
        c = np.sqrt(spec.eigenvalues) * t
        lhs = population_risk_excess(c, task)
        within = np.sum((np.sqrt(spec.eigenvalues) * (t - t_star)) ** 2)
        assert lhs == pytest.approx(within + ex_star, abs=1e-10)

    def test_constrained_dominates_projection(self, spec):
        # at eta > 0 any feasible point has at least the projected excess
        task = make_target(spec, 0.3, default_g(spec))
        r = 0.5
        t_star, ex_star = best_in_ball(task, r)
        assert np.linalg.norm(t_star) == pytest.approx(r, rel=1e-9)
        rng = np.random.default_rng(9)
        for _ in range(25):
            t = rng.standard_normal(spec.N)
            t *= r * rng.uniform() ** 0.5 / np.linalg.norm(t)
            c = np.sqrt(spec.eigenvalues) * t
            assert population_risk_excess(c, task) >= ex_star - 1e-12


class TestApproxBound:
    def test_zero_target(self, spec):
        task = make_target(spec, 0.25, np.zeros(spec.N))
        exact, bound = check_approx_bound(task, 4.0)
        assert exact == 0.0 and bound == 0.0

    def test_exact_decreases_with_r(self, spec):
        task = make_target(spec, 0.25, default_g(spec))
        vals = [check_approx_bound(task, float(r))[0] for r in (1, 2, 4, 8, 16)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_bound_holds_on_doubling_grid(self, spec):
        # the operation's own dyadic example task
        g = spec.eigenvalues ** 0.1
        task = make_target(spec, 0.25, g)
        for r in [2**k for k in range(9)]:
            exact, bound = check_approx_bound(task, float(r))
            assert exact <= bound * (1.0 + 1e-12)

    def test_rejects_sigma_out_of_range(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        with pytest.raises(ValueError, match="sigma"):
            check_approx_bound(task, 2.0)


class TestSampleCsv:
    def test_roundtrip_exact(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        s = draw_sample(task, 40, 5)
        restored = sample_from_csv(sample_to_csv(s))
        assert np.array_equal(restored.xs, s.xs)
        assert np.array_equal(restored.ys, s.ys)

    def test_header_enforced(self):
        with pytest.raises(ValueError, match="header"):
            sample_from_csv("a,b\n1,2\n")

    def test_line_endings(self, spec):
        task = make_target(spec, 0.5, default_g(spec))
        text = sample_to_csv(draw_sample(task, 3, 1))
        assert "\r" not in text and text.endswith("\n")
