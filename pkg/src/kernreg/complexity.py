"""Localized complexity geometry, Monte-Carlo checked.

Numerically realizes the intersection-ellipsoid picture behind the
localization argument: localized Gaussian complexities, the dual-Sudakov
covering estimate, the two-regime entropy integral, the two-sided
empirical/population loss inequality, and the inclusion and sup-ratio
checks.  Monte-Carlo estimates always report standard errors, and every
trial derives its generator from a root seed and the trial index so that
parallel and serial schedules agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .regfunc import Constants, localized_width, localization_threshold
from .seeding import rng_for, seed_u64
from .solver import frontier_for_sample
from .spectrum import EigenSpec, basis_matrix, feature_matrix
from .synth import RegressionTask, best_in_ball, draw_sample, population_risk_excess

SUP_GRID = 20_000


class SamplingStarvationError(RuntimeError):
    """Rejection sampler exhausted its proposal budget."""


@dataclass(frozen=True)
class MCConfig:
    draws: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.draws < 100:
            raise ValueError("Monte Carlo needs at least 100 draws")


@dataclass(frozen=True)
class IntersectionEllipsoid:
    """Axis lengths min(sqrt(x/lam_i), r) of the ball-cap ellipsoid."""

    axes: np.ndarray
    x: float
    r: float


def ellipsoid_axes(x: float, r: float, spec: EigenSpec) -> IntersectionEllipsoid:
    if x < 0.0 or r < 0.0:
        raise ValueError("x and r must be nonnegative")
    lam = spec.eigenvalues
    with np.errstate(divide="ignore"):
        ratio = np.where(lam > 0.0, np.sqrt(np.divide(x, lam, where=lam > 0.0)), np.inf)
    return IntersectionEllipsoid(axes=np.minimum(ratio, r), x=x, r=r)


def ellipsoid_support(ell: IntersectionEllipsoid, v) -> float:
    """Support function (sum theta_i^2 v_i^2)^{1/2} of the axis ellipsoid."""
    v = np.asarray(v, dtype=float)
    if v.size != ell.axes.size:
        raise ValueError("vector dimension must match the ellipsoid")
    return float(np.sqrt(np.sum((ell.axes * v) ** 2)))


def exact_intersection_support(
    x: float, r: float, spec: EigenSpec, v, tol: float = 1e-12
) -> float:
    """Support of rB_2 intersected with the sqrt(x) population ellipsoid.

    Strong duality for two centered quadratic constraints gives
    h(v) = min_{s in [0,1]} (sum v_i^2 / (s/r^2 + (1-s) lam_i / x))^{1/2};
    the inner function is convex in s, minimized by golden section.  Test
    oracle only; the pipeline uses the axis ellipsoid surrogate.
    """
    v = np.asarray(v, dtype=float)
    if x <= 0.0 or r <= 0.0:
        return 0.0
    lam = spec.eigenvalues

    def val(s: float) -> float:
        denom = s / (r * r) + (1.0 - s) * lam / x
        with np.errstate(divide="ignore"):
            terms = np.where(denom > 0.0, v**2 / np.where(denom > 0.0, denom, 1.0), np.inf)
        if np.any(np.isinf(terms) & (v != 0.0)):
            return math.inf
        return float(np.sum(terms[v != 0.0])) if np.any(v != 0.0) else 0.0

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = val(c), val(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = val(d)
    return math.sqrt(min(fc, fd))


def _gaussian_images(spec: EigenSpec, n: int, mc: MCConfig) -> np.ndarray:
    """(draws, N) matrix of v with v_j = sum_i g_i sqrt(lam_j) phi_j(X_i).

    The draw layout (X block then g block, in fixed chunks) is part of the
    common-random-numbers contract: calls with equal (n, seed) see identical
    draws regardless of (x, r).
    """
    rng = np.random.default_rng(np.random.SeedSequence(mc.seed))
    N = spec.N
    V = np.empty((mc.draws, N))
    chunk = max(1, int(1.5e7 / (n * N)))
    done = 0
    while done < mc.draws:
        m = min(chunk, mc.draws - done)
        X = rng.uniform(0.0, 1.0, (m, n))
        G = rng.standard_normal((m, n))
        B = feature_matrix(spec, X.ravel()).reshape(m, n, N)
        V[done : done + m] = np.einsum("mn,mnj->mj", G, B)
        done += m
    return V


def localized_gaussian_sweep(
    spec: EigenSpec, n: int, levels, r: float, mc: MCConfig
) -> list[tuple[float, float]]:
    """The complexity estimate at several localization levels, sharing draws.

    One set of (X, g) draws serves every level, so monotonicity in the
    localization holds pointwise per draw and a level sweep costs one
    simulation instead of len(levels).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    V = _gaussian_images(spec, n, mc)
    out = []
    for x in levels:
        ell = ellipsoid_axes(float(x), r, spec)
        sups = np.sqrt(np.sum((ell.axes[None, :] * V) ** 2, axis=1))
        out.append(
            (float(sups.mean() / n), float(sups.std(ddof=1) / math.sqrt(mc.draws) / n))
        )
    return out


def localized_gaussian_complexity(
    spec: EigenSpec, n: int, x: float, r: float, mc: MCConfig
) -> tuple[float, float]:
    """MC estimate of E sup over rB_2 cap sqrt(x)D of the Gaussian image, /n.

    Returns (estimate, stderr).  Identical seeds share draws across (x, r),
    so monotonicity in the localization holds pointwise per draw.
    """
    return localized_gaussian_sweep(spec, n, [x], r, mc)[0]


def gaussian_sup_norm(
    spec: EigenSpec, xs, x: float, r: float, mc: MCConfig
) -> tuple[float, float, float]:
    """E max_i |<G, T Phi(X_i)>| by MC; returns (mean, stderr, max_i ||T Phi(X_i)||)."""
    W = feature_matrix(spec, xs) * ellipsoid_axes(x, r, spec).axes[None, :]
    wmax = float(np.max(np.linalg.norm(W, axis=1)))
    rng = np.random.default_rng(np.random.SeedSequence(mc.seed))
    vals = np.empty(mc.draws)
    chunk = max(1, int(2e7 / max(W.shape[0], 1)))
    done = 0
    while done < mc.draws:
        m = min(chunk, mc.draws - done)
        G = rng.standard_normal((m, spec.N))
        vals[done : done + m] = np.abs(G @ W.T).max(axis=1)
        done += m
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc.draws)), wmax


def dual_sudakov_bound(
    spec: EigenSpec, xs, x: float, r: float, eps: float, mc: MCConfig
) -> float:
    """Covering-number exponent estimate (E||G||_E / eps)^2."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    mean, _, _ = gaussian_sup_norm(spec, xs, x, r, mc)
    return (mean / eps) ** 2


def dudley_gamma2_bound(
    spec: EigenSpec,
    xs,
    x: float,
    r: float,
    mc: MCConfig,
    c4: float = 1.0,
) -> float:
    """Two-regime entropy-integral bound on the chaining functional.

    Small scales use the volumetric estimate (closed form n eps0^2 / 4);
    large scales use the dual-Sudakov exponent, integrating to
    (E||G||)^2 ln(D2/eps0) up to the exact max-norm diameter D2.
    """
    if x == 0.0:
        return 0.0
    n = len(np.asarray(xs))
    Q = localized_width(x, r, spec)
    eps0 = c4 * Q * math.sqrt(math.log(n) / n)
    mean, _, wmax = gaussian_sup_norm(spec, xs, x, r, mc)
    D2 = 2.0 * wmax
    small = n * eps0**2 / 4.0
    big = mean**2 * math.log(D2 / eps0) if D2 > eps0 else 0.0
    return math.sqrt(small + max(big, 0.0))


# --- two-sided inequality Monte Carlo ----------------------------------------


def _iso_b_bound(task: RegressionTask, r: float) -> float:
    """Uniform bound max(sup ||f||_inf over the ball, ||Y||_inf)."""
    grid = (np.arange(2001) + 0.5) / 2001.0
    y_inf = float(np.max(np.abs(task.f_rho(grid)))) + task.b
    return max(r, y_inf)


def isomorphism_worst_multipliers(
    task: RegressionTask,
    r: float,
    n: int,
    trials: int,
    seed: int,
    constants: Constants = Constants(),
    u: float = 1.0,
) -> np.ndarray:
    """Per-trial worst violation of the two-sided inequality, in budget units.

    For each trial, every ridge-frontier function with h <= r is tested
    against 1/2 P_n L - budget <= P L <= 2 P_n L + budget at the localization
    threshold; the return value is the factor by which the budget would have
    to be inflated to absorb the worst violator (0 when none).
    """
    spec = task.spec
    x = localization_threshold(r, n, spec, constants.c_threshold)
    b = _iso_b_bound(task, r)
    budget = x / 2.0 + constants.c_iso * (1.0 + b * b) * u / n
    t_star, el_star = best_in_ball(task, r)
    c_star = np.sqrt(spec.eigenvalues) * t_star
    worsts = np.empty(trials)
    for k in range(trials):
        sample = draw_sample(task, n, seed_u64(seed, "iso", k))
        frontier = frontier_for_sample(spec, sample, h_cap=r)
        path = frontier.path
        star_vals = basis_matrix(spec, sample.xs) @ c_star
        loss_star = float(np.mean((star_vals - sample.ys) ** 2))
        worst = 0.0
        for eta, loss in zip(frontier.etas, frontier.losses):
            c = np.sqrt(spec.eigenvalues) * path.t(float(eta))
            pl = population_risk_excess(c, task) - el_star
            pnl = loss - loss_star
            violation = max(pl - (2.0 * pnl + budget), (0.5 * pnl - budget) - pl, 0.0)
            worst = max(worst, violation / budget)
        worsts[k] = worst
    return worsts


def isomorphism_mc(
    task: RegressionTask,
    r: float,
    n: int,
    trials: int,
    seed: int,
    constants: Constants = Constants(),
    u: float = 1.0,
    budget_scale: float = 1.0,
) -> float:
    """Fraction of trials in which some frontier function breaks the inequality."""
    if trials < 100:
        raise ValueError("isomorphism check needs at least 100 trials")
    worsts = isomorphism_worst_multipliers(task, r, n, trials, seed, constants, u)
    return float(np.mean(worsts > budget_scale))


# --- inclusion and sup-ratio checks ------------------------------------------


def low_excess_inclusion(
    task: RegressionTask,
    r: float,
    x: float,
    samples: int,
    seed: int = 0,
    max_proposals: int = 1_000_000,
) -> float:
    """Worst inclusion ratio over random low-excess ball points.

    Samples t with ||t|| <= r and excess loss at most x (rejection via the
    exact population formulas), then checks ||t - t*|| <= 2r and
    sum lam_i (t - t*)_i^2 <= 4x.  Returns the largest of the two ratios
    observed; the inclusion holds iff it stays <= 1.
    """
    if x <= 0.0:
        raise ValueError("x must be positive")
    spec = task.spec
    lam = spec.eigenvalues
    sqlam = np.sqrt(lam)
    t_star, el_star = best_in_ball(task, r)
    rng = rng_for(seed, "inclusion")
    accepted = 0
    proposals = 0
    worst = 0.0
    while accepted < samples:
        if proposals >= max_proposals:
            raise SamplingStarvationError(
                f"accepted only {accepted}/{samples} after {proposals} proposals"
            )
        m = min(4096, samples * 4)
        proposals += m
        dirs = rng.standard_normal((m, spec.N))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = r * rng.uniform(0.0, 1.0, m) ** (1.0 / spec.N)
        cand = dirs * radii[:, None]
        # half the block is pulled toward t* to populate the low-excess region
        half = m // 2
        blend = rng.uniform(0.0, 1.0, half)[:, None]
        cand[:half] = blend * t_star[None, :] + (1.0 - blend) * cand[:half]
        norms = np.linalg.norm(cand, axis=1)
        excess = np.sum((cand * sqlam[None, :] - task.a[None, :]) ** 2, axis=1)
        ok = (norms <= r) & (excess - el_star <= x)
        if not np.any(ok):
            continue
        good = cand[ok]
        take = good[: samples - accepted]
        accepted += take.shape[0]
        diff = take - t_star[None, :]
        ratio_ball = np.linalg.norm(diff, axis=1) / (2.0 * r)
        ratio_d = np.sqrt(np.sum(lam[None, :] * diff**2, axis=1)) / (2.0 * math.sqrt(x))
        worst = max(worst, float(ratio_ball.max()), float(ratio_d.max()))
    return worst


def sup_ratio_floor(
    spec: EigenSpec, m: int, seed: int = 0, grid_points: int = SUP_GRID
) -> float:
    """Minimum of E f^2 (||f||_H^p / ||f||_inf)^{2/(1-p)} over a test family.

    The family mixes dense Gaussian coefficients, sparse supports and kernel
    sections; the minimum is a numerical lower bound for the sup-ratio
    constant and must stay strictly positive and stable in N.
    """
    if m < 100:
        raise ValueError("family size must be at least 100")
    rng = rng_for(seed, "sup_ratio")
    lam = spec.eigenvalues
    sqlam = np.sqrt(lam)
    N = spec.N
    third = m // 3
    ts = []
    ts.append(rng.standard_normal((third, N)))
    sparse = np.zeros((third, N))
    for row in sparse:
        k = int(rng.integers(1, 9))
        idx = rng.choice(N, size=min(k, N), replace=False)
        row[idx] = rng.standard_normal(idx.size)
    ts.append(sparse)
    x0 = rng.uniform(0.0, 1.0, m - 2 * third)
    ts.append(basis_matrix(spec, x0) * sqlam[None, :])  # kernel sections
    T = np.vstack(ts)

    C = T * sqlam[None, :]  # L2 coefficients, rows
    grid = (np.arange(grid_points) + 0.5) / grid_points
    B = basis_matrix(spec, grid)
    sup = np.max(np.abs(B @ C.T), axis=0)
    ef2 = np.sum(C**2, axis=1)
    hn = np.linalg.norm(T, axis=1)
    keep = (sup > 0.0) & (hn > 0.0)
    p = spec.p
    ratios = ef2[keep] * (hn[keep] ** p / sup[keep]) ** (2.0 / (1.0 - p))
    return float(np.min(ratios))
