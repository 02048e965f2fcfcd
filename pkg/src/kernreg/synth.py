"""Synthetic regression tasks with exactly known population quantities.

A task places the regression function in eigencoordinates, f_rho having
L2 coefficients a_i = lam_i^sigma g_i, draws bounded uniform noise, and
computes population excess risks and constrained best-in-ball projections
in closed form, so experiment error measurements carry no test-set noise.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .spectrum import EigenSpec, basis_matrix


class RootFindError(RuntimeError):
    """Raised when the Lagrange-multiplier root find cannot bracket or converge."""


@dataclass(frozen=True)
class RegressionTask:
    """Target f_rho = sum_i a_i phi_i with a_i = lam_i^sigma g_i, noise in [-b, b]."""

    spec: EigenSpec
    sigma: float
    g: np.ndarray
    b: float
    a: np.ndarray = field(init=False)

    def __post_init__(self):
        a = self.spec.eigenvalues ** self.sigma * self.g
        object.__setattr__(self, "a", a)

    def f_rho(self, xs) -> np.ndarray:
        return basis_matrix(self.spec, xs) @ self.a

    def l2_norm_sq(self) -> float:
        return float(self.a @ self.a)

    def sup_norm_bound(self) -> float:
        """A * sum |a_i|, a uniform bound on |f_rho|."""
        return float(self.spec.A * np.abs(self.a).sum())


@dataclass(frozen=True)
class SampleSet:
    xs: np.ndarray
    ys: np.ndarray
    seed: int
    n: int


def default_g(spec: EigenSpec, q: float = 0.5, scale: float = 1.0) -> np.ndarray:
    """Default coefficient profile g_i = scale * i^{-q}."""
    idx = np.arange(1, spec.N + 1, dtype=float)
    return scale * idx ** (-q)


def make_target(spec: EigenSpec, sigma: float, g) -> RegressionTask:
    """Task with smoothness sigma in (0, 1]; sigma = 0 is allowed as a diagnostic."""
    if sigma < 0.0 or sigma > 1.0:
        raise ValueError(f"smoothness sigma must be in [0, 1] (got {sigma})")
    g = np.asarray(g, dtype=float)
    if g.size > spec.N:
        raise ValueError("g must be supported on indices <= N")
    if g.size < spec.N:
        g = np.concatenate([g, np.zeros(spec.N - g.size)])
    return RegressionTask(spec=spec, sigma=sigma, g=g, b=0.5)


def with_noise(task: RegressionTask, b: float) -> RegressionTask:
    if b < 0.0:
        raise ValueError("noise half-width must be nonnegative")
    return RegressionTask(spec=task.spec, sigma=task.sigma, g=task.g, b=b)


def draw_sample(task: RegressionTask, n: int, seed) -> SampleSet:
    """n points uniform on [0,1], y = f_rho(x) + Uniform[-b, b] noise.

    Deterministic given the seed; the x block is drawn before the noise
    block, which is part of the reproducibility contract.
    """
    if n < 1:
        raise ValueError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 1.0, n)
    noise = rng.uniform(-task.b, task.b, n) if task.b > 0.0 else np.zeros(n)
    ys = task.f_rho(xs) + noise
    seed_int = int(seed) if np.isscalar(seed) and not isinstance(seed, np.random.SeedSequence) else -1
    return SampleSet(xs=xs, ys=ys, seed=seed_int, n=n)


def population_risk_excess(c, task: RegressionTask) -> float:
    """P l_f - P l_{f_rho} = sum_i (c_i - a_i)^2 for L2 coefficients c.

    Exact under independent noise: the excess risk is the squared L2
    distance to f_rho in eigencoordinates.
    """
    c = np.asarray(c, dtype=float)
    if c.size > task.spec.N:
        raise ValueError("c must be supported on indices <= N")
    if c.size < task.spec.N:
        c = np.concatenate([c, np.zeros(task.spec.N - c.size)])
    d = c - task.a
    return float(d @ d)


def _ball_norm_sq(lam: np.ndarray, a: np.ndarray, eta: float) -> float:
    t = np.sqrt(lam) * a / (lam + eta)
    return float(t @ t)


def best_in_ball(task: RegressionTask, r: float) -> tuple[np.ndarray, float]:
    """Constrained projection of f_rho onto the H-ball of radius r.

    Returns (t_star, excess): t_star are l2 (feature) coefficients of the
    minimizer of sum (sqrt(lam_i) t_i - a_i)^2 over ||t|| <= r, via the
    closed form t_i = sqrt(lam_i) a_i / (lam_i + eta) with eta >= 0 the
    unique multiplier putting ||t|| on the boundary (eta = 0 if interior).
    """
    if r < 0.0:
        raise ValueError("radius must be nonnegative")
    lam, a = task.spec.eigenvalues, task.a
    if r == 0.0:
        return np.zeros(task.spec.N), float(a @ a)
    if _ball_norm_sq(lam, a, 0.0) <= r * r:
        return a / np.sqrt(lam), 0.0
    # ||t(eta)|| is strictly decreasing, so the root is unique; bracket from
    # the spec's initial upper end with dynamic expansion.
    norm_a = float(np.sqrt(a @ a))
    hi = max(lam[0] * norm_a / (r * np.sqrt(lam[-1])), lam[0], 1e-12)
    expansions = 0
    while _ball_norm_sq(lam, a, hi) > r * r:
        hi *= 4.0
        expansions += 1
        if expansions > 200:
            raise RootFindError(
                f"bracket expansion failed: ||t({hi:.3e})||^2 = "
                f"{_ball_norm_sq(lam, a, hi):.6e} still above r^2 = {r * r:.6e}"
            )
    try:
        eta = brentq(
            lambda e: _ball_norm_sq(lam, a, e) - r * r,
            1e-300,
            hi,
            rtol=1e-12,
            xtol=1e-300,
            maxiter=300,
        )
    except (RuntimeError, ValueError) as exc:
        lo_val = _ball_norm_sq(lam, a, 1e-300) - r * r
        hi_val = _ball_norm_sq(lam, a, hi) - r * r
        raise RootFindError(
            f"root find failed on [1e-300, {hi:.3e}] with endpoint values "
            f"({lo_val:.3e}, {hi_val:.3e})"
        ) from exc
    t = np.sqrt(lam) * a / (lam + eta)
    resid = a * (eta / (lam + eta))
    return t, float(resid @ resid)


def check_approx_bound(task: RegressionTask, r: float) -> tuple[float, float]:
    """Exact approximation error of the (r-1)-ball against its decay bound.

    Returns (exactA, boundRHS) with boundRHS = r^{-4 sigma/(1-2 sigma)}
    * ||g||^{2/(1-2 sigma)}, and raises if the bound is violated.  Only
    meaningful for 0 < sigma < 1/2; the exponent degenerates at 1/2.
    """
    sigma = task.sigma
    if not 0.0 < sigma < 0.5:
        raise ValueError(f"approximation bound requires 0 < sigma < 1/2 (got {sigma})")
    if r < 1.0:
        raise ValueError("r must be at least 1")
    _, exact = best_in_ball(task, r - 1.0)
    g_norm_sq = float(task.g @ task.g)
    k = 4.0 * sigma / (1.0 - 2.0 * sigma)
    bound = r ** (-k) * g_norm_sq ** (1.0 / (1.0 - 2.0 * sigma))
    if exact > bound * (1.0 + 1e-12):
        raise RuntimeError(
            f"approximation bound violated at r={r}: exact={exact:.6e} > bound={bound:.6e}"
        )
    return exact, bound


# --- sample CSV interchange -------------------------------------------------

def sample_to_csv(sample: SampleSet) -> str:
    """CSV with header x,y; 17 significant digits; LF line endings."""
    buf = io.StringIO()
    buf.write("x,y\n")
    for x, y in zip(sample.xs, sample.ys):
        buf.write(f"{x:.17g},{y:.17g}\n")
    return buf.getvalue()


def sample_from_csv(text: str, seed: int = -1) -> SampleSet:
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0].strip() != "x,y":
        raise ValueError("sample CSV must start with header 'x,y'")
    xs, ys = [], []
    for ln in lines[1:]:
        sx, sy = ln.split(",")
        xs.append(float(sx))
        ys.append(float(sy))
    return SampleSet(xs=np.array(xs), ys=np.array(ys), seed=seed, n=len(xs))
