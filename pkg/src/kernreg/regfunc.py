"""Regularization functionals, thresholds and fixed points.

All logs are natural.  Empirical measures are mean-normalized throughout
(P_n = (1/n) sum), and every constant the underlying analysis leaves
unnamed is a field of Constants with default 1.0.  Sample size n is
accepted as a real number in the pure functionals; only sampling paths
require integers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .spectrum import EigenSpec

LN_PI2_OVER_6 = math.log(math.pi**2 / 6.0)

REGULARIZER_KINDS = ("null", "ridge", "quadratic", "improved", "sublinear")


@dataclass(frozen=True)
class Constants:
    """Front constants of the functionals; every one must be positive.

    c_tilde drives the fixed point, c_p the quadratic-era main term, c_Y the
    target-dependent terms, c3 the sublinear front factor, kappa1/kappa2 the
    regularized-ERM constants and u the confidence parameter.  The remaining
    fields name constants that the analysis introduces without values:
    the threshold front (c_threshold), the improved-regularizer front
    (c_improved), the confidence-shift wrap (c_wrap), the chaining front
    (cp_prime), the small-scale split (c4_dudley), the two-sided inequality
    budget (c_iso), the sup-ratio constant (kappa3) and the ridge-baseline
    penalty (eta_ridge).
    """

    c_tilde: float = 1.0
    c_p: float = 1.0
    c_Y: float = 1.0
    c3: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    u: float = 1.0
    c_threshold: float = 1.0
    c_improved: float = 1.0
    c_wrap: float = 1.0
    cp_prime: float = 1.0
    c4_dudley: float = 1.0
    c_iso: float = 1.0
    kappa3: float = 1.0
    eta_ridge: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0.0:
                raise ValueError(f"constant {name} must be strictly positive (got {value})")

    def replace(self, **kw) -> "Constants":
        return replace(self, **kw)


@dataclass(frozen=True)
class RegularizerSpec:
    """A regularizer kind bound to its constants, spectrum and sample size."""

    kind: str
    constants: Constants
    spec: EigenSpec
    n: float

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {REGULARIZER_KINDS}")
        if self.n < 1:
            raise ValueError("sample size must be at least 1")


def fixed_point(lam, n: float, c_tilde: float = 1.0, tail=None) -> float:
    """Smallest z > 0 with z >= c_tilde * ((1/n) sum_i min(z, lam_i))^{1/2}.

    g(z) = z - c_tilde*sqrt(sum_min(z)/n) has a single sign change because
    sum_min is concave with sum_min(0) = 0; the root is found by bracketed
    bisection to 1e-9 relative.  All-zero spectra return 0.  An optional
    PowerLawTail continues the sum past the truncation, which keeps the
    scaling regime intact when the root falls below lam_N.
    """
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    if lam.size == 0 or lam[0] <= 0.0:
        return 0.0
    if n < 1:
        raise ValueError("n must be at least 1")
    suffix = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])
    total = suffix[0] + (tail.tail_sum() if tail is not None else 0.0)

    def sum_min_at(z: float) -> float:
        k = np.searchsorted(-lam, -z, side="right")
        out = z * k + suffix[k]
        if tail is not None:
            out += tail.sum_min(z, 1.0)
        return out

    def g(z: float) -> float:
        return z - c_tilde * math.sqrt(sum_min_at(z) / n)

    hi = c_tilde * math.sqrt(total / n)
    while g(hi) < 0.0:  # guards rounding at the analytic upper end
        hi *= 2.0
    lo = 1e-300
    if g(lo) >= 0.0:
        raise AssertionError("fixed-point bracket invalid: g must be negative near 0")
    return float(brentq(g, lo, hi, rtol=1e-9, xtol=1e-300, maxiter=300))


def sum_min(x: float, r: float, lam) -> float:
    """Truncated localization sum: sum_{i<=N} min(x, r^2 lam_i)."""
    if x < 0.0 or r < 0.0:
        raise ValueError("x and r must be nonnegative")
    lam = np.asarray(lam, dtype=float)
    return float(np.minimum(x, r * r * lam).sum())


def sum_min_spec(x: float, r: float, spec: EigenSpec, include_tail: bool = False) -> float:
    """sum_min over a spectrum, optionally adding its closed-form tail."""
    out = sum_min(x, r, spec.eigenvalues)
    if include_tail and spec.tail is not None:
        out += spec.tail.sum_min(x, r * r)
    return out


def localization_sum_ratio(x: float, r: float, spec: EigenSpec) -> float:
    """sum_min(x, r) / (Lam * x^{1-p} * r^{2p}); bounded by a p-constant.

    The sum includes the spectrum's power-law continuation when present,
    since the bounded-ratio statement is about the full decaying sequence;
    with a bare truncation the ratio collapses once x < lambda_N.
    """
    if x <= 0.0 or r <= 0.0:
        return 0.0
    sm = sum_min_spec(x, r, spec, include_tail=True)
    p = spec.p
    return sm / (spec.weak_lp * x ** (1.0 - p) * r ** (2.0 * p))


def localized_width(x: float, r: float, spec: EigenSpec) -> float:
    """Localized-ellipsoid width Q(x, r) = A * sqrt(sum_min(x, r))."""
    return spec.A * math.sqrt(sum_min(x, r, spec.eigenvalues))


def localized_width_bound(x: float, r: float, spec: EigenSpec, c_p: float = 1.0) -> float:
    """Closed-form majorant (c_p A^2 Lam x^{1-p} r^{2p})^{1/2} of Q."""
    p = spec.p
    return math.sqrt(c_p * spec.A**2 * spec.weak_lp * x ** (1.0 - p) * r ** (2.0 * p))


def threshold_scale(r: float, n: float, spec: EigenSpec) -> float:
    """A * Lam^{1/2} * r^p * ln(n) / sqrt(n)."""
    if r < 1.0:
        raise ValueError("r must be at least 1")
    if n < 2:
        raise ValueError("n must be at least 2")
    return spec.A * math.sqrt(spec.weak_lp) * r**spec.p * math.log(n) / math.sqrt(n)


def localization_threshold(r: float, n: float, spec: EigenSpec, c: float = 1.0) -> float:
    """Localization threshold c * max(threshold_scale^{2/(1+p)}, threshold_scale^{2/p})."""
    th = threshold_scale(r, n, spec)
    p = spec.p
    return c * max(th ** (2.0 / (1.0 + p)), th ** (2.0 / p))


def quadratic_penalty(
    r: float, u: float, n: float, spec: EigenSpec, consts: Constants = Constants()
) -> float:
    """Quadratic-era penalty c_p r^2 (Lam/n)^{1/(1+p)} + c_Y (1+r^2) u/n."""
    if r < 1.0:
        raise ValueError("r must be at least 1")
    if u < 0.0:
        raise ValueError("u must be nonnegative")
    p = spec.p
    main = consts.c_p * r * r * (spec.weak_lp / n) ** (1.0 / (1.0 + p))
    return main + consts.c_Y * (1.0 + r * r) * u / n


def improved_penalty(
    r: float, u: float, n: float, spec: EigenSpec, consts: Constants = Constants()
) -> float:
    """c (1+u) max(r^{2p/(1+p)} (ln n)^{2/(1+p)} / n^{1/(1+p)}, r^2/n)."""
    if r < 1.0:
        raise ValueError("r must be at least 1")
    if u < 0.0:
        raise ValueError("u must be nonnegative")
    if n < 2:
        raise ValueError("n must be at least 2")
    p = spec.p
    first = r ** (2.0 * p / (1.0 + p)) * math.log(n) ** (2.0 / (1.0 + p)) / n ** (1.0 / (1.0 + p))
    return consts.c_improved * (1.0 + u) * max(first, r * r / n)


def sublinear_penalty(
    h: float, u: float, n: float, spec: EigenSpec, consts: Constants = Constants()
) -> float:
    """Sublinear penalty in the H-norm h of the candidate function.

    c3 * (1 + u + c_Y ln n + ln ln(h + e)) * ((h+1)^p ln n / sqrt(n))^{2/(1+p)};
    the iterated log is 0 at h = 0 and nonnegative throughout.
    """
    if h < 0.0:
        raise ValueError("h must be nonnegative")
    if u < 0.0:
        raise ValueError("u must be nonnegative")
    if n < 3:
        raise ValueError("n must be at least 3")
    p = spec.p
    front = consts.c3 * (1.0 + u + consts.c_Y * math.log(n) + math.log(math.log(h + math.e)))
    return front * ((h + 1.0) ** p * math.log(n) / math.sqrt(n)) ** (2.0 / (1.0 + p))


def confidence_shift(r: float, x: float, pl1: float, rho1: float) -> float:
    """Confidence shift x + ln(pi^2/6) + 2 ln(1 + pl1/rho1 + ln r).

    pl1 is the loss of the radius-one reference minimizer and rho1 the
    penalty evaluated there; both enter only through their ratio.
    """
    if r < 1.0:
        raise ValueError("r must be at least 1")
    if x <= 0.0:
        raise ValueError("x must be positive")
    if rho1 <= 0.0:
        raise ValueError("rho1 must be positive")
    if pl1 < 0.0:
        raise ValueError("pl1 must be nonnegative")
    return x + LN_PI2_OVER_6 + 2.0 * math.log(1.0 + pl1 / rho1 + math.log(r))


def wrapped_shift(u: float, n: float, r: float, c_wrap: float = 1.0) -> float:
    """The n-level shift u + ln(pi^2/6) + 2 ln(1 + c n + ln r) used in wrapping."""
    return u + LN_PI2_OVER_6 + 2.0 * math.log(1.0 + c_wrap * n + math.log(r))


def process_bound(
    x: float,
    r: float,
    n: float,
    el_star: float,
    spec: EigenSpec,
    consts: Constants = Constants(),
) -> float:
    """Localized empirical-process majorant (U/sqrt(n)) max(sqrt x, sqrt el*, U/sqrt n)

    with U = cp_prime * localized_width_bound(x, r) * ln n.
    """
    if x < 0.0 or el_star < 0.0:
        raise ValueError("x and el_star must be nonnegative")
    if r < 1.0:
        raise ValueError("r must be at least 1")
    if x == 0.0:
        return 0.0
    U = consts.cp_prime * localized_width_bound(x, r, spec, consts.c_p) * math.log(n)
    lead = U / math.sqrt(n)
    return lead * max(math.sqrt(x), math.sqrt(el_star), lead)


def peeling_sum(
    x: float,
    r: float,
    n: float,
    el_star: float,
    spec: EigenSpec,
    consts: Constants = Constants(),
    terms: int = 61,
) -> float:
    """sum_{i=0}^{terms-1} 2^{-i} process_bound(2^{i+1} x); dominated geometrically."""
    return sum(
        2.0 ** (-i) * process_bound(2.0 ** (i + 1) * x, r, n, el_star, spec, consts)
        for i in range(terms)
    )


def peeling_bound_constant(p: float) -> float:
    """Geometric closed form 2^{2 - p/2} / (1 - 2^{-p/2}) dominating the peel."""
    return 2.0 ** (2.0 - p / 2.0) / (1.0 - 2.0 ** (-p / 2.0))


def admissible_u_range(n: float, c1: float = 1.0, c2: float = 1.0, p: float = 0.5) -> tuple[float, float]:
    """The (c1 loglog n, c2 (log n)^{2/(1-p)}) admissible band for u."""
    return c1 * math.log(math.log(n)), c2 * math.log(n) ** (2.0 / (1.0 - p))


def evaluate_regularizer(regspec: RegularizerSpec, h: float, u: float) -> float:
    """Penalty value at H-norm h, dispatching on the regularizer kind.

    The hierarchy radius is r(f) = h + 1.  The quadratic and improved kinds
    carry the doubling and confidence-shift wrapping of their model-selection
    form; the sublinear kind already absorbs those shifts in its formula.
    """
    if h < 0.0:
        raise ValueError("h must be nonnegative")
    kind, consts, spec, n = regspec.kind, regspec.constants, regspec.spec, regspec.n
    if kind == "null":
        return 0.0
    if kind == "ridge":
        return consts.eta_ridge * h * h
    r = h + 1.0
    if kind == "quadratic":
        uu = wrapped_shift(u, n, r, consts.c_wrap)
        return quadratic_penalty(2.0 * r, uu, n, spec, consts)
    if kind == "improved":
        uu = wrapped_shift(u, n, r, consts.c_wrap)
        return improved_penalty(2.0 * r, uu, n, spec, consts)
    if kind == "sublinear":
        lo, hi = admissible_u_range(n, p=spec.p)
        if not lo <= u <= hi:
            warnings.warn(
                f"confidence u={u:.3g} outside the admissible band [{lo:.3g}, {hi:.3g}] at n={n:g}",
                stacklevel=2,
            )
        return sublinear_penalty(h, u, n, spec, consts)
    raise ValueError(f"unknown regularizer kind {kind!r}")
