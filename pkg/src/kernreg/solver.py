"""Regularized empirical risk minimization over the RKHS.

The search over norm balls is realized as a search over the ridge path:
by Lagrangian duality the path {argmin_{||f||<=r} P_n l_f : r >= 0} is
exactly the set of ridge solutions, so the frontier of (H-norm, empirical
loss) pairs over a penalty grid is the feasible set of the model-selection
problem.  Both a kernel (gram) route and a feature-space route are
provided; they yield the same solutions, and the feature route costs
O(N^3 + n N) per path instead of O(n^3).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .regfunc import RegularizerSpec, evaluate_regularizer
from .spectrum import EigenSpec, basis_matrix, feature_matrix, gram_matrix
from .synth import SampleSet

DEFAULT_ETA_HIGH = 1e3
DEFAULT_ETA_LOW = 1e-9
DEFAULT_ETA_PER_DECADE = 20
GRID_CAP = 10_000
MONOTONE_SLACK = 1e-10
# relative floor under which the loss tail is treated as converged; a pure
# relative-change rule never terminates on interpolating (loss -> 0) paths
LOSS_FLOOR_REL = 1e-12
SUP_GRID_DIAGNOSTIC = 20_000


class FactorizationError(RuntimeError):
    """Cholesky failure; carries the smallest diagonal pivot seen."""

    def __init__(self, msg: str, smallest_pivot: float):
        super().__init__(msg)
        self.smallest_pivot = smallest_pivot


class FrontierError(RuntimeError):
    pass


def ridge_solve_info(gram: np.ndarray, ys: np.ndarray, eta: float) -> tuple[np.ndarray, float]:
    """Solve (G + n eta I) alpha = y by SPD factorization.

    Returns (alpha, jitter): jitter is the diagonal boost that was applied
    when the unmodified system failed to factor (0.0 normally).
    """
    if eta <= 0.0:
        raise ValueError("ridge penalty eta must be positive")
    n = gram.shape[0]
    mat = gram + n * eta * np.eye(n)
    jitter = 0.0
    try:
        c = cho_factor(mat, lower=True, check_finite=False)
    except LinAlgError:
        jitter = 1e-12 * np.trace(gram) / n
        try:
            c = cho_factor(mat + jitter * np.eye(n), lower=True, check_finite=False)
        except LinAlgError as exc:
            pivot = float(np.min(np.linalg.eigvalsh(mat)))
            raise FactorizationError(
                f"ridge system not positive definite at eta={eta:g}", pivot
            ) from exc
    alpha = cho_solve(c, ys, check_finite=False)
    resid = float(np.linalg.norm(mat @ alpha - ys))
    scale = max(1.0, float(np.linalg.norm(ys)))
    if resid > 1e-8 * scale:
        raise FactorizationError(
            f"ridge residual {resid:.3e} exceeds tolerance at eta={eta:g}",
            float(np.min(np.diag(c[0])) ** 2),
        )
    return alpha, jitter


def ridge_solve(gram: np.ndarray, ys: np.ndarray, eta: float) -> np.ndarray:
    """alpha = (G + n eta I)^{-1} y, minimizing (1/n) sum (f(X_i)-y_i)^2 + eta ||f||_H^2."""
    return ridge_solve_info(gram, ys, eta)[0]


class _Path:
    """Eigendecomposed ridge path; exact h(eta), loss(eta), t(eta), alpha(eta)."""

    def __init__(self, spec, xs, ys, gram):
        ys = np.asarray(ys, dtype=float)
        self.n = ys.size
        self.ys = ys
        self.spec = spec
        self.xs = None if xs is None else np.asarray(xs, dtype=float)
        self.gram = gram
        if spec is not None and xs is not None:
            self.B = feature_matrix(spec, self.xs)
            BtB = self.B.T @ self.B
            svals, V = np.linalg.eigh(BtB)
            self.svals = np.clip(svals, 0.0, None)
            self.V = V
            self.w = V.T @ (self.B.T @ ys)
            # range/orthogonal split of y: alpha at small eta is dominated by
            # the out-of-range residual, which must not be formed by
            # cancellation against the fitted values; the rank cutoff sits
            # far above eigh noise and far below n * eta_min
            pos = self.svals > self.svals[-1] * 1e-13
            self.U = self.B @ (V[:, pos] / np.sqrt(self.svals[pos]))
            self.uy = self.U.T @ ys
            self.y_perp = ys - self.U @ self.uy
            self.s_pos = self.svals[pos]
            self.mode = "features"
        else:
            if gram is None:
                raise ValueError("need either gram or (spec, xs)")
            svals, V = np.linalg.eigh(gram)
            self.svals = np.clip(svals, 0.0, None)
            self.V = V
            self.w = V.T @ ys
            self.mode = "gram"
        self.y2 = float(ys @ ys)

    def h_loss(self, etas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.svals[None, :] + self.n * np.asarray(etas, dtype=float)[:, None]
        w2 = self.w[None, :] ** 2
        if self.mode == "features":
            h2 = np.sum(w2 / d**2, axis=1)
            tbty = np.sum(w2 / d, axis=1)
            tbtbt = np.sum(self.svals[None, :] * w2 / d**2, axis=1)
            loss = (self.y2 - 2.0 * tbty + tbtbt) / self.n
        else:
            # alpha in the gram eigenbasis: w/(s + n eta)
            h2 = np.sum(self.svals[None, :] * w2 / d**2, axis=1)
            loss = np.sum(w2 * (self.n * np.asarray(etas)[:, None] / d) ** 2, axis=1) / self.n
        return np.sqrt(np.maximum(h2, 0.0)), np.maximum(loss, 0.0)

    def t(self, eta: float) -> np.ndarray:
        if self.mode != "features":
            raise FrontierError("feature coefficients need the feature-space path")
        return self.V @ (self.w / (self.svals + self.n * eta))

    def alpha(self, eta: float) -> np.ndarray:
        if self.mode == "features":
            # (G + n eta I)^{-1} y with G = U diag(s) U^T plus the orthogonal part
            return self.y_perp / (self.n * eta) + self.U @ (
                self.uy / (self.s_pos + self.n * eta)
            )
        return self.V @ (self.w / (self.svals + self.n * eta))

@dataclass
class Frontier:
    """Ridge solutions ordered by decreasing eta: norms rise, losses fall."""

    etas: np.ndarray
    hs: np.ndarray
    losses: np.ndarray
    n: int
    path: _Path
    jitter: float = 0.0

    def __len__(self) -> int:
        return self.etas.size

    def alpha(self, i: int) -> np.ndarray:
        return self.path.alpha(float(self.etas[i]))

    @property
    def alphas(self) -> np.ndarray:
        return np.stack([self.alpha(i) for i in range(len(self))])


@dataclass(frozen=True)
class FittedFunction:
    """A kernel-section expansion with its norm, loss and exact eigencoordinates."""

    alpha: np.ndarray
    anchors: np.ndarray
    h: float
    loss: float
    c: np.ndarray | None  # L2 coefficients c_j = lam_j sum_i alpha_i phi_j(X_i)
    eta: float
    config_hash: str = ""

    def evaluate(self, spec: EigenSpec, xs) -> np.ndarray:
        """f(x) = sum_i alpha_i K(X_i, x) via the Mercer expansion."""
        B = basis_matrix(spec, xs)
        anchor_B = basis_matrix(spec, self.anchors)
        return B @ (spec.eigenvalues * (anchor_B.T @ self.alpha))

    def to_json(self) -> str:
        doc = {
            "anchors": [float(v) for v in self.anchors],
            "alpha": [float(v) for v in self.alpha],
            "h": self.h,
            "loss": self.loss,
            "eta": self.eta,
            "config_hash": self.config_hash,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FittedFunction":
        doc = json.loads(text)
        return FittedFunction(
            alpha=np.asarray(doc["alpha"], dtype=float),
            anchors=np.asarray(doc["anchors"], dtype=float),
            h=float(doc["h"]),
            loss=float(doc["loss"]),
            c=None,
            eta=float(doc["eta"]),
            config_hash=doc.get("config_hash", ""),
        )


def default_eta_grid(
    high: float = DEFAULT_ETA_HIGH,
    low: float = DEFAULT_ETA_LOW,
    per_decade: int = DEFAULT_ETA_PER_DECADE,
) -> np.ndarray:
    decades = math.log10(high) - math.log10(low)
    return np.geomspace(high, low, int(round(decades * per_decade)) + 1)


def build_frontier(
    gram: np.ndarray | None,
    ys,
    eta_grid=None,
    *,
    spec: EigenSpec | None = None,
    xs=None,
    h_cap: float | None = None,
) -> Frontier:
    """Solve the ridge path over a decreasing log-spaced penalty grid.

    The grid auto-extends upward until the stiffest point has h <= 1e-6 and
    downward until the relative loss change between consecutive points is
    <= 1e-6 or the loss has fallen below a relative floor (interpolating
    paths never satisfy the pure relative rule).  Passing h_cap stops the
    descent once the norm exceeds the cap, keeping only points inside it.
    """
    ys = np.asarray(ys, dtype=float)
    if eta_grid is None:
        eta_grid = default_eta_grid()
    eta_grid = np.asarray(eta_grid, dtype=float)
    if eta_grid.size < 20:
        raise ValueError("eta grid needs at least 20 points")
    if np.any(np.diff(eta_grid) >= 0.0):
        raise ValueError("eta grid must be strictly decreasing")
    path = _Path(spec, xs, ys, gram)
    step = float(eta_grid[1] / eta_grid[0])

    etas = list(eta_grid)
    hs, losses = path.h_loss(np.asarray(etas))
    hs, losses = list(hs), list(losses)

    # upward: stiffest point must be numerically the zero function
    while hs[0] > 1e-6:
        if len(etas) >= GRID_CAP:
            raise FrontierError(f"eta grid extension exceeded {GRID_CAP} points (upward)")
        new_eta = etas[0] / step  # step < 1, so this increases eta
        h0, l0 = path.h_loss(np.asarray([new_eta]))
        etas.insert(0, new_eta)
        hs.insert(0, float(h0[0]))
        losses.insert(0, float(l0[0]))

    loss_floor = LOSS_FLOOR_REL * max(losses[0], 1e-300)

    def tail_converged() -> bool:
        if h_cap is not None and hs[-1] > h_cap:
            return True
        prev, last = losses[-2], losses[-1]
        if last <= loss_floor:
            return True
        return (prev - last) <= 1e-6 * max(prev, 1e-300)

    while not tail_converged():
        if len(etas) >= GRID_CAP:
            raise FrontierError(f"eta grid extension exceeded {GRID_CAP} points (downward)")
        new_eta = etas[-1] * step
        h0, l0 = path.h_loss(np.asarray([new_eta]))
        etas.append(new_eta)
        hs.append(float(h0[0]))
        losses.append(float(l0[0]))

    etas_a = np.asarray(etas)
    hs_a = np.asarray(hs)
    losses_a = np.asarray(losses)
    if h_cap is not None:
        keep = hs_a <= h_cap
        keep[0] = True  # always retain the near-zero end
        etas_a, hs_a, losses_a = etas_a[keep], hs_a[keep], losses_a[keep]

    if np.any(np.diff(hs_a) < -MONOTONE_SLACK * np.maximum(1.0, hs_a[:-1])):
        raise FrontierError("frontier norm not nondecreasing along decreasing eta")
    if np.any(np.diff(losses_a) > MONOTONE_SLACK * np.maximum(1.0, losses_a[:-1])):
        raise FrontierError("frontier loss not nonincreasing along decreasing eta")

    return Frontier(etas=etas_a, hs=hs_a, losses=losses_a, n=path.n, path=path)


def frontier_for_sample(spec: EigenSpec, sample: SampleSet, **kw) -> Frontier:
    """Frontier for a drawn sample using the O(N^3) feature-space path."""
    return build_frontier(None, sample.ys, spec=spec, xs=sample.xs, **kw)


def frontier_from_gram(spec: EigenSpec, sample: SampleSet, **kw) -> Frontier:
    """Frontier through the dense kernel-matrix route (small n)."""
    return build_frontier(gram_matrix(spec, sample.xs), sample.ys, **kw)


def _objective(frontier: Frontier, regspec: RegularizerSpec, u: float, etas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hs, losses = frontier.path.h_loss(np.asarray(etas, dtype=float))
    kappa1 = regspec.constants.kappa1
    pen = np.array([evaluate_regularizer(regspec, float(h), u) for h in hs])
    return losses + kappa1 * pen, hs, losses


def regularized_erm(frontier: Frontier, regspec: RegularizerSpec, u: float) -> FittedFunction:
    """Minimize L_hat + kappa1 * reg(h) along the frontier, then refine locally.

    Refinement bisects 20 times in log-eta between the best grid point and
    each neighbor; ties in the objective break toward the smaller norm.
    """
    obj, hs, _ = _objective(frontier, regspec, u, frontier.etas)
    order = np.lexsort((hs, obj))
    j = int(order[0])

    best_eta = float(frontier.etas[j])
    best_obj = float(obj[j])
    best_h = float(hs[j])
    for nb in (j - 1, j + 1):
        if not 0 <= nb < len(frontier):
            continue
        lo, hi = sorted((math.log(frontier.etas[nb]), math.log(best_eta)))
        a, b = lo, hi
        for _ in range(20):
            mids = np.exp(np.array([a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0]))
            vals, hh, _ = _objective(frontier, regspec, u, mids)
            if (vals[0], hh[0]) <= (vals[1], hh[1]):
                b = math.log(mids[1])
                cand_obj, cand_h, cand_eta = float(vals[0]), float(hh[0]), float(mids[0])
            else:
                a = math.log(mids[0])
                cand_obj, cand_h, cand_eta = float(vals[1]), float(hh[1]), float(mids[1])
            if (cand_obj, cand_h) < (best_obj, best_h):
                best_obj, best_h, best_eta = cand_obj, cand_h, cand_eta

    # the zero function is the eta -> infinity limit of the path and always
    # admissible; prefer it on ties per the smaller-norm rule
    path = frontier.path
    zero_obj = float(np.mean(path.ys**2)) + regspec.constants.kappa1 * evaluate_regularizer(
        regspec, 0.0, u
    )
    if (zero_obj, 0.0) <= (best_obj, best_h):
        if path.spec is not None:
            c0 = np.zeros(path.spec.N)
            anchors0 = path.xs if path.xs is not None else np.arange(path.n, dtype=float)
        else:
            c0, anchors0 = None, np.arange(path.n, dtype=float)
        return FittedFunction(
            alpha=np.zeros(path.n),
            anchors=anchors0,
            h=0.0,
            loss=float(np.mean(path.ys**2)),
            c=c0,
            eta=math.inf,
        )

    hs_f, losses_f = frontier.path.h_loss(np.asarray([best_eta]))
    alpha = frontier.path.alpha(best_eta)
    if path.mode == "features":
        c = np.sqrt(path.spec.eigenvalues) * path.t(best_eta)
        anchors = path.xs
    elif path.spec is not None and path.xs is not None:
        anchor_B = basis_matrix(path.spec, path.xs)
        c = path.spec.eigenvalues * (anchor_B.T @ alpha)
        anchors = path.xs
    else:
        c = None
        anchors = np.arange(path.n, dtype=float)
    return FittedFunction(
        alpha=alpha,
        anchors=anchors,
        h=float(hs_f[0]),
        loss=float(losses_f[0]),
        c=c,
        eta=best_eta,
    )


def fit_sample(
    spec: EigenSpec, sample: SampleSet, regspec: RegularizerSpec, u: float, **frontier_kw
) -> FittedFunction:
    """Convenience: frontier construction plus regularized ERM in one call."""
    frontier = frontier_for_sample(spec, sample, **frontier_kw)
    return regularized_erm(frontier, regspec, u)


@dataclass(frozen=True)
class SupRatioReport:
    """Diagnostic for the bounded sup-to-norm-ratio membership predicate."""

    membership_value: float  # kappa3 (||f||_inf / ||f||_H^p)^{2/(1-p)}
    within_bound: bool
    pn_f_sq: float
    pn_guard_holds: bool  # P_n f^2 >= 9
    ef_sq_exact: float
    sup_norm: float


def sup_ratio_diagnostic(
    f: FittedFunction, spec: EigenSpec, kappa3: float, sample: SampleSet
) -> SupRatioReport:
    """Report the sup-ratio membership value and second-moment guard.

    Purely diagnostic: never alters the fitted solution.  The sup norm is
    estimated by grid maximization; E f^2 is exact from eigencoordinates.
    """
    if f.c is None:
        raise ValueError("fitted function lacks eigencoordinates; fit with a spec")
    grid = (np.arange(SUP_GRID_DIAGNOSTIC) + 0.5) / SUP_GRID_DIAGNOSTIC
    vals = basis_matrix(spec, grid) @ f.c
    j = int(np.argmax(np.abs(vals)))
    # golden-section polish around the grid argmax; the grid alone is only
    # O(step^2) accurate on a smooth function
    lo = max(0.0, grid[j] - 1.0 / SUP_GRID_DIAGNOSTIC)
    hi = min(1.0, grid[j] + 1.0 / SUP_GRID_DIAGNOSTIC)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0

    def neg_abs(x: float) -> float:
        return -abs(float((basis_matrix(spec, [x]) @ f.c)[0]))

    a, b = lo, hi
    c1, d1 = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = neg_abs(c1), neg_abs(d1)
    while b - a > 1e-12:
        if fc <= fd:
            b, d1, fd = d1, c1, fc
            c1 = b - inv_phi * (b - a)
            fc = neg_abs(c1)
        else:
            a, c1, fc = c1, d1, fd
            d1 = a + inv_phi * (b - a)
            fd = neg_abs(d1)
    sup = max(float(np.max(np.abs(vals))), -min(fc, fd))
    ef2 = float(f.c @ f.c)
    fit_vals = basis_matrix(spec, sample.xs) @ f.c
    pn_f2 = float(np.mean(fit_vals**2))
    p = spec.p
    if f.h <= 0.0 or sup <= 0.0:
        member = 0.0
    else:
        member = kappa3 * (sup / f.h**p) ** (2.0 / (1.0 - p))
    return SupRatioReport(
        membership_value=member,
        within_bound=member <= 50.0,
        pn_f_sq=pn_f2,
        pn_guard_holds=pn_f2 >= 9.0,
        ef_sq_exact=ef2,
        sup_norm=sup,
    )
