"""Shared test oracles, kept independent of the code paths they check."""

import numpy as np


def zoom_grid_min(objective, center, halfwidth, levels=40, pts=7, shrink=0.72, top_k=3):
    """Global minimum of a batched objective over a box by nested grid zoom.

    objective takes an (m, d) array of points and returns (m,) values.  Each
    level keeps the top_k best grid points and recurses around them with a
    shrunk half-width, which tolerates mild multimodality.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.size
    axes = [np.linspace(-1.0, 1.0, pts)] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)

    best_val = np.inf
    best_pt = center.copy()
    frontier = [(center.copy(), float(halfwidth))]
    for _ in range(levels):
        nxt = []
        for ctr, hw in frontier:
            points = ctr[None, :] + hw * mesh
            vals = objective(points)
            order = np.argsort(vals, kind="stable")[:top_k]
            if vals[order[0]] < best_val:
                best_val = float(vals[order[0]])
                best_pt = points[order[0]].copy()
            for j in order:
                nxt.append((points[j].copy(), hw * shrink))
        # merge duplicates cheaply: keep the top_k best centers overall
        nxt.sort(key=lambda t: float(objective(t[0][None, :])[0]))
        frontier = nxt[:top_k]
    return best_val, best_pt


def eta_grid_projection_oracle(lam, a, r, rounds=4, pts=400):
    """Constrained projection excess by pure grid search over the multiplier.

    Scans eta on a wide log grid for the norm crossing, then refines with
    linear grids; no root finder involved.
    """
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)

    def norm_sq(eta):
        t = np.sqrt(lam) * a / (lam + eta)
        return float(t @ t)

    def excess(eta):
        resid = a * (eta / (lam + eta))
        return float(resid @ resid)

    if norm_sq(0.0) <= r * r:
        return 0.0
    grid = np.logspace(-14, 10, 2000)
    vals = np.array([norm_sq(e) for e in grid]) - r * r
    idx = int(np.argmax(vals <= 0.0))  # first nonpositive: crossing bracket
    lo, hi = grid[max(idx - 1, 0)], grid[idx]
    for _ in range(rounds):
        fine = np.linspace(lo, hi, pts)
        fvals = np.array([norm_sq(e) for e in fine]) - r * r
        j = int(np.argmax(fvals <= 0.0))
        lo, hi = fine[max(j - 1, 0)], fine[j]
    eta = 0.5 * (lo + hi)
    return excess(eta)


def golden_min(fun, a, b, tol=1e-13):
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    return min(fc, fd)
