"""Derivative-free minimisation inside a box.

Nelder-Mead runs in unit-cube coordinates, every trial vertex projected back
onto the box, with restarts around the incumbent until a restart no longer
improves it. Uniform random starts are drawn with one generator per start
index so the draw does not depend on evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    n_evaluations: int
    converged: bool
    n_restarts: int


def uniform_starts(lo, hi, n_starts: int, seed: int) -> np.ndarray:
    """``n_starts`` points uniform in ``[lo, hi]``; row ``i`` depends only on (seed, i)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rows = []
    for i in range(n_starts):
        rng = np.random.default_rng([int(seed), i])
        rows.append(lo + (hi - lo) * rng.random(lo.shape[0]))
    return np.array(rows).reshape(n_starts, lo.shape[0])


def _converged(fs, simplex, ftol, xtol):
    f_best, f_worst = fs[0], fs[-1]
    if not np.isfinite(f_worst):
        return False
    if f_worst - f_best <= ftol * abs(f_best) + 1e-300:
        return True
    return float(np.max(np.abs(simplex[1:] - simplex[0]))) <= xtol


def _nelder_mead_unit(func, u0, max_iters, ftol, xtol, step):
    n = u0.shape[0]
    evals = 0

    def f(u):
        nonlocal evals
        evals += 1
        return func(u)

    simplex = np.empty((n + 1, n))
    simplex[0] = u0
    for i in range(n):
        v = u0.copy()
        v[i] = v[i] + step if v[i] + step <= 1.0 else v[i] - step
        simplex[i + 1] = v
    fs = np.array([f(v) for v in simplex])

    converged = False
    for _ in range(max_iters):
        order = np.argsort(fs, kind="stable")
        simplex, fs = simplex[order], fs[order]
        if _converged(fs, simplex, ftol, xtol):
            converged = True
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = np.clip(centroid + (centroid - worst), 0.0, 1.0)
        fr = f(xr)
        if fr < fs[0]:
            xe = np.clip(centroid + 2.0 * (centroid - worst), 0.0, 1.0)
            fe = f(xe)
            if fe < fr:
                simplex[-1], fs[-1] = xe, fe
            else:
                simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = np.clip(centroid + 0.5 * (xr - centroid), 0.0, 1.0)
        else:
            xc = np.clip(centroid + 0.5 * (worst - centroid), 0.0, 1.0)
        fc = f(xc)
        if fc < min(fr, fs[-1]):
            simplex[-1], fs[-1] = xc, fc
            continue
        # shrink towards the best vertex
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        fs[1:] = [f(v) for v in simplex[1:]]
    order = np.argsort(fs, kind="stable")
    return simplex[order[0]].copy(), float(fs[order[0]]), evals, converged


def nelder_mead_box(func, x0, lo, hi, max_iters=500, ftol=1e-10, xtol=1e-12,
                    step=0.25, restart_step=None, max_restarts=8) -> SimplexResult:
    """Minimise ``func`` over the box ``[lo, hi]`` starting from ``x0``.

    Dimensions with ``lo == hi`` are held fixed. The first simplex spans
    ``step`` of each box side so it can leave flat regions (clamped or
    blown-up trajectories). Restarts from the incumbent use ``restart_step``
    (default: ``step``) and stop once a restart improves by less than
    ``ftol`` (relative). ``max_iters`` bounds each simplex run.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lo, hi)
    free = hi > lo
    width = np.where(free, hi - lo, 1.0)

    def to_x(u):
        x = x0.copy()
        x[free] = lo[free] + u * width[free]
        return x

    def g(u):
        return func(to_x(u))

    if not free.any():
        return SimplexResult(x0, float(func(x0)), 1, True, 0)

    if restart_step is None:
        restart_step = step
    u = (x0[free] - lo[free]) / width[free]
    u, fu, evals, converged = _nelder_mead_unit(g, u, max_iters, ftol, xtol, step)
    restarts = 0
    while restarts < max_restarts:
        restarts += 1
        u_new, f_new, n, conv = _nelder_mead_unit(g, u, max_iters, ftol, xtol, restart_step)
        evals += n
        improved = f_new < fu
        gain = fu - f_new
        if improved:
            u, fu = u_new, f_new
        converged = conv
        if not improved or gain <= ftol * abs(fu) or not np.isfinite(fu):
            break
    return SimplexResult(to_x(u), fu, evals, converged, restarts)
