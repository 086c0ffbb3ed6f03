"""Derivative-free simplex minimizer used by the model-fitting routines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Standard Nelder-Mead coefficients.
_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool


def nelder_mead(
    func: Callable[[np.ndarray], float],
    x0: np.ndarray,
    max_evals: int = 2000,
    rel_tol: float = 1e-10,
    initial_step: float = 0.1,
) -> MinimizeResult:
    """
    Minimize ``func`` from ``x0`` with a Nelder-Mead simplex.

    Stops when the simplex function-value spread drops below ``rel_tol``
    relative to the best value, or after ``max_evals`` evaluations.  After a
    first convergence the search restarts once from the incumbent with a
    smaller step, which guards against premature collapse of the simplex;
    the restart shares the same evaluation budget.  Deterministic for a
    given ``func`` and ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    evals = 0

    def f(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        val = func(x)
        if not np.isfinite(val):
            return 1e300
        return float(val)

    if n == 0:
        return MinimizeResult(x=x0, fun=f(x0), n_evals=evals, converged=True)

    def run(start: np.ndarray, step: float) -> tuple[np.ndarray, float, bool]:
        simplex = [start.copy()]
        for i in range(n):
            v = start.copy()
            v[i] += step * max(1.0, abs(v[i]))
            simplex.append(v)
        fvals = [f(v) for v in simplex]

        converged = False
        while evals < max_evals:
            order = np.argsort(fvals, kind="stable")
            simplex = [simplex[i] for i in order]
            fvals = [fvals[i] for i in order]
            fbest, fworst = fvals[0], fvals[-1]
            if fworst - fbest <= rel_tol * (abs(fbest) + rel_tol):
                converged = True
                break

            centroid = np.mean(simplex[:-1], axis=0)
            xr = centroid + _REFLECT * (centroid - simplex[-1])
            fr = f(xr)
            if fr < fvals[0]:
                xe = centroid + _EXPAND * (xr - centroid)
                fe = f(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
            elif fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
            else:
                if fr < fvals[-1]:
                    xc = centroid + _CONTRACT * (xr - centroid)
                else:
                    xc = centroid - _CONTRACT * (centroid - simplex[-1])
                fc = f(xc)
                if fc < min(fr, fvals[-1]):
                    simplex[-1], fvals[-1] = xc, fc
                else:
                    for i in range(1, n + 1):
                        simplex[i] = simplex[0] + _SHRINK * (simplex[i] - simplex[0])
                        fvals[i] = f(simplex[i])
                        if evals >= max_evals:
                            break

        i_best = int(np.argmin(fvals))
        return simplex[i_best], fvals[i_best], converged

    x_best, f_best, conv = run(x0, initial_step)
    if evals < max_evals:
        x2, f2, conv2 = run(x_best, initial_step * 0.1)
        if f2 <= f_best:
            x_best, f_best, conv = x2, f2, conv2 or conv
    return MinimizeResult(x=x_best, fun=f_best, n_evals=evals, converged=conv)
