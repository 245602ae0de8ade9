"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Steps are accepted only when they lower the sum of squared residuals, so the
recorded cost history is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float  # sum of squared residuals
    jac: np.ndarray
    converged: bool
    iterations: int
    message: str = ""
    history: list[float] = field(default_factory=list)


def numerical_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                       steps: np.ndarray | None = None) -> np.ndarray:
    """Central-difference Jacobian; default steps are ``1e-6 * max(|x|, 1)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        h = 1e-6 * max(abs(x[k]), 1.0) if steps is None else steps[k]
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((fun(xp) - fun(xm)) / (2 * h))
    return np.column_stack(cols)


def levenberg_marquardt(fun: Callable[[np.ndarray], np.ndarray], x0, max_iter: int = 200, xtol: float = 1e-12,
                        ftol: float = 1e-14, lam0: float = 1e-3) -> LMResult:
    """Minimize ``sum(fun(x)**2)`` starting from ``x0``.

    Uses Marquardt's diagonal scaling; the damped normal equations are solved
    as an augmented least-squares problem for stability.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial guess")
    cost = float(r @ r)
    history = [cost]
    lam = lam0
    J = numerical_jacobian(fun, x)
    converged, message = False, "iteration limit reached"
    it = 0
    for it in range(1, max_iter + 1):
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        g = J.T @ r
        if np.abs(g).max() <= 1e-15 * max(cost, 1e-300) ** 0.5:
            converged, message = True, "gradient vanished"
            break
        D = np.sqrt(np.maximum(np.sum(J**2, axis=0), 1e-30))
        accepted = False
        while lam < 1e16:
            A = np.vstack([J, np.sqrt(lam) * np.diag(D)])
            b = np.concatenate([-r, np.zeros(len(x))])
            step = np.linalg.lstsq(A, b, rcond=None)[0]
            x_new = x + step
            r_new = fun(x_new)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
        small_gain = cost - cost_new <= ftol * cost
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10, 1e-12)
        J = numerical_jacobian(fun, x)
        if small_step or small_gain:
            converged, message = True, "step or cost change below tolerance"
            break
    return LMResult(x, cost, J, converged, it, message, history)
