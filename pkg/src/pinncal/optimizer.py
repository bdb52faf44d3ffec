"""Dense BFGS with a strong-Wolfe line search (c1=1e-4, c2=0.9).

The objective is a callable x -> (value, gradient) and must be
deterministic. Infeasible iterates may return +inf; the line search then
backtracks. The inverse-Hessian update is skipped when the curvature
condition fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C1 = 1e-4
C2 = 0.9
CURVATURE_SKIP_TOL = 1e-10


@dataclass
class StopCriteria:
    max_iters: int = 5000
    grad_tol: float = 1e-10          # inf-norm of the gradient
    loss_change_tol: float = 1e-14   # absolute decrease between iterations
    max_linesearch: int = 30
    # optional rescale of H0 to gamma*I = (s.y / y.y) I after the first
    # accepted step; off by default, it slows the calibration losses down
    # badly even though it helps on small classical test problems
    scale_initial_hessian: bool = False

    def __post_init__(self):
        if min(self.max_iters, self.max_linesearch) < 1 or \
                min(self.grad_tol, self.loss_change_tol) <= 0:
            raise ValueError("stop criteria must be positive")


@dataclass
class OptimResult:
    x: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    status: str
    history: list = field(default_factory=list)


def _cubic_step(a_lo, f_lo, df_lo, a_hi, f_hi):
    """Minimizer of the cubic through (a_lo, f_lo, df_lo) and (a_hi, f_hi),
    safeguarded into the interior of the bracket."""
    d = a_hi - a_lo
    if d == 0 or not np.isfinite(f_hi):
        return a_lo + 0.5 * d
    # quadratic interpolation using f_lo, df_lo, f_hi
    denom = 2.0 * (f_hi - f_lo - df_lo * d)
    if denom == 0 or not np.isfinite(denom):
        a = a_lo + 0.5 * d
    else:
        a = a_lo - df_lo * d * d / denom
    lo, hi = (a_lo, a_hi) if a_lo < a_hi else (a_hi, a_lo)
    margin = 0.1 * abs(d)
    if not np.isfinite(a) or a < lo + margin or a > hi - margin:
        a = a_lo + 0.5 * d
    return a


def _strong_wolfe(phi, f0, df0, max_iter):
    """Line search for phi(a) = f(x + a p). phi returns (value, slope, data).

    Returns (alpha, value, slope, data) or None on failure."""

    def zoom(a_lo, f_lo, df_lo, d_lo, a_hi, f_hi):
        for _ in range(max_iter):
            a_j = _cubic_step(a_lo, f_lo, df_lo, a_hi, f_hi)
            f_j, df_j, d_j = phi(a_j)
            if not np.isfinite(f_j) or f_j > f0 + C1 * a_j * df0 or f_j >= f_lo:
                a_hi, f_hi = a_j, f_j
            else:
                if abs(df_j) <= -C2 * df0:
                    return a_j, f_j, df_j, d_j
                if df_j * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, df_lo, d_lo = a_j, f_j, df_j, d_j
        if f_lo < f0 + C1 * a_lo * df0 and a_lo > 0:
            # sufficient decrease only; accept as a weak fallback
            return a_lo, f_lo, df_lo, d_lo
        return None

    a_prev, f_prev, df_prev, d_prev = 0.0, f0, df0, None
    a = 1.0
    for i in range(max_iter):
        f_a, df_a, d_a = phi(a)
        if not np.isfinite(f_a) or f_a > f0 + C1 * a * df0 or \
                (i > 0 and f_a >= f_prev):
            return zoom(a_prev, f_prev, df_prev, d_prev, a, f_a)
        if abs(df_a) <= -C2 * df0:
            return a, f_a, df_a, d_a
        if df_a >= 0:
            return zoom(a, f_a, df_a, d_a, a_prev, f_prev)
        a_prev, f_prev, df_prev, d_prev = a, f_a, df_a, d_a
        a *= 2.0
    return None


def bfgs_minimize(objective, x0: np.ndarray, criteria: StopCriteria | None = None,
                  callback=None) -> OptimResult:
    """Minimize a smooth objective with dense BFGS.

    `objective(x)` returns (value, gradient). `callback(k, x, value)` is
    invoked after each accepted iteration. The history records
    (iteration, value, grad_inf_norm, step_length) tuples.
    """
    criteria = criteria or StopCriteria()
    x = np.asarray(x0, dtype=np.float64).copy()
    n = x.size
    f, g = objective(x)
    if not np.isfinite(f):
        raise ValueError("objective not finite at the starting point")
    h = np.eye(n)
    first_update = True
    history = [(0, f, float(np.abs(g).max()), 0.0)]
    status = "max_iterations"
    k = 0
    for k in range(1, criteria.max_iters + 1):
        gnorm = float(np.abs(g).max())
        if gnorm < criteria.grad_tol:
            status = "gradient_converged"
            k -= 1
            break
        res = None
        cache = {}
        for attempt in range(2):
            if attempt == 1:
                # retry once along steepest descent with a fresh Hessian;
                # the quasi-Newton direction can point into the infeasible
                # region so hard that no Wolfe step exists along it
                h = np.eye(n)
                first_update = True
            p = -h @ g
            df0 = float(g @ p)
            if df0 >= 0:
                # H lost positive definiteness numerically
                h = np.eye(n)
                p = -g
                df0 = float(g @ p)

            cache = {}

            def phi(a):
                fa, ga = objective(x + a * p)
                cache[a] = ga
                slope = float(ga @ p) if np.all(np.isfinite(ga)) else np.nan
                return fa, slope, a

            res = _strong_wolfe(phi, f, df0, criteria.max_linesearch)
            if res is not None:
                break
        if res is None:
            status = "linesearch_failed"
            k -= 1
            break
        alpha, f_new, _, _ = res
        g_new = cache[alpha]
        s = alpha * p
        y = g_new - g
        x = x + s
        decrease = f - f_new
        f, g = f_new, g_new
        history.append((k, f, float(np.abs(g).max()), alpha))
        if callback is not None:
            callback(k, x, f)
        sy = float(s @ y)
        if sy > CURVATURE_SKIP_TOL * np.linalg.norm(s) * np.linalg.norm(y):
            if first_update and criteria.scale_initial_hessian:
                gamma = sy / float(y @ y)
                h = gamma * np.eye(n)
                first_update = False
            rho = 1.0 / sy
            hy = h @ y
            # BFGS inverse update: H <- (I - rho s y') H (I - rho y s') + rho s s'
            h -= rho * (np.outer(s, hy) + np.outer(hy, s))
            h += rho * (rho * float(y @ hy) + 1.0) * np.outer(s, s)
        if decrease < criteria.loss_change_tol:
            status = "loss_converged"
            break
    return OptimResult(x=x, value=f, gradient_norm=float(np.abs(g).max()),
                       iterations=k, status=status, history=history)
